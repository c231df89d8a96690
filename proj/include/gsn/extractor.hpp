#pragma once

#include <vector>

#include "gsn/config.hpp"
#include "gsn/layers.hpp"

namespace gsn {

/// Secret recovery network. Fully convolutional with no pooling: every bit
/// plane position maps to the same spatial position of the logit map, so the
/// capacity is exactly payload_depth bits per pixel.
template <typename S>
struct Extractor {
    RunConfig cfg;
    std::vector<PlainConv<S>> convs;  // three blocks of two 3x3 convs
    PlainConv<S> head_mix;            // 1x1, width -> width
    PlainConv<S> head_out;            // 1x1, width -> payload_depth, linear

    explicit Extractor(const RunConfig& c) : cfg(c) {
        cfg.validate();
        RandomStream rs(cfg.seed, streams::kInit + 100);
        Index w = cfg.ext_width;
        convs.reserve(6);
        for (int blk = 0; blk < 3; ++blk)
            for (int i = 0; i < 2; ++i) {
                Index in_ch = (blk == 0 && i == 0) ? 3 : w;
                convs.emplace_back("E.block" + std::to_string(blk) + ".conv" + std::to_string(i), rs, in_ch,
                                   w, 3);
            }
        head_mix = PlainConv<S>("E.head_mix", rs, w, w, 1);
        head_out = PlainConv<S>("E.head_out", rs, w, cfg.payload_depth, 1);
    }

    std::vector<Param<S>*> params() {
        std::vector<Param<S>*> out;
        for (auto& c : convs) c.collect(out);
        head_mix.collect(out);
        head_out.collect(out);
        return out;
    }

    /// images [n, 3, H, W] -> logits [n, payload_depth, H, W].
    Value<S> extract_logits(Tape<S>& t, Value<S> images) {
        const Tensor<S>& im = images.val();
        GSN_CHECK(im.rank() == 4 && im.dim(1) == 3, "extractor expects [n x 3 x H x W] images, got "
                                                        << shape_str(im.dims));
        Value<S> x = images;
        for (auto& c : convs) x = leaky_relu(c(t, x));
        x = leaky_relu(head_mix(t, x));
        return head_out(t, x);
    }

    /// Hard decisions without a tape.
    Tensor<S> extract_bits(const Tensor<S>& images) {
        Tape<S> t;
        Tensor<S> logits = extract_logits(t, t.constant(images)).val();
        return binarize(logits);
    }

    static Tensor<S> binarize(const Tensor<S>& logits) {
        Tensor<S> out = logits;
        out.v = (out.v >= (S)0).template cast<S>();
        return out;
    }
};

/// Fraction of positions where the hard decisions match the reference bits.
template <typename S>
double bit_accuracy(const Tensor<S>& decoded, const Tensor<S>& truth) {
    GSN_CHECK(decoded.same_shape(truth), "bit accuracy: shape mismatch " << shape_str(decoded.dims)
                                                                         << " vs " << shape_str(truth.dims));
    GSN_CHECK(decoded.numel() > 0, "bit accuracy of an empty tensor");
    double hits = 0;
    for (Index i = 0; i < decoded.numel(); ++i) {
        S a = decoded.v[i], b = truth.v[i];
        GSN_CHECK((a == (S)0 || a == (S)1) && (b == (S)0 || b == (S)1),
                  "bit accuracy expects binary tensors");
        hits += (a == b) ? 1.0 : 0.0;
    }
    return hits / (double)decoded.numel();
}

}  // namespace gsn
