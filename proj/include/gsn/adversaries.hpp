#pragma once

#include <vector>

#include "gsn/config.hpp"
#include "gsn/layers.hpp"

namespace gsn {

/// Residual block that halves the spatial extent. The first conv runs at the
/// input resolution, the second after pooling, and a pooled 1x1 projection
/// carries the skip; the sum is scaled by 1/sqrt(2) to keep variance flat.
template <typename S>
struct ResidualDown {
    PlainConv<S> conv1;  // 3x3, c  -> c
    PlainConv<S> conv2;  // 3x3, c  -> c2
    PlainConv<S> skip;   // 1x1, c  -> c2

    ResidualDown() = default;
    ResidualDown(const std::string& name, RandomStream& rs, Index in_ch, Index out_ch)
        : conv1(name + ".conv1", rs, in_ch, in_ch, 3),
          conv2(name + ".conv2", rs, in_ch, out_ch, 3),
          skip(name + ".skip", rs, in_ch, out_ch, 1) {}

    Value<S> operator()(Tape<S>& t, Value<S> x) {
        Value<S> main = conv2(t, meanpool2x(leaky_relu(conv1(t, x))));
        Value<S> sk = skip(t, meanpool2x(x));
        return scale(leaky_relu(main) + sk, (S)0.7071067811865476);
    }

    void collect(std::vector<Param<S>*>& out) {
        conv1.collect(out);
        conv2.collect(out);
        skip.collect(out);
    }
};

/// Residual block that keeps the spatial extent (noise-residual preserving).
template <typename S>
struct ResidualSame {
    PlainConv<S> conv1, conv2;  // 3x3, c -> c

    ResidualSame() = default;
    ResidualSame(const std::string& name, RandomStream& rs, Index ch)
        : conv1(name + ".conv1", rs, ch, ch, 3), conv2(name + ".conv2", rs, ch, ch, 3) {}

    Value<S> operator()(Tape<S>& t, Value<S> x) {
        return scale(x + conv2(t, leaky_relu(conv1(t, x))), (S)0.7071067811865476);
    }

    void collect(std::vector<Param<S>*>& out) {
        conv1.collect(out);
        conv2.collect(out);
    }
};

/// Real-versus-generated critic: residual downsampling stack to 4x4, then a
/// dense head producing one logit per image.
template <typename S>
struct Discriminator {
    RunConfig cfg;
    PlainConv<S> from_rgb;  // 1x1, 3 -> width at full resolution
    std::vector<ResidualDown<S>> blocks;
    PlainConv<S> final_conv;  // 3x3 at 4x4
    Dense<S> fc1, fc2;

    Index channels_at(Index res) const {
        Index c = cfg.disc_channels * (cfg.resolution / res);
        return std::min(c, cfg.disc_channel_max);
    }

    explicit Discriminator(const RunConfig& c) : cfg(c) {
        cfg.validate();
        RandomStream rs(cfg.seed, streams::kInit + 200);
        from_rgb = PlainConv<S>("D.from_rgb", rs, 3, channels_at(cfg.resolution), 1);
        for (Index r = cfg.resolution; r > 4; r /= 2)
            blocks.emplace_back("D.block" + std::to_string(r), rs, channels_at(r), channels_at(r / 2));
        Index c4 = channels_at(4);
        final_conv = PlainConv<S>("D.final_conv", rs, c4, c4, 3);
        fc1 = Dense<S>("D.fc1", rs, c4 * 16, c4);
        fc2 = Dense<S>("D.fc2", rs, c4, 1);
    }

    std::vector<Param<S>*> params() {
        std::vector<Param<S>*> out;
        from_rgb.collect(out);
        for (auto& b : blocks) b.collect(out);
        final_conv.collect(out);
        fc1.collect(out);
        fc2.collect(out);
        return out;
    }

    /// images [n, 3, R, R] -> logits [n].
    Value<S> discriminate(Tape<S>& t, Value<S> images) {
        const Tensor<S>& im = images.val();
        GSN_CHECK(im.rank() == 4 && im.dim(1) == 3 && im.dim(2) == cfg.resolution && im.dim(3) == cfg.resolution,
                  "discriminator expects [n x 3 x " << cfg.resolution << " x " << cfg.resolution
                                                    << "] images, got " << shape_str(im.dims));
        Index n = im.dim(0);
        Value<S> x = leaky_relu(from_rgb(t, images));
        for (auto& b : blocks) x = b(t, x);
        x = leaky_relu(final_conv(t, x));
        x = reshape(x, {n, channels_at(4) * 16});
        x = leaky_relu(fc1(t, x));
        return reshape(fc2(t, x), {n});
    }
};

/// Cover-versus-stego detector. The first two stages keep full resolution so
/// high-frequency embedding residuals survive; later stages pool down to 2x2
/// before the global average. Output is a softmax over [cover, stego].
template <typename S>
struct Steganalyzer {
    RunConfig cfg;
    PlainConv<S> stem;  // 3x3, 3 -> width
    std::vector<ResidualSame<S>> full_res;
    std::vector<ResidualDown<S>> pooled;
    Dense<S> head;

    explicit Steganalyzer(const RunConfig& c) : cfg(c) {
        cfg.validate();
        RandomStream rs(cfg.seed, streams::kInit + 300);
        Index w = cfg.stega_channels;
        stem = PlainConv<S>("S.stem", rs, 3, w, 3);
        full_res.emplace_back("S.same0", rs, w);
        full_res.emplace_back("S.same1", rs, w);
        Index ch = w;
        for (Index r = cfg.resolution; r > 2; r /= 2) {
            Index nxt = std::min(ch * 2, cfg.stega_channel_max);
            pooled.emplace_back("S.down" + std::to_string(r), rs, ch, nxt);
            ch = nxt;
        }
        head = Dense<S>("S.head", rs, ch, 2);
    }

    std::vector<Param<S>*> params() {
        std::vector<Param<S>*> out;
        stem.collect(out);
        for (auto& b : full_res) b.collect(out);
        for (auto& b : pooled) b.collect(out);
        head.collect(out);
        return out;
    }

    /// images [n, 3, R, R] -> logits [n, 2]; column 0 = cover, column 1 = stego.
    Value<S> logits(Tape<S>& t, Value<S> images) {
        const Tensor<S>& im = images.val();
        GSN_CHECK(im.rank() == 4 && im.dim(1) == 3 && im.dim(2) == cfg.resolution && im.dim(3) == cfg.resolution,
                  "steganalyzer expects [n x 3 x " << cfg.resolution << " x " << cfg.resolution
                                                   << "] images, got " << shape_str(im.dims));
        Value<S> x = leaky_relu(stem(t, images));
        for (auto& b : full_res) x = b(t, x);
        for (auto& b : pooled) x = b(t, x);
        return head(t, global_avg_pool(x));
    }

    /// Class probabilities [n, 2].
    Value<S> steganalyze(Tape<S>& t, Value<S> images) { return softmax_rows(logits(t, images)); }

    /// Stego-class probabilities for a batch, no tape.
    std::vector<double> scores(const Tensor<S>& images) {
        Tape<S> t;
        Tensor<S> p = steganalyze(t, t.constant(images)).val();
        std::vector<double> out((std::size_t)p.dim(0));
        for (Index i = 0; i < p.dim(0); ++i) out[(std::size_t)i] = (double)p.at(i, 1);
        return out;
    }
};

}  // namespace gsn
