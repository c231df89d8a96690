#pragma once

#include <algorithm>
#include <vector>

#include "gsn/adversaries.hpp"
#include "gsn/extractor.hpp"
#include "gsn/generator.hpp"
#include "gsn/losses.hpp"
#include "gsn/metrics.hpp"
#include "gsn/optimizer.hpp"

namespace gsn {

/// Sizing of a detection experiment: pairs that feed a freshly trained
/// detector, pairs held out for the report, and the detector's training
/// budget. The control arm zeroes the payload of both branches, which makes
/// cover and stego images bit-identical by construction.
struct EvalProtocol {
    Index train_pairs = 1000;
    Index test_pairs = 200;
    Index detector_steps = 400;
    Index batch_pairs = 16;
    std::uint64_t seed = 1;
    bool zero_payload = false;
};

/// Cover/stego pairs on the PNG byte grid plus the secret bits behind the
/// stego branch. Pairs share z and per-block noise, differing only in what
/// was merged.
template <typename S>
struct PairSet {
    Tensor<S> cover;  // [n, 3, R, R]
    Tensor<S> stego;  // [n, 3, R, R]
    Tensor<S> bits;   // [n, B, R, R]
};

namespace detail {

template <typename S>
void copy_rows(Tensor<S>& dst, Index at, const Tensor<S>& src) {
    Index per = dst.numel() / dst.dim(0);
    GSN_CHECK(src.numel() == per * src.dim(0), "row copy extent mismatch");
    std::copy(src.data(), src.data() + src.numel(), dst.data() + at * per);
}

}  // namespace detail

/// Draw n shared-latent pairs and quantize both branches onto the byte grid,
/// so the measurement sees exactly what a saved PNG would carry.
template <typename S>
PairSet<S> generate_eval_pairs(Generator<S>& G, const RunConfig& cfg, Index n, RandomStream& rs,
                               bool zero_payload) {
    Index R = cfg.resolution;
    PairSet<S> ps{Tensor<S>({n, 3, R, R}), Tensor<S>({n, 3, R, R}), Tensor<S>({n, cfg.payload_depth, R, R})};
    for (Index done = 0; done < n;) {
        Index m = std::min<Index>(32, n - done);
        Tensor<S> z = randn<S>(rs, {m, cfg.latent_dim});
        auto noise = G.sample_noise_fields(rs, m);
        Tensor<S> cover_payload = zero_payload ? Tensor<S>::zeros({m, 1, R, R})
                                               : randn<S>(rs, {m, 1, R, R}, cfg.sigma_test);
        Tensor<S> bits = zero_payload ? Tensor<S>::zeros({m, cfg.payload_depth, R, R})
                                      : rand_bits<S>(rs, {m, cfg.payload_depth, R, R});
        ImageBatch cover = G.generate(z, cover_payload, noise, ImageSource::cover);
        ImageBatch stego = G.generate(z, bits, noise, ImageSource::stego);
        detail::copy_rows(ps.cover, done, quantize_to_png_grid(cover.pixels).template cast<S>());
        detail::copy_rows(ps.stego, done, quantize_to_png_grid(stego.pixels).template cast<S>());
        detail::copy_rows(ps.bits, done, bits);
        done += m;
    }
    return ps;
}

/// Train a fresh detector on the train split. Initialization and batch order
/// come from the protocol seed, never from the generator's training streams.
template <typename S>
Steganalyzer<S> train_fresh_detector(const PairSet<S>& train, const RunConfig& cfg, const EvalProtocol& ep,
                                     double* final_loss = nullptr) {
    RunConfig dcfg = cfg;
    dcfg.seed = cfg.seed ^ (0x517cc1b727220a95ull * (ep.seed + 1));
    Steganalyzer<S> det(dcfg);
    Adam<S> opt = Adam<S>::from_config(cfg);
    RandomStream order(ep.seed, streams::kEvalDetector);
    Index n = train.cover.dim(0);
    Index m = std::min(ep.batch_pairs, n);
    Index R = cfg.resolution;
    double last = 0;
    for (Index step = 0; step < ep.detector_steps; ++step) {
        Tensor<S> bc({m, 3, R, R}), bs({m, 3, R, R});
        for (Index i = 0; i < m; ++i) {
            Index pick = (Index)order.below((std::uint64_t)n);
            Index per = 3 * R * R;
            std::copy(train.cover.data() + pick * per, train.cover.data() + (pick + 1) * per,
                      bc.data() + i * per);
            std::copy(train.stego.data() + pick * per, train.stego.data() + (pick + 1) * per,
                      bs.data() + i * per);
        }
        Tape<S> t;
        Value<S> loss = loss_S(det.logits(t, t.constant(bc)), det.logits(t, t.constant(bs)));
        last = (double)loss.val().v[0];
        GSN_CHECK(std::isfinite(last), "detector training loss became non-finite at step " << step);
        for (Param<S>* p : det.params()) p->zero_grad();
        t.backward(loss);
        opt.step(det.params());
    }
    if (final_loss) *final_loss = last;
    return det;
}

/// Full detection experiment: train a fresh detector on one split of
/// generated pairs, then report Pe / ROC / AUC on the held-out split, the
/// cover-stego MAE, and the extractor's bit accuracy on the held-out stegos.
template <typename S>
DetectionReport evaluate_detection(Generator<S>& G, Extractor<S>& E, const RunConfig& cfg,
                                   const EvalProtocol& ep) {
    GSN_CHECK(ep.train_pairs >= 64 && ep.test_pairs >= 64,
              "need at least 64 train and 64 test pairs, got " << ep.train_pairs << "/" << ep.test_pairs
                                                               << " (smaller splits are too noisy)");
    RandomStream rs(ep.seed, streams::kEval);
    PairSet<S> train = generate_eval_pairs(G, cfg, ep.train_pairs, rs, ep.zero_payload);
    PairSet<S> test = generate_eval_pairs(G, cfg, ep.test_pairs, rs, ep.zero_payload);
    Steganalyzer<S> det = train_fresh_detector(train, cfg, ep);

    DetectionReport rep = roc_auc(det.scores(test.cover), det.scores(test.stego));
    ImageBatch ct{test.cover.template cast<float>(), ImageSource::cover};
    ImageBatch st{test.stego.template cast<float>(), ImageSource::stego};
    rep.mae = mae_pairs(ct, st);
    rep.bit_acc = bit_accuracy(E.extract_bits(test.stego), test.bits);
    return rep;
}

}  // namespace gsn
