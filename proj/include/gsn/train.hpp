#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "gsn/adversaries.hpp"
#include "gsn/checkpoint.hpp"
#include "gsn/dataset.hpp"
#include "gsn/extractor.hpp"
#include "gsn/generator.hpp"
#include "gsn/losses.hpp"
#include "gsn/metrics.hpp"
#include "gsn/optimizer.hpp"

namespace gsn {

inline constexpr char kCheckpointMagic[9] = "GSNCKPT1";

/// Config a checkpoint was written with, without loading any network.
inline RunConfig read_checkpoint_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    GSN_CHECK(is.good(), "cannot open checkpoint: " << path);
    char magic[8];
    is.read(magic, 8);
    GSN_CHECK(is.good() && std::string(magic, 8) == std::string(kCheckpointMagic, 8),
              "not a checkpoint file: " << path);
    return RunConfig::from_text(ckpt::read_string(is));
}

struct LossRecord {
    Index step = 0;
    double g = 0, d = 0, s = 0, e = 0, acc = 0;
};

struct TrainState {
    Index step = 0;
    double eta = 0;  // running mean of the path length
    std::vector<LossRecord> history;
};

/// Four-network training rig. One step = sample shared-latent cover/stego
/// pairs, update the generator on realism + detector uniformity (+ lazy path
/// regularizer), the critic on real/fake (+ lazy gradient-norm penalty on
/// real images only), the detector on cover/stego labels, then generator and
/// extractor jointly on bit recovery with depth-keyed gradient decay.
template <typename S = float>
struct Trainer {
    // Central-difference extents for the curvature terms of the regularizers.
    static constexpr double kPlStep = 0.1;
    static constexpr double kR1Step = 0.01;

    RunConfig cfg;
    Generator<S> G;
    Extractor<S> E;
    Discriminator<S> D;
    Steganalyzer<S> SN;
    Adam<S> opt_g, opt_e, opt_d, opt_s;
    TrainState state;
    RandomStream rs_latent, rs_secret, rs_merge, rs_block, rs_extract, rs_pl;
    std::string last_checkpoint;

    explicit Trainer(const RunConfig& c)
        : cfg(c),
          G(c),
          E(c),
          D(c),
          SN(c),
          opt_g(Adam<S>::from_config(c)),
          opt_e(Adam<S>::from_config(c)),
          opt_d(Adam<S>::from_config(c)),
          opt_s(Adam<S>::from_config(c)),
          rs_latent(c.seed, streams::kLatent),
          rs_secret(c.seed, streams::kSecret),
          rs_merge(c.seed, streams::kMergeNoise),
          rs_block(c.seed, streams::kBlockNoise),
          rs_extract(c.seed, streams::kExtractNoise),
          rs_pl(c.seed, streams::kPathLength) {
        cfg.validate();
    }

    struct StepLosses {
        double g = 0, d = 0, s = 0, e = 0;
        double r1 = 0, pl = 0;  // exact penalty values on regularized steps
        double acc = 0;         // in-batch recovery accuracy
    };

    /// Per-step sampled inputs; the cover payload is scaled noise, the stego
    /// payload is fair bits, and z plus the per-block noise fields are shared
    /// by both branches of each pair.
    struct PairBatch {
        Tensor<S> z;
        std::vector<Tensor<S>> noise;
        Tensor<S> cover_payload;
        Tensor<S> bits;
        Tensor<S> img_cover;  // filled by the generator phase
        Tensor<S> img_stego;
    };

    PairBatch sample_pairs(Index n) {
        PairBatch pb;
        Index R = cfg.resolution;
        pb.z = randn<S>(rs_latent, {n, cfg.latent_dim});
        pb.noise = G.sample_noise_fields(rs_block, n);
        pb.cover_payload = randn<S>(rs_merge, {n, 1, R, R}, (S)cfg.sigma_train);
        pb.bits = rand_bits<S>(rs_secret, {n, cfg.payload_depth, R, R});
        return pb;
    }

    static void zero_grads(const std::vector<Param<S>*>& ps) {
        for (Param<S>* p : ps) p->zero_grad();
    }

    void ensure_finite(double v, const char* what) const {
        GSN_CHECK(std::isfinite(v), what << " became non-finite at step " << state.step
                                         << (last_checkpoint.empty()
                                                 ? std::string(" (no checkpoint written yet)")
                                                 : "; last good checkpoint: " + last_checkpoint));
    }

    bool reg_step() const { return state.step % cfg.reg_interval == 0; }

    /// Generator update: adversarial realism on the stego branch, detector
    /// uniformity on both branches, lazy path-length penalty.
    void phase_generator(PairBatch& pb, StepLosses& out) {
        auto synth_stego = [&](Tape<S>& tp, Value<S> w) { return G.synthesize(tp, w, pb.bits, pb.noise); };

        PathProbe<S> probe;
        Tensor<S> psi;
        bool reg = reg_step();
        if (reg) {
            Index n = pb.z.dim(0);
            psi = randn<S>(rs_pl, {n, 3, cfg.resolution, cfg.resolution});
            probe = pl_probe<S>([&](Tape<S>& tp, Value<S> z) { return G.map_latent(tp, z); }, synth_stego,
                                pb.z, psi);
            GSN_CHECK(probe.finite, "path-length probe produced non-finite gradients at step " << state.step);
            state.eta = cfg.pl_decay * state.eta + (1.0 - cfg.pl_decay) * probe.a_mean;
            out.pl = pl_penalty_value(probe.a, state.eta);
        }

        Tape<S> t;
        Value<S> w = G.map_latent(t, t.constant(pb.z));
        Value<S> img_c = G.synthesize(t, w, pb.cover_payload, pb.noise);
        Value<S> img_s = G.synthesize(t, w, pb.bits, pb.noise);
        Value<S> total = adv_loss_G(D.discriminate(t, img_s), adv_mode_from(cfg.adv_loss));
        if (cfg.use_steganalyzer)
            total = add(total, scale(loss_steg_G(SN.steganalyze(t, img_c), SN.steganalyze(t, img_s)),
                                     (S)cfg.lambda1));
        if (reg)
            total = add(total, scale(pl_penalty_on(t, synth_stego, w, psi, probe, state.eta, kPlStep),
                                     (S)(cfg.lambda2 * (double)cfg.reg_interval)));
        out.g = (double)total.val().v[0];
        ensure_finite(out.g, "generator loss");
        zero_grads(G.params());
        t.backward(total);
        opt_g.step(G.params());
        pb.img_cover = img_c.val();
        pb.img_stego = img_s.val();
    }

    /// Critic update. Real images enter here and nowhere else.
    void phase_discriminator(PairBatch& pb, const Tensor<S>& real, StepLosses& out) {
        auto dfn = [&](Tape<S>& tp, Value<S> x) { return D.discriminate(tp, x); };
        GradProbe<S> probe;
        bool reg = reg_step();
        if (reg) {
            probe = input_grad_probe<S>(dfn, real);
            GSN_CHECK(probe.finite, "critic input-gradient probe non-finite at step " << state.step);
            out.r1 = 0.5 * cfg.beta * probe.mean_sq;
        }
        Tape<S> t;
        Value<S> total =
            adv_loss_D(D.discriminate(t, t.constant(real)), D.discriminate(t, t.constant(pb.img_stego)));
        if (reg)
            total = add(total, scale(r1_penalty_on(t, dfn, real, probe, cfg.beta, kR1Step),
                                     (S)(cfg.alpha * (double)cfg.reg_interval)));
        out.d = (double)total.val().v[0];
        ensure_finite(out.d, "critic loss");
        zero_grads(D.params());
        t.backward(total);
        opt_d.step(D.params());
    }

    /// Detector update on the frozen pair images.
    void phase_detector(PairBatch& pb, StepLosses& out) {
        if (!cfg.use_steganalyzer) return;
        Tape<S> t;
        Value<S> total =
            loss_S(SN.logits(t, t.constant(pb.img_cover)), SN.logits(t, t.constant(pb.img_stego)));
        out.s = (double)total.val().v[0];
        ensure_finite(out.s, "detector loss");
        zero_grads(SN.params());
        t.backward(total);
        opt_s.step(SN.params());
    }

    /// Gradient half of the recovery phase: fills generator and extractor
    /// gradients for the bit recovery loss without stepping.
    void recovery_backward(PairBatch& pb, StepLosses& out) {
        Index n = pb.z.dim(0);
        Tape<S> t;
        Value<S> w = G.map_latent(t, t.constant(pb.z));
        Value<S> img = G.synthesize(t, w, pb.bits, pb.noise);
        Tensor<S> jitter = randn<S>(rs_extract, {n, 3, cfg.resolution, cfg.resolution}, (S)0.1);
        Value<S> noisy = add(img, t.constant(jitter));
        Value<S> logits = E.extract_logits(t, noisy);
        Value<S> total = loss_E(logits, pb.bits, recovery_mode_from(cfg.loss_e_mode));
        out.e = (double)total.val().v[0];
        ensure_finite(out.e, "recovery loss");
        out.acc = bit_accuracy(Extractor<S>::binarize(logits.val()), pb.bits);
        zero_grads(G.params());
        zero_grads(E.params());
        t.backward(total);
    }

    /// Depth decay on the generator gradients, identity at full resolution.
    void apply_recovery_decay() {
        for (Param<S>* p : G.params())
            hgd_scale(p->grad, p->hgd_h, p->hgd_w, cfg.resolution, cfg.resolution, cfg.delta);
    }

    /// Joint generator + extractor update on bit recovery, with the depth
    /// decay rescaling every generator gradient before the step.
    void phase_recovery(PairBatch& pb, StepLosses& out) {
        recovery_backward(pb, out);
        if (cfg.use_hgd) apply_recovery_decay();
        opt_g.step(G.params());
        opt_e.step(E.params());
    }

    StepLosses train_step(const Tensor<S>& real) {
        GSN_CHECK(real.rank() == 4 && real.dim(0) >= 1 && real.dim(1) == 3 &&
                      real.dim(2) == cfg.resolution && real.dim(3) == cfg.resolution,
                  "real batch must be [m x 3 x " << cfg.resolution << " x " << cfg.resolution << "], got "
                                                 << shape_str(real.dims));
        StepLosses out;
        PairBatch pb = sample_pairs(real.dim(0));
        phase_generator(pb, out);
        phase_discriminator(pb, real, out);
        phase_detector(pb, out);
        phase_recovery(pb, out);
        ++state.step;
        state.history.push_back({state.step, out.g, out.d, out.s, out.e, out.acc});
        return out;
    }

    /// Recovery accuracy on freshly sampled pairs, measured after the pixel
    /// grid quantization every saved image goes through.
    double eval_accuracy(Index n_pairs, std::uint64_t salt) {
        RandomStream ev(cfg.seed ^ (0x9e3779b97f4a7c15ull * (salt + 1)), streams::kEval);
        double hits = 0, total = 0;
        Index R = cfg.resolution;
        for (Index done = 0; done < n_pairs;) {
            Index n = std::min<Index>(32, n_pairs - done);
            Tensor<S> z = randn<S>(ev, {n, cfg.latent_dim});
            auto noise = G.sample_noise_fields(ev, n);
            Tensor<S> d = rand_bits<S>(ev, {n, cfg.payload_depth, R, R});
            ImageBatch stego = G.generate(z, d, noise, ImageSource::stego);
            Tensor<float> q = quantize_to_png_grid(stego.pixels);
            Tensor<S> bits = E.extract_bits(q.template cast<S>());
            hits += bit_accuracy(bits, d) * (double)d.numel();
            total += (double)d.numel();
            done += n;
        }
        return hits / total;
    }

    // ----- checkpointing -----------------------------------------------

    static constexpr const char* kMagic = kCheckpointMagic;

    void save_checkpoint(const std::string& path, Dataset::Cursor cursor) {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        GSN_CHECK(os.good(), "cannot open checkpoint for writing: " << path);
        os.write(kMagic, 8);
        ckpt::write_string(os, cfg.to_text());
        ckpt::write_i64(os, state.step);
        ckpt::write_f64(os, state.eta);
        for (const RandomStream* rs : {&rs_latent, &rs_secret, &rs_merge, &rs_block, &rs_extract, &rs_pl})
            ckpt::write_u64(os, rs->counter());
        ckpt::write_u64(os, cursor.shuffle_counter);
        ckpt::write_u64(os, cursor.position);
        ckpt::write_u64(os, state.history.size());
        for (const LossRecord& r : state.history) {
            ckpt::write_i64(os, r.step);
            ckpt::write_f64(os, r.g);
            ckpt::write_f64(os, r.d);
            ckpt::write_f64(os, r.s);
            ckpt::write_f64(os, r.e);
            ckpt::write_f64(os, r.acc);
        }
        ckpt::write_params<S>(os, "G", G.params());
        ckpt::write_params<S>(os, "E", E.params());
        ckpt::write_params<S>(os, "D", D.params());
        ckpt::write_params<S>(os, "S", SN.params());
        for (Adam<S>* opt : {&opt_g, &opt_e, &opt_d, &opt_s}) {
            ckpt::write_i64(os, opt->t);
            ckpt::write_u64(os, opt->m.size());
            for (std::size_t i = 0; i < opt->m.size(); ++i) {
                ckpt::write_tensor(os, opt->m[i]);
                ckpt::write_tensor(os, opt->v[i]);
            }
        }
        GSN_CHECK(os.good(), "write failure on checkpoint: " << path);
        os.close();
        last_checkpoint = path;
    }

    /// Restores everything save_checkpoint wrote except the dataset cursor,
    /// which is returned for the caller to feed to Dataset::restore. The
    /// trainer must be constructed from the same config.
    Dataset::Cursor load_checkpoint(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        GSN_CHECK(is.good(), "cannot open checkpoint: " << path);
        char magic[8];
        is.read(magic, 8);
        GSN_CHECK(is.good() && std::string(magic, 8) == std::string(kMagic, 8),
                  "not a checkpoint file: " << path);
        RunConfig stored = RunConfig::from_text(ckpt::read_string(is));
        // Run-length plumbing may differ between the writing and the resuming
        // run (extending a run is the point of resuming); everything that
        // shapes the trajectory must match exactly.
        RunConfig a = stored, b = cfg;
        a.steps = b.steps = 0;
        a.checkpoint_every = b.checkpoint_every = 0;
        a.eval_every = b.eval_every = 0;
        GSN_CHECK(a == b, "checkpoint was written with a different configuration");
        state.step = ckpt::read_i64(is);
        state.eta = ckpt::read_f64(is);
        for (RandomStream* rs : {&rs_latent, &rs_secret, &rs_merge, &rs_block, &rs_extract, &rs_pl})
            rs->set_counter(ckpt::read_u64(is));
        Dataset::Cursor cursor;
        cursor.shuffle_counter = ckpt::read_u64(is);
        cursor.position = ckpt::read_u64(is);
        std::uint64_t hn = ckpt::read_u64(is);
        GSN_CHECK(hn <= (1ull << 32), "checkpoint history length is implausible");
        state.history.resize((std::size_t)hn);
        for (LossRecord& r : state.history) {
            r.step = ckpt::read_i64(is);
            r.g = ckpt::read_f64(is);
            r.d = ckpt::read_f64(is);
            r.s = ckpt::read_f64(is);
            r.e = ckpt::read_f64(is);
            r.acc = ckpt::read_f64(is);
        }
        ckpt::read_params<S>(is, "G", G.params());
        ckpt::read_params<S>(is, "E", E.params());
        ckpt::read_params<S>(is, "D", D.params());
        ckpt::read_params<S>(is, "S", SN.params());
        for (Adam<S>* opt : {&opt_g, &opt_e, &opt_d, &opt_s}) {
            opt->t = ckpt::read_i64(is);
            std::uint64_t n = ckpt::read_u64(is);
            opt->m.clear();
            opt->v.clear();
            for (std::uint64_t i = 0; i < n; ++i) {
                opt->m.push_back(ckpt::read_tensor<S>(is));
                opt->v.push_back(ckpt::read_tensor<S>(is));
            }
        }
        last_checkpoint = path;
        return cursor;
    }

    static std::string checkpoint_path(const std::string& dir, Index step) {
        std::ostringstream os;
        os << dir << "/checkpoint_" << std::setw(8) << std::setfill('0') << step << ".bin";
        return os.str();
    }

    /// Main loop: periodic metric logging, evaluation, and checkpoints.
    /// Resumable mid-run; with steps already reached only the checkpoint of
    /// the current state is (re)written.
    void fit(Dataset& data, const std::string& out_dir, std::ostream* echo = nullptr) {
        std::filesystem::create_directories(out_dir);
        std::ofstream log(out_dir + "/metrics.log", std::ios::app);
        GSN_CHECK(log.good(), "cannot open metric log in " << out_dir);
        auto emit = [&](const std::string& line) {
            log << line << '\n';
            log.flush();
            if (echo) (*echo) << line << '\n';
        };
        if (state.step == 0) save_checkpoint(checkpoint_path(out_dir, 0), data.cursor());
        while (state.step < cfg.steps) {
            ImageBatch rb = data.next_batch(cfg.batch_size);
            StepLosses sl = train_step(rb.pixels.template cast<S>());
            std::ostringstream line;
            line.precision(6);
            line << "step=" << state.step << " loss_g=" << sl.g << " loss_d=" << sl.d
                 << " loss_s=" << sl.s << " loss_e=" << sl.e << " acc=" << sl.acc;
            if ((state.step - 1) % cfg.reg_interval == 0)
                line << " r1=" << sl.r1 << " pl=" << sl.pl << " eta=" << state.eta;
            emit(line.str());
            if (state.step % cfg.eval_every == 0 || state.step == cfg.steps) {
                double acc = eval_accuracy(64, (std::uint64_t)state.step);
                std::ostringstream ev;
                ev.precision(6);
                ev << "eval step=" << state.step << " acc=" << acc;
                emit(ev.str());
            }
            if (state.step % cfg.checkpoint_every == 0 || state.step == cfg.steps)
                save_checkpoint(checkpoint_path(out_dir, state.step), data.cursor());
        }
        if (last_checkpoint.empty() || state.step == 0)
            save_checkpoint(checkpoint_path(out_dir, state.step), data.cursor());
    }
};

/// Highest-numbered checkpoint in a run directory, empty string if none.
inline std::string find_latest_checkpoint(const std::string& dir) {
    std::string best;
    Index best_step = -1;
    if (!std::filesystem::is_directory(dir)) return best;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        std::string name = e.path().filename().string();
        if (name.rfind("checkpoint_", 0) != 0 || e.path().extension() != ".bin") continue;
        Index step = (Index)std::strtoll(name.substr(11).c_str(), nullptr, 10);
        if (step > best_step) {
            best_step = step;
            best = e.path().string();
        }
    }
    return best;
}

}  // namespace gsn
