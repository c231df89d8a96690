#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gsn/tape.hpp"

namespace gsn {

enum class AdvMode { nonsat, literal };
enum class RecoveryMode { two_sided, one_sided };

inline AdvMode adv_mode_from(const std::string& s) {
    GSN_CHECK(s == "nonsat" || s == "literal", "unknown adversarial mode: " << s);
    return s == "nonsat" ? AdvMode::nonsat : AdvMode::literal;
}

inline RecoveryMode recovery_mode_from(const std::string& s) {
    GSN_CHECK(s == "two_sided" || s == "one_sided", "unknown recovery loss mode: " << s);
    return s == "two_sided" ? RecoveryMode::two_sided : RecoveryMode::one_sided;
}

/// Generator side of the adversarial game. The non-saturating default keeps
/// gradient when the critic wins early; the literal form min log(1 - D(fake))
/// is kept selectable. Both push the fake logit upward.
template <typename S>
Value<S> adv_loss_G(Value<S> fake_logits, AdvMode mode) {
    if (mode == AdvMode::nonsat) return mean_all(softplus(scale(fake_logits, (S)-1)));
    // log(1 - sigmoid(f)) == -softplus(f)
    return scale(mean_all(softplus(fake_logits)), (S)-1);
}

/// Critic side; identical in both modes since -log sigmoid(r) = softplus(-r).
template <typename S>
Value<S> adv_loss_D(Value<S> real_logits, Value<S> fake_logits) {
    return add(mean_all(softplus(scale(real_logits, (S)-1))), mean_all(softplus(fake_logits)));
}

/// Pushes detector outputs on generated images toward the uninformative
/// [0.5, 0.5]: batch mean of the per-sample Euclidean distance, one term per
/// branch (cover and stego).
template <typename S>
Value<S> loss_steg_G(Value<S> cover_probs, Value<S> stego_probs) {
    auto term = [](Value<S> p) {
        // note: appending ops can grow the tape and move p's stored tensor,
        // so its row count is captured up front
        const Tensor<S>& pv = p.val();
        GSN_CHECK(pv.rank() == 2 && pv.dim(1) == 2, "detector probabilities must be [n x 2], got "
                                                        << shape_str(pv.dims));
        Index n = pv.dim(0);
        Value<S> off = add_scalar(scale(p, (S)-1), (S)0.5);
        Value<S> dist = sqrt_guarded(rowwise_sum(square(off)));
        return scale(sum_all(dist), (S)(1.0 / (double)n));
    };
    return add(term(cover_probs), term(stego_probs));
}

/// Batch-mean softmax cross-entropy of two-column logits against one fixed
/// label column: mean_i (logsumexp(l_i) - l_i[col]). Single fused op; the
/// backward is (softmax - onehot)/n, which stays full strength however
/// saturated the logits are.
template <typename S>
Value<S> cross_entropy_rows(Value<S> logits, Index col) {
    const Tensor<S>& lv = logits.val();
    GSN_CHECK(lv.rank() == 2 && lv.dim(1) == 2,
              "detector logits must be [n x 2], got " << shape_str(lv.dims));
    GSN_CHECK(col == 0 || col == 1, "label column must be 0 or 1, got " << col);
    Index n = lv.dim(0);
    Tensor<S> p({n, 2});
    double total = 0;
    for (Index i = 0; i < n; ++i) {
        S a = lv.at(i, 0), b = lv.at(i, 1);
        S m = std::max(a, b);
        S ea = std::exp(a - m), eb = std::exp(b - m);
        p.at(i, 0) = ea / (ea + eb);
        p.at(i, 1) = eb / (ea + eb);
        total += (double)(m + std::log(ea + eb) - lv.at(i, col));
    }
    Tensor<S> out({1});
    out.v[0] = (S)(total / (double)n);
    int pl = logits.id;
    return logits.tape->custom(std::move(out), {pl}, [pl, p, col, n](Tape<S>& t, int id) {
        if (!t.requires_grad(pl)) return;
        S g = t.grad(id).v[0] / (S)n;
        Tensor<S>& gl = t.grad(pl);
        for (Index i = 0; i < n; ++i) {
            gl.at(i, 0) += g * (p.at(i, 0) - (col == 0 ? (S)1 : (S)0));
            gl.at(i, 1) += g * (p.at(i, 1) - (col == 1 ? (S)1 : (S)0));
        }
    });
}

/// Detector training objective: cross-entropy against the fixed labels
/// cover = [1,0], stego = [0,1], each branch batch-averaged. Takes raw
/// logits: a clamped log of probabilities has zero gradient once the
/// detector saturates confidently wrong, which strands it there for good.
template <typename S>
Value<S> loss_S(Value<S> cover_logits, Value<S> stego_logits) {
    return add(cross_entropy_rows(cover_logits, 0), cross_entropy_rows(stego_logits, 1));
}

/// Bit recovery objective on the extractor's logit field. Two-sided binary
/// cross-entropy by default so zero bits also constrain the output; the
/// one-sided form that only rewards set bits is selectable for study.
/// Written with -log sigmoid(f) = softplus(-f) so the gradient never dies,
/// no matter how saturated a wrong bit becomes.
template <typename S>
Value<S> loss_E(Value<S> logits, const Tensor<S>& bits, RecoveryMode mode) {
    const Tensor<S>& f = logits.val();
    GSN_CHECK(f.same_shape(bits),
              "bit tensor " << shape_str(bits.dims) << " does not match logits " << shape_str(f.dims));
    Tape<S>& t = *logits.tape;
    Value<S> d = t.constant(bits);
    Value<S> pos = mul(d, softplus(scale(logits, (S)-1)));
    if (mode == RecoveryMode::one_sided) return mean_all(pos);
    Tensor<S> inv = bits;
    inv.v = (S)1 - inv.v;
    Value<S> neg = mul(t.constant(inv), softplus(logits));
    return mean_all(add(pos, neg));
}

/// Depth-keyed gradient attenuation: a layer whose feature map is (h, w) in a
/// network that outputs (H, W) has its gradient divided by
/// delta^(log2 sqrt(HW) - log2 sqrt(hw)). Identity at full resolution.
inline double hgd_factor(Index h, Index w, Index H, Index W, double delta) {
    GSN_CHECK(h >= 1 && w >= 1 && h <= H && w <= W,
              "feature extent " << h << "x" << w << " exceeds output extent " << H << "x" << W);
    GSN_CHECK(delta > 1, "decay base must exceed 1, got " << delta);
    double expo = std::log2(std::sqrt((double)H * (double)W)) - std::log2(std::sqrt((double)h * (double)w));
    return std::pow(delta, expo);
}

template <typename S>
void hgd_scale(Tensor<S>& grad, Index h, Index w, Index H, Index W, double delta) {
    grad.v *= (S)(1.0 / hgd_factor(h, w, H, W, delta));
}

// ---------------------------------------------------------------------------
// Input-gradient regularizers. Both need second-order terms; each is split
// into a probe pass that measures per-sample input gradients exactly, and an
// in-graph linearization whose value matches the exact penalty and whose
// gradient is a central-difference curvature product through two extra
// forward passes.

/// Per-sample gradient of a scalar-per-sample function at x, plus unit
/// directions for the follow-up difference passes. Rows with zero gradient
/// keep a zero direction.
template <typename S>
struct GradProbe {
    Tensor<S> unit;            // same shape as x
    std::vector<double> norm;  // per-sample L2 norms
    double mean_sq = 0;        // mean of squared norms
    bool finite = true;
};

template <typename S, typename Fn>
GradProbe<S> input_grad_probe(Fn&& f, const Tensor<S>& x) {
    Tape<S> t;
    Value<S> xin = t.input(x);
    Value<S> out = f(t, xin);
    Index n = x.dim(0);
    GSN_CHECK(out.val().numel() == n, "probe function must emit one scalar per sample");
    t.backward(sum_all(out));
    GradProbe<S> probe;
    probe.unit = t.grad(xin.id);
    probe.finite = probe.unit.all_finite();
    probe.norm.resize((std::size_t)n, 0.0);
    Index row = x.numel() / n;
    for (Index i = 0; i < n; ++i) {
        double sq = 0;
        S* r = probe.unit.data() + i * row;
        for (Index j = 0; j < row; ++j) sq += (double)r[j] * (double)r[j];
        double nm = std::sqrt(sq);
        probe.norm[(std::size_t)i] = nm;
        probe.mean_sq += sq / (double)n;
        if (nm > 0)
            for (Index j = 0; j < row; ++j) r[j] = (S)((double)r[j] / nm);
    }
    if (!std::isfinite(probe.mean_sq)) probe.finite = false;
    return probe;
}

/// Gradient-norm penalty on real inputs: value (beta/2) E ||grad_x f||^2, with
/// parameter gradients from the curvature along the probe directions.
template <typename S, typename Fn>
Value<S> r1_penalty_on(Tape<S>& t, Fn&& f, const Tensor<S>& x, const GradProbe<S>& probe, double beta,
                       double h) {
    Index n = x.dim(0);
    Tensor<S> xp = x, xm = x;
    xp.v += (S)h * probe.unit.v;
    xm.v -= (S)h * probe.unit.v;
    Value<S> fd = scale(sub(f(t, t.constant(xp)), f(t, t.constant(xm))), (S)(1.0 / (2.0 * h)));
    Tensor<S> norms({n});
    for (Index i = 0; i < n; ++i) norms.v[i] = (S)probe.norm[(std::size_t)i];
    Value<S> lin = scale(mean_all(mul(fd, t.constant(norms))), (S)beta);
    // lin's value is beta * E||g||^2; shift down so the value is the penalty
    // itself while the parameter gradient keeps the full curvature term.
    return add_scalar(lin, (S)(-0.5 * beta * probe.mean_sq));
}

/// Path-length probe: per-sample norm of the latent gradient of the
/// projection <image, psi>, measured with the latent re-fed as an input.
template <typename S>
struct PathProbe {
    Tensor<S> unit;            // [n, latent_dim]
    std::vector<double> a;     // per-sample norms
    double a_mean = 0;
    bool finite = true;
};

template <typename S, typename MapFn, typename SynthFn>
PathProbe<S> pl_probe(MapFn&& map_fn, SynthFn&& synth_fn, const Tensor<S>& z, const Tensor<S>& psi) {
    Tape<S> t;
    Value<S> w_live = map_fn(t, t.constant(z));
    Value<S> w = t.input(w_live.val());
    Value<S> img = synth_fn(t, w);
    GSN_CHECK(img.val().same_shape(psi), "projection field " << shape_str(psi.dims)
                                                             << " does not match images "
                                                             << shape_str(img.val().dims));
    t.backward(dot(img, t.constant(psi)));
    PathProbe<S> probe;
    probe.unit = t.grad(w.id);
    probe.finite = probe.unit.all_finite();
    Index n = probe.unit.dim(0), row = probe.unit.dim(1);
    probe.a.resize((std::size_t)n, 0.0);
    for (Index i = 0; i < n; ++i) {
        double sq = 0;
        S* r = probe.unit.data() + i * row;
        for (Index j = 0; j < row; ++j) sq += (double)r[j] * (double)r[j];
        double nm = std::sqrt(sq);
        probe.a[(std::size_t)i] = nm;
        probe.a_mean += nm / (double)n;
        if (nm > 0)
            for (Index j = 0; j < row; ++j) r[j] = (S)((double)r[j] / nm);
    }
    if (!std::isfinite(probe.a_mean)) probe.finite = false;
    return probe;
}

/// Squared deviation of the per-sample path length from the running mean eta,
/// linearized around the probe so the value is exact and the gradient flows
/// through two shifted synthesis passes.
template <typename S, typename SynthFn>
Value<S> pl_penalty_on(Tape<S>& t, SynthFn&& synth_fn, Value<S> w, const Tensor<S>& psi,
                       const PathProbe<S>& probe, double eta, double h) {
    Index n = w.val().dim(0);
    Tensor<S> step = probe.unit;
    step.v *= (S)h;
    Value<S> wp = add(w, t.constant(step));
    step.v = -step.v;
    Value<S> wm = add(w, t.constant(step));
    auto project = [&](Value<S> img) {
        Index row = img.val().numel() / n;
        Tensor<S> flat = psi.reshaped({n, row});
        return rowwise_sum(mul(reshape(img, {n, row}), t.constant(flat)));
    };
    Value<S> fd = scale(sub(project(synth_fn(t, wp)), project(synth_fn(t, wm))), (S)(1.0 / (2.0 * h)));
    Tensor<S> coef({n});
    double offset = 0;
    for (Index i = 0; i < n; ++i) {
        double dev = probe.a[(std::size_t)i] - eta;
        coef.v[i] = (S)(2.0 * dev);
        offset += (dev * dev - 2.0 * dev * probe.a[(std::size_t)i]) / (double)n;
    }
    return add_scalar(mean_all(mul(fd, t.constant(coef))), (S)offset);
}

/// Exact penalty value matching pl_penalty_on.
inline double pl_penalty_value(const std::vector<double>& a, double eta) {
    double s = 0;
    for (double ai : a) s += (ai - eta) * (ai - eta) / (double)a.size();
    return s;
}

}  // namespace gsn
