#pragma once

#include "gsn/rng.hpp"
#include "gsn/tape.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace gsn {

/// Outcome of a finite-difference gradient check. `where` names the worst
/// element; `finite` is false when any value, gradient, or difference
/// quotient came out NaN/Inf (in which case max_rel_err is +inf).
template <typename S>
struct GradCheckReport {
    S max_rel_err = 0;
    bool finite = true;
    std::string where;

    bool passes(S tol) const { return finite && max_rel_err <= tol; }
};

/// Compare reverse-mode gradients of `op` against central differences.
///
/// `op` maps (tape, leaf values) to an output value of any shape; the output
/// is reduced to a scalar by a fixed random projection so one backward pass
/// covers every output element. All elements of every input are perturbed.
/// Relative error uses max(|analytic|, |numeric|, 1e-6) as denominator.
template <typename S, typename Op>
GradCheckReport<S> check_gradients(Op&& op, const std::vector<Tensor<S>>& inputs, S eps = (S)1e-5,
                                   std::uint64_t proj_seed = 0x9e3779b97f4a7c15ull) {
    GradCheckReport<S> report;
    auto fail_nonfinite = [&](const std::string& where) {
        report.finite = false;
        report.max_rel_err = std::numeric_limits<S>::infinity();
        report.where = where;
    };

    std::vector<Param<S>> params;
    params.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i)
        params.emplace_back("arg" + std::to_string(i), inputs[i]);

    Tensor<S> proj;  // fixed projection; sized on the first forward pass
    auto forward = [&](bool with_tape, S* loss_out) -> bool {
        Tape<S> tape;
        std::vector<Value<S>> vals;
        vals.reserve(params.size());
        for (auto& p : params) vals.push_back(tape.leaf(p));
        Value<S> out = op(tape, vals);
        if (!out.val().all_finite()) return false;
        if (proj.numel() == 0) {
            RandomStream rs(proj_seed, streams::kRegDir);
            proj = randn<S>(rs, {out.val().numel()});
        }
        GSN_CHECK(proj.numel() == out.val().numel(),
                  "op output size changed between gradcheck passes");
        *loss_out = (out.val().v * proj.v).sum();
        if (with_tape) {
            Value<S> loss = dot(out, tape.constant(proj.reshaped(out.val().dims)));
            tape.backward(loss);
        }
        return true;
    };

    S base_loss = 0;
    for (auto& p : params) p.zero_grad();
    if (!forward(true, &base_loss) || !std::isfinite((double)base_loss)) {
        fail_nonfinite("forward pass or projection");
        return report;
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].grad.all_finite()) {
            fail_nonfinite("analytic gradient of arg" + std::to_string(i));
            return report;
        }
    }

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<S> analytic = params[i].grad;
        for (Index k = 0; k < params[i].value.numel(); ++k) {
            S saved = params[i].value.v[k];
            S lp = 0, lm = 0;
            params[i].value.v[k] = saved + eps;
            bool okp = forward(false, &lp);
            params[i].value.v[k] = saved - eps;
            bool okm = forward(false, &lm);
            params[i].value.v[k] = saved;
            S numeric = (lp - lm) / ((S)2 * eps);
            std::ostringstream loc;
            loc << "arg" << i << "[" << k << "]";
            if (!okp || !okm || !std::isfinite((double)numeric)) {
                fail_nonfinite("difference quotient at " + loc.str());
                return report;
            }
            S a = analytic.v[k];
            S denom = std::max({std::abs(a), std::abs(numeric), (S)1e-6});
            S rel = std::abs(a - numeric) / denom;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                loc << " analytic=" << a << " numeric=" << numeric;
                report.where = loc.str();
            }
        }
    }
    return report;
}

}  // namespace gsn
