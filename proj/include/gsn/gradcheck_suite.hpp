#pragma once

#include <string>
#include <vector>

#include "gsn/tensor.hpp"

namespace gsn {

struct GradcheckRow {
    std::string name;
    double max_rel_err = 0;
    bool finite = true;
    bool pass = false;
};

/// Finite-difference verification of every custom differentiable op and the
/// composite network forwards, in 64-bit at tiny shapes. `inject_fault` adds
/// a row with a deliberately wrong backward that must fail, proving the
/// harness can catch one.
std::vector<GradcheckRow> run_gradcheck_suite(double tol = 1e-4, bool inject_fault = false);

inline bool all_rows_pass(const std::vector<GradcheckRow>& rows) {
    for (const auto& r : rows)
        if (!r.pass) return false;
    return !rows.empty();
}

}  // namespace gsn
