#pragma once

#include <cmath>
#include <vector>

#include "gsn/config.hpp"
#include "gsn/tape.hpp"

namespace gsn {

/// Adam over a fixed parameter group. Moment buffers are allocated on first
/// use and stay aligned with the group's enumeration order.
template <typename S>
struct Adam {
    double lr = 2e-3;
    double beta1 = 0.0;
    double beta2 = 0.99;
    double eps = 1e-8;
    Index t = 0;
    std::vector<Tensor<S>> m, v;

    static Adam from_config(const RunConfig& c) {
        Adam a;
        a.lr = c.lr;
        a.beta1 = c.adam_beta1;
        a.beta2 = c.adam_beta2;
        a.eps = c.adam_eps;
        return a;
    }

    void ensure(const std::vector<Param<S>*>& ps) {
        if (!m.empty()) {
            GSN_CHECK(m.size() == ps.size(), "optimizer state holds " << m.size() << " slots for "
                                                                      << ps.size() << " parameters");
            return;
        }
        m.reserve(ps.size());
        v.reserve(ps.size());
        for (Param<S>* p : ps) {
            m.push_back(Tensor<S>::zeros(p->value.dims));
            v.push_back(Tensor<S>::zeros(p->value.dims));
        }
    }

    void step(const std::vector<Param<S>*>& ps) {
        ensure(ps);
        ++t;
        S c1 = (S)(1.0 - std::pow(beta1, (double)t));
        S c2 = (S)(1.0 - std::pow(beta2, (double)t));
        for (std::size_t i = 0; i < ps.size(); ++i) {
            Param<S>& p = *ps[i];
            if (!p.trainable) continue;
            GSN_CHECK(p.grad.same_shape(p.value), "gradient shape mismatch for " << p.name);
            m[i].v = (S)beta1 * m[i].v + (S)(1.0 - beta1) * p.grad.v;
            v[i].v = (S)beta2 * v[i].v + (S)(1.0 - beta2) * p.grad.v.square();
            p.value.v -= (S)lr * (m[i].v / c1) / ((v[i].v / c2).sqrt() + (S)eps);
        }
    }
};

}  // namespace gsn
