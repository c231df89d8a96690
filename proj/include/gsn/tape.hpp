#pragma once

#include "gsn/tensor.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gsn {

/// A learned weight: value plus accumulated gradient. hgd_h/hgd_w key the
/// parameter to the feature-map size its layer produces; 0 means unkeyed.
template <typename S>
struct Param {
    std::string name;
    Tensor<S> value;
    Tensor<S> grad;
    bool trainable = true;
    Index hgd_h = 0, hgd_w = 0;

    Param() = default;
    Param(std::string n, Tensor<S> v) : name(std::move(n)), value(std::move(v)), grad(value.dims) {}

    void zero_grad() { grad.set_zero(); }
};

template <typename S>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
template <typename S>
struct Value {
    Tape<S>* tape = nullptr;
    int id = -1;

    const Tensor<S>& val() const { return tape->value(id); }
    const Shape& shape() const { return val().dims; }
    bool defined() const { return tape != nullptr; }
};

/// Reverse-mode tape. Forward values are computed eagerly; each node carries
/// a closure that routes its output gradient to its parents. One tape per
/// optimization phase; params bind once per tape and accumulate into
/// Param::grad on backward().
template <typename S>
class Tape {
public:
    struct Node {
        Tensor<S> value;
        Tensor<S> grad;  // allocated on first accumulation
        bool requires_grad = false;
        std::function<void(Tape&)> backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Value<S> constant(Tensor<S> v) {
        nodes_.push_back(Node{std::move(v), {}, false, nullptr});
        return {this, (int)nodes_.size() - 1};
    }

    /// Constant data that still collects a gradient (for input-gradient probes).
    Value<S> input(Tensor<S> v) {
        nodes_.push_back(Node{std::move(v), {}, true, nullptr});
        return {this, (int)nodes_.size() - 1};
    }

    Value<S> leaf(Param<S>& p) {
        auto it = bound_.find(&p);
        if (it != bound_.end()) return {this, it->second};
        nodes_.push_back(Node{p.value, {}, p.trainable, nullptr});
        int id = (int)nodes_.size() - 1;
        if (p.trainable) {
            Param<S>* pp = &p;
            nodes_.back().backward = [id, pp](Tape& t) { pp->grad.v += t.grad(id).v; };
        }
        bound_.emplace(&p, id);
        return {this, id};
    }

    // Escape hatch for ops with hand-written backward rules.
    Value<S> custom(Tensor<S> value, std::vector<int> parents, std::function<void(Tape&, int)> backward) {
        bool rg = false;
        for (int p : parents) rg = rg || nodes_[(std::size_t)p].requires_grad;
        nodes_.push_back(Node{std::move(value), {}, rg, nullptr});
        int id = (int)nodes_.size() - 1;
        if (rg && backward) {
            auto bw = std::move(backward);
            nodes_.back().backward = [id, bw](Tape& t) { bw(t, id); };
        }
        return {this, id};
    }

    const Tensor<S>& value(int id) const { return nodes_[(std::size_t)id].value; }
    bool requires_grad(int id) const { return nodes_[(std::size_t)id].requires_grad; }

    Tensor<S>& grad(int id) {
        Node& n = nodes_[(std::size_t)id];
        if (n.grad.numel() == 0) n.grad = Tensor<S>(n.value.dims);
        return n.grad;
    }

    bool has_grad(int id) const { return nodes_[(std::size_t)id].grad.numel() != 0; }

    /// Run reverse accumulation from a scalar output.
    void backward(Value<S> out) {
        GSN_CHECK(out.tape == this, "backward on a value from another tape");
        GSN_CHECK(value(out.id).numel() == 1, "backward seed must be scalar, got "
                                                  << shape_str(value(out.id).dims));
        grad(out.id).v.setConstant((S)1);
        for (int id = out.id; id >= 0; --id) {
            Node& n = nodes_[(std::size_t)id];
            if (n.requires_grad && n.grad.numel() != 0 && n.backward) n.backward(*this);
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
    std::unordered_map<const void*, int> bound_;
};

namespace ops {

template <typename S>
Value<S> binary_same_shape(Value<S> a, Value<S> b, const char* opname,
                           std::function<Tensor<S>(const Tensor<S>&, const Tensor<S>&)> fwd,
                           std::function<void(Tape<S>&, int, int, int)> bwd) {
    GSN_CHECK(a.tape == b.tape, opname << ": operands from different tapes");
    GSN_CHECK(a.val().same_shape(b.val()),
              opname << ": shape mismatch " << shape_str(a.shape()) << " vs " << shape_str(b.shape()));
    Tape<S>& t = *a.tape;
    int pa = a.id, pb = b.id;
    return t.custom(fwd(a.val(), b.val()), {pa, pb},
                    [pa, pb, bwd](Tape<S>& tt, int id) { bwd(tt, id, pa, pb); });
}

}  // namespace ops

template <typename S>
Value<S> add(Value<S> a, Value<S> b) {
    return ops::binary_same_shape<S>(
        a, b, "add",
        [](const Tensor<S>& x, const Tensor<S>& y) {
            Tensor<S> r = x;
            r.v += y.v;
            return r;
        },
        [](Tape<S>& t, int id, int pa, int pb) {
            const auto& g = t.grad(id);
            if (t.requires_grad(pa)) t.grad(pa).v += g.v;
            if (t.requires_grad(pb)) t.grad(pb).v += g.v;
        });
}

template <typename S>
Value<S> sub(Value<S> a, Value<S> b) {
    return ops::binary_same_shape<S>(
        a, b, "sub",
        [](const Tensor<S>& x, const Tensor<S>& y) {
            Tensor<S> r = x;
            r.v -= y.v;
            return r;
        },
        [](Tape<S>& t, int id, int pa, int pb) {
            const auto& g = t.grad(id);
            if (t.requires_grad(pa)) t.grad(pa).v += g.v;
            if (t.requires_grad(pb)) t.grad(pb).v -= g.v;
        });
}

template <typename S>
Value<S> mul(Value<S> a, Value<S> b) {
    return ops::binary_same_shape<S>(
        a, b, "mul",
        [](const Tensor<S>& x, const Tensor<S>& y) {
            Tensor<S> r = x;
            r.v *= y.v;
            return r;
        },
        [](Tape<S>& t, int id, int pa, int pb) {
            const auto& g = t.grad(id);
            if (t.requires_grad(pa)) t.grad(pa).v += g.v * t.value(pb).v;
            if (t.requires_grad(pb)) t.grad(pb).v += g.v * t.value(pa).v;
        });
}

template <typename S>
Value<S> scale(Value<S> a, S c) {
    Tensor<S> r = a.val();
    r.v *= c;
    int pa = a.id;
    return a.tape->custom(std::move(r), {pa}, [pa, c](Tape<S>& t, int id) {
        if (t.requires_grad(pa)) t.grad(pa).v += c * t.grad(id).v;
    });
}

template <typename S>
Value<S> add_scalar(Value<S> a, S c) {
    Tensor<S> r = a.val();
    r.v += c;
    int pa = a.id;
    return a.tape->custom(std::move(r), {pa}, [pa](Tape<S>& t, int id) {
        if (t.requires_grad(pa)) t.grad(pa).v += t.grad(id).v;
    });
}

template <typename S>
Value<S> operator+(Value<S> a, Value<S> b) { return add(a, b); }
template <typename S>
Value<S> operator-(Value<S> a, Value<S> b) { return sub(a, b); }
template <typename S>
Value<S> operator*(Value<S> a, Value<S> b) { return mul(a, b); }

template <typename S>
Value<S> leaky_relu(Value<S> a, S slope = (S)0.2) {
    GSN_CHECK(slope > (S)0 && slope < (S)1, "leaky_relu slope must lie in (0,1), got " << slope);
    Tensor<S> r = a.val();
    r.v = r.v.max(slope * r.v);
    int pa = a.id;
    return a.tape->custom(std::move(r), {pa}, [pa, slope](Tape<S>& t, int id) {
        if (!t.requires_grad(pa)) return;
        const auto& x = t.value(pa).v;
        t.grad(pa).v += t.grad(id).v * (x >= (S)0).select(
            Eigen::Array<S, Eigen::Dynamic, 1>::Constant(x.size(), (S)1),
            Eigen::Array<S, Eigen::Dynamic, 1>::Constant(x.size(), slope));
    });
}

template <typename S>
Value<S> sigmoid(Value<S> a) {
    Tensor<S> r = a.val();
    r.v = (S)0.5 * ((S)0.5 * r.v).tanh() + (S)0.5;  // stable for large |x|
    int pa = a.id;
    return a.tape->custom(std::move(r), {pa}, [pa](Tape<S>& t, int id) {
        if (!t.requires_grad(pa)) return;
        const auto& y = t.value(id).v;
        t.grad(pa).v += t.grad(id).v * y * ((S)1 - y);
    });
}

template <typename S>
Value<S> softplus(Value<S> a) {
    Tensor<S> r = a.val();
    r.v = r.v.max((S)0) + ((-r.v.abs()).exp() + (S)1).log();
    int pa = a.id;
    return a.tape->custom(std::move(r), {pa}, [pa](Tape<S>& t, int id) {
        if (!t.requires_grad(pa)) return;
        const auto& x = t.value(pa).v;
        t.grad(pa).v += t.grad(id).v * ((S)0.5 * ((S)0.5 * x).tanh() + (S)0.5);
    });
}

template <typename S>
Value<S> square(Value<S> a) {
    Tensor<S> r = a.val();
    r.v = r.v.square();
    int pa = a.id;
    return a.tape->custom(std::move(r), {pa}, [pa](Tape<S>& t, int id) {
        if (t.requires_grad(pa)) t.grad(pa).v += (S)2 * t.grad(id).v * t.value(pa).v;
    });
}

/// Elementwise square root; gradient defined as 0 at x = 0.
template <typename S>
Value<S> sqrt_guarded(Value<S> a) {
    Tensor<S> r = a.val();
    r.v = r.v.max((S)0).sqrt();
    int pa = a.id;
    return a.tape->custom(std::move(r), {pa}, [pa](Tape<S>& t, int id) {
        if (!t.requires_grad(pa)) return;
        const auto& y = t.value(id).v;
        t.grad(pa).v += (y > (S)0).select(t.grad(id).v / ((S)2 * y.max((S)1e-30)),
            Eigen::Array<S, Eigen::Dynamic, 1>::Zero(y.size()));
    });
}

template <typename S>
Value<S> sum_all(Value<S> a) {
    Tensor<S> r = Tensor<S>::scalar(a.val().v.sum());
    int pa = a.id;
    return a.tape->custom(std::move(r), {pa}, [pa](Tape<S>& t, int id) {
        if (t.requires_grad(pa)) t.grad(pa).v += t.grad(id).v[0];
    });
}

template <typename S>
Value<S> mean_all(Value<S> a) {
    S inv = (S)1 / (S)a.val().numel();
    return scale(sum_all(a), inv);
}

/// Sum over all axes but the first: [N, ...] -> [N].
template <typename S>
Value<S> rowwise_sum(Value<S> a) {
    Index n = a.val().dim(0);
    Index r = a.val().numel() / n;
    Tensor<S> out({n});
    auto m = as_matrix(a.val(), n, r);
    for (Index i = 0; i < n; ++i) out.v[i] = m.row(i).sum();
    int pa = a.id;
    return a.tape->custom(std::move(out), {pa}, [pa, n, r](Tape<S>& t, int id) {
        if (!t.requires_grad(pa)) return;
        auto gm = as_matrix(t.grad(pa), n, r);
        const auto& g = t.grad(id).v;
        for (Index i = 0; i < n; ++i) gm.row(i).array() += g[i];
    });
}

/// Row-stable softmax over the last axis of a [N, K] tensor.
template <typename S>
Value<S> softmax_rows(Value<S> a) {
    GSN_CHECK(a.val().rank() == 2, "softmax_rows expects rank-2 input, got " << shape_str(a.shape()));
    Index n = a.val().dim(0), k = a.val().dim(1);
    Tensor<S> out(a.val().dims);
    auto xm = as_matrix(a.val(), n, k);
    auto ym = as_matrix(out, n, k);
    for (Index i = 0; i < n; ++i) {
        auto row = xm.row(i).array();
        Eigen::Array<S, 1, Eigen::Dynamic> e = (row - row.maxCoeff()).exp();
        ym.row(i).array() = e / e.sum();
    }
    int pa = a.id;
    return a.tape->custom(std::move(out), {pa}, [pa, n, k](Tape<S>& t, int id) {
        if (!t.requires_grad(pa)) return;
        auto ym = as_matrix(t.value(id), n, k);
        auto gy = as_matrix(t.grad(id), n, k);
        auto gx = as_matrix(t.grad(pa), n, k);
        for (Index i = 0; i < n; ++i) {
            S dot = (gy.row(i).array() * ym.row(i).array()).sum();
            gx.row(i).array() += ym.row(i).array() * (gy.row(i).array() - dot);
        }
    });
}

template <typename S>
Value<S> reshape(Value<S> a, Shape shape) {
    Tensor<S> r = a.val().reshaped(std::move(shape));
    int pa = a.id;
    Shape orig = a.val().dims;
    return a.tape->custom(std::move(r), {pa}, [pa, orig](Tape<S>& t, int id) {
        if (t.requires_grad(pa)) t.grad(pa).v += t.grad(id).v;
    });
}

/// Identity forward; multiplies the backward gradient by `factor`.
/// Used for gradient-hook experiments and the gradcheck fault injector.
template <typename S>
Value<S> scale_backward(Value<S> a, S factor) {
    Tensor<S> r = a.val();
    int pa = a.id;
    return a.tape->custom(std::move(r), {pa}, [pa, factor](Tape<S>& t, int id) {
        if (t.requires_grad(pa)) t.grad(pa).v += factor * t.grad(id).v;
    });
}

template <typename S>
Value<S> dot(Value<S> a, Value<S> b) {
    return sum_all(mul(a, b));
}

/// y = 1 / sqrt(x + eps), elementwise.
template <typename S>
Value<S> rsqrt_eps(Value<S> a, S eps) {
    Tensor<S> r = a.val();
    r.v = (r.v + eps).rsqrt();
    int pa = a.id;
    return a.tape->custom(std::move(r), {pa}, [pa](Tape<S>& t, int id) {
        if (!t.requires_grad(pa)) return;
        const auto& y = t.value(id).v;
        t.grad(pa).v += t.grad(id).v * (S)-0.5 * y * y * y;
    });
}

/// Scale every row of a [N, ...] tensor by the matching entry of s [N].
template <typename S>
Value<S> mul_rows(Value<S> x, Value<S> s) {
    Index n = x.val().dim(0);
    GSN_CHECK(s.val().rank() == 1 && s.val().dim(0) == n,
              "mul_rows: scales " << shape_str(s.shape()) << " vs rows of " << shape_str(x.shape()));
    Index r = x.val().numel() / n;
    Tensor<S> out = x.val();
    auto m = as_matrix(out, n, r);
    for (Index i = 0; i < n; ++i) m.row(i) *= s.val().v[i];
    int px = x.id, ps = s.id;
    return x.tape->custom(std::move(out), {px, ps}, [px, ps, n, r](Tape<S>& t, int id) {
        auto gy = as_matrix(t.grad(id), n, r);
        if (t.requires_grad(px)) {
            auto gx = as_matrix(t.grad(px), n, r);
            const auto& sv = t.value(ps).v;
            for (Index i = 0; i < n; ++i) gx.row(i) += sv[i] * gy.row(i);
        }
        if (t.requires_grad(ps)) {
            auto xm = as_matrix(t.value(px), n, r);
            for (Index i = 0; i < n; ++i) t.grad(ps).v[i] += (gy.row(i).array() * xm.row(i).array()).sum();
        }
    });
}

/// Repeat a [C, H, W] tensor across a new leading batch axis.
template <typename S>
Value<S> broadcast_batch(Value<S> x, Index n) {
    const Tensor<S>& xt = x.val();
    GSN_CHECK(xt.rank() == 3, "broadcast_batch expects a rank-3 tensor, got " << shape_str(xt.dims));
    GSN_CHECK(n >= 1, "batch size must be positive");
    Index m = xt.numel();
    Tensor<S> out({n, xt.dim(0), xt.dim(1), xt.dim(2)});
    for (Index i = 0; i < n; ++i) std::copy(xt.data(), xt.data() + m, out.data() + i * m);
    int px = x.id;
    return x.tape->custom(std::move(out), {px}, [px, n, m](Tape<S>& t, int id) {
        if (!t.requires_grad(px)) return;
        const Tensor<S>& gy = t.grad(id);
        Tensor<S>& gx = t.grad(px);
        for (Index i = 0; i < n; ++i)
            gx.v += Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(gy.data() + i * m, m);
    });
}

/// x [N, A] @ w [A, B] for fully connected layers.
template <typename S>
Value<S> matmul(Value<S> x, Value<S> w) {
    GSN_CHECK(x.val().rank() == 2 && w.val().rank() == 2, "matmul expects rank-2 operands");
    Index n = x.val().dim(0), a = x.val().dim(1);
    Index a2 = w.val().dim(0), b = w.val().dim(1);
    GSN_CHECK(a == a2, "matmul inner dimensions disagree: " << shape_str(x.shape()) << " @ "
                                                            << shape_str(w.shape()));
    Tensor<S> out({n, b});
    as_matrix(out, n, b).noalias() = as_matrix(x.val(), n, a) * as_matrix(w.val(), a, b);
    int px = x.id, pw = w.id;
    return x.tape->custom(std::move(out), {px, pw}, [px, pw, n, a, b](Tape<S>& t, int id) {
        auto gy = as_matrix(t.grad(id), n, b);
        if (t.requires_grad(px))
            as_matrix(t.grad(px), n, a).noalias() += gy * as_matrix(t.value(pw), a, b).transpose();
        if (t.requires_grad(pw))
            as_matrix(t.grad(pw), a, b).noalias() += as_matrix(t.value(px), n, a).transpose() * gy;
    });
}

/// Broadcast a length-B row vector over every row of a [N, B] tensor.
template <typename S>
Value<S> add_rowvec(Value<S> x, Value<S> b) {
    GSN_CHECK(x.val().rank() == 2 && b.val().rank() == 1 && x.val().dim(1) == b.val().dim(0),
              "add_rowvec shape mismatch: " << shape_str(x.shape()) << " + " << shape_str(b.shape()));
    Index n = x.val().dim(0), k = x.val().dim(1);
    Tensor<S> out = x.val();
    auto m = as_matrix(out, n, k);
    for (Index i = 0; i < n; ++i) m.row(i).array() += b.val().v.transpose();
    int px = x.id, pb = b.id;
    return x.tape->custom(std::move(out), {px, pb}, [px, pb, n, k](Tape<S>& t, int id) {
        auto gy = as_matrix(t.grad(id), n, k);
        if (t.requires_grad(px)) as_matrix(t.grad(px), n, k) += gy;
        if (t.requires_grad(pb))
            t.grad(pb).v += gy.colwise().sum().transpose().array();
    });
}

/// Affine map x.w + b; the substrate's fully connected primitive.
template <typename S>
Value<S> fully_connected(Value<S> x, Value<S> w, Value<S> b) {
    return add_rowvec(matmul(x, w), b);
}

}  // namespace gsn
