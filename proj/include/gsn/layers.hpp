#pragma once

#include <string>
#include <vector>

#include "gsn/nn_ops.hpp"
#include "gsn/rng.hpp"
#include "gsn/tape.hpp"

namespace gsn {

// Parameter factories. He-style fan-in scaling keeps activations in range
// through leaky-relu stacks without per-layer tuning.

template <typename S>
Param<S> make_weight(std::string name, RandomStream& rs, const Shape& dims, double fan_in) {
    Param<S> p;
    p.name = std::move(name);
    p.value = randn<S>(rs, dims, std::sqrt(2.0 / fan_in));
    p.grad = Tensor<S>::zeros(dims);
    return p;
}

template <typename S>
Param<S> make_filled(std::string name, const Shape& dims, S fill) {
    Param<S> p;
    p.name = std::move(name);
    p.value = Tensor<S>::full(dims, fill);
    p.grad = Tensor<S>::zeros(dims);
    return p;
}

/// Annotate a group of params with the spatial size of the feature map they produce.
template <typename S>
void set_hgd_extent(std::vector<Param<S>*> ps, Index h, Index w) {
    for (Param<S>* p : ps) {
        p->hgd_h = h;
        p->hgd_w = w;
    }
}

/// Ordinary convolution layer: weight + channel bias, optional same-size reflect padding.
template <typename S>
struct PlainConv {
    Param<S> w;  // [out, in, k, k]
    Param<S> b;  // [out]
    Index kernel = 3;
    bool pad_same = true;

    PlainConv() = default;
    PlainConv(const std::string& name, RandomStream& rs, Index in_ch, Index out_ch, Index k, bool same = true)
        : kernel(k), pad_same(same) {
        w = make_weight<S>(name + ".w", rs, {out_ch, in_ch, k, k}, (double)(in_ch * k * k));
        b = make_filled<S>(name + ".b", {out_ch}, (S)0);
    }

    Value<S> operator()(Tape<S>& t, Value<S> x) {
        Value<S> xp = (pad_same && kernel > 1) ? pad2d(x, Padding::same(Padding::Mode::reflect, kernel, kernel))
                                               : x;
        return add_bias(conv2d_valid(xp, t.leaf(w)), t.leaf(b));
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
};

/// Fully connected layer with leaky-relu handled by the caller.
template <typename S>
struct Dense {
    Param<S> w;  // [in, out]
    Param<S> b;  // [out]

    Dense() = default;
    Dense(const std::string& name, RandomStream& rs, Index in_dim, Index out_dim, S bias_fill = (S)0) {
        w = make_weight<S>(name + ".w", rs, {in_dim, out_dim}, (double)in_dim);
        b = make_filled<S>(name + ".b", {out_dim}, bias_fill);
    }

    Value<S> operator()(Tape<S>& t, Value<S> x) { return fully_connected(x, t.leaf(w), t.leaf(b)); }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
};

/// Style-modulated convolution: a per-sample style vector, produced from the
/// shared latent by an affine with bias resting at 1, scales the input channels
/// of the weight before an optional demodulation renormalizes each filter.
template <typename S>
struct StyledConv {
    Param<S> w;      // [out, in, k, k]
    Param<S> aff_w;  // [latent, in]
    Param<S> aff_b;  // [in], init 1 so styles start neutral
    Param<S> b;      // [out]
    Index kernel = 3;
    bool demod = true;

    StyledConv() = default;
    StyledConv(const std::string& name, RandomStream& rs, Index latent, Index in_ch, Index out_ch, Index k,
               bool demodulate = true)
        : kernel(k), demod(demodulate) {
        w = make_weight<S>(name + ".w", rs, {out_ch, in_ch, k, k}, (double)(in_ch * k * k));
        aff_w = make_weight<S>(name + ".aff_w", rs, {latent, in_ch}, (double)latent * 2.0);
        aff_b = make_filled<S>(name + ".aff_b", {in_ch}, (S)1);
        b = make_filled<S>(name + ".b", {out_ch}, (S)0);
    }

    Value<S> operator()(Tape<S>& t, Value<S> x, Value<S> w_latent) {
        Value<S> styles = fully_connected(w_latent, t.leaf(aff_w), t.leaf(aff_b));
        Value<S> xp = kernel > 1 ? pad2d(x, Padding::same(Padding::Mode::reflect, kernel, kernel)) : x;
        return add_bias(modulated_conv(xp, t.leaf(w), styles, demod), t.leaf(b));
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&w);
        out.push_back(&aff_w);
        out.push_back(&aff_b);
        out.push_back(&b);
    }

    void set_hgd(Index h, Index wd) { set_hgd_extent<S>({&w, &aff_w, &aff_b, &b}, h, wd); }
};

}  // namespace gsn
