#pragma once

#include "gsn/tape.hpp"

#include <vector>

namespace gsn {

/// Border handling for spatial ops. "same" 3x3 convolutions in the networks
/// use reflect padding; the 4x4 low-pass kernel pads 1 left/top, 2 right/bottom.
struct Padding {
    enum class Mode { valid, zero, reflect, replicate };
    Mode mode = Mode::valid;
    Index top = 0, left = 0, bottom = 0, right = 0;

    static Padding valid() { return {}; }
    static Padding same(Mode m, Index kh, Index kw) {
        Padding p;
        p.mode = m;
        p.top = (kh - 1) / 2;
        p.bottom = kh - 1 - p.top;
        p.left = (kw - 1) / 2;
        p.right = kw - 1 - p.left;
        return p;
    }
    static Padding same_reflect(Index k) { return same(Mode::reflect, k, k); }
    bool none() const { return top == 0 && left == 0 && bottom == 0 && right == 0; }
};

namespace detail {

inline Index reflect_index(Index i, Index n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return i;
}

inline Index clamp_index(Index i, Index n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

template <typename S>
std::vector<S>& scratch_a() {
    thread_local std::vector<S> buf;
    return buf;
}
template <typename S>
std::vector<S>& scratch_b() {
    thread_local std::vector<S> buf;
    return buf;
}

template <typename S>
MatMap<S> scratch_matrix(std::vector<S>& buf, Index rows, Index cols) {
    if ((Index)buf.size() < rows * cols) buf.resize((std::size_t)(rows * cols));
    return MatMap<S>(buf.data(), rows, cols);
}

// Patch matrix for one sample: rows index (c, ki, kj), columns index output
// positions. Input must already be padded (valid convolution only).
template <typename S>
void im2col(const S* x, Index ch, Index h, Index w, Index kh, Index kw, Index stride, MatMap<S> col) {
    Index ho = (h - kh) / stride + 1;
    Index wo = (w - kw) / stride + 1;
    for (Index c = 0; c < ch; ++c) {
        const S* xc = x + c * h * w;
        for (Index ki = 0; ki < kh; ++ki) {
            for (Index kj = 0; kj < kw; ++kj) {
                S* row = col.data() + ((c * kh + ki) * kw + kj) * (ho * wo);
                for (Index oy = 0; oy < ho; ++oy) {
                    const S* src = xc + (oy * stride + ki) * w + kj;
                    if (stride == 1) {
                        for (Index ox = 0; ox < wo; ++ox) row[oy * wo + ox] = src[ox];
                    } else {
                        for (Index ox = 0; ox < wo; ++ox) row[oy * wo + ox] = src[ox * stride];
                    }
                }
            }
        }
    }
}

template <typename S>
void col2im_acc(ConstMatMap<S> col, Index ch, Index h, Index w, Index kh, Index kw, Index stride, S* gx) {
    Index ho = (h - kh) / stride + 1;
    Index wo = (w - kw) / stride + 1;
    for (Index c = 0; c < ch; ++c) {
        S* gc = gx + c * h * w;
        for (Index ki = 0; ki < kh; ++ki) {
            for (Index kj = 0; kj < kw; ++kj) {
                const S* row = col.data() + ((c * kh + ki) * kw + kj) * (ho * wo);
                for (Index oy = 0; oy < ho; ++oy) {
                    S* dst = gc + (oy * stride + ki) * w + kj;
                    for (Index ox = 0; ox < wo; ++ox) dst[ox * stride] += row[oy * wo + ox];
                }
            }
        }
    }
}

}  // namespace detail

/// Pad the spatial axes of an NCHW tensor. Reflect mirrors without repeating
/// the border row; replicate repeats it; zero fills with zeros.
template <typename S>
Value<S> pad2d(Value<S> x, Padding pad) {
    if (pad.none()) return x;
    const Tensor<S>& xt = x.val();
    GSN_CHECK(xt.rank() == 4, "pad2d expects NCHW input, got " << shape_str(xt.dims));
    Index n = xt.n(), c = xt.c(), h = xt.h(), w = xt.w();
    if (pad.mode == Padding::Mode::reflect)
        GSN_CHECK(pad.top < h && pad.bottom < h && pad.left < w && pad.right < w,
                  "reflect pad too large for " << h << "x" << w << " input");
    Index hp = h + pad.top + pad.bottom, wp = w + pad.left + pad.right;
    Tensor<S> out({n, c, hp, wp});
    for (Index nc = 0; nc < n * c; ++nc) {
        const S* src = xt.data() + nc * h * w;
        S* dst = out.data() + nc * hp * wp;
        for (Index iy = 0; iy < hp; ++iy) {
            Index sy = iy - pad.top;
            for (Index ix = 0; ix < wp; ++ix) {
                Index sx = ix - pad.left;
                Index ry = sy, rx = sx;
                if (pad.mode == Padding::Mode::reflect) {
                    ry = detail::reflect_index(sy, h);
                    rx = detail::reflect_index(sx, w);
                } else if (pad.mode == Padding::Mode::replicate) {
                    ry = detail::clamp_index(sy, h);
                    rx = detail::clamp_index(sx, w);
                } else if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
                    dst[iy * wp + ix] = (S)0;
                    continue;
                }
                dst[iy * wp + ix] = src[ry * w + rx];
            }
        }
    }
    int px = x.id;
    return x.tape->custom(std::move(out), {px}, [px, pad, n, c, h, w, hp, wp](Tape<S>& t, int id) {
        if (!t.requires_grad(px)) return;
        Tensor<S>& gx = t.grad(px);
        const Tensor<S>& gy = t.grad(id);
        for (Index nc = 0; nc < n * c; ++nc) {
            S* dst = gx.data() + nc * h * w;
            const S* src = gy.data() + nc * hp * wp;
            for (Index iy = 0; iy < hp; ++iy) {
                Index sy = iy - pad.top;
                for (Index ix = 0; ix < wp; ++ix) {
                    Index sx = ix - pad.left;
                    Index ry = sy, rx = sx;
                    if (pad.mode == Padding::Mode::reflect) {
                        ry = detail::reflect_index(sy, h);
                        rx = detail::reflect_index(sx, w);
                    } else if (pad.mode == Padding::Mode::replicate) {
                        ry = detail::clamp_index(sy, h);
                        rx = detail::clamp_index(sx, w);
                    } else if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
                        continue;
                    }
                    dst[ry * w + rx] += src[iy * wp + ix];
                }
            }
        }
    });
}

namespace detail {

template <typename S>
void conv_shape_check(const Tensor<S>& x, const Tensor<S>& w) {
    GSN_CHECK(x.rank() == 4, "conv2d input must be NCHW, got " << shape_str(x.dims));
    GSN_CHECK(w.rank() == 4, "conv2d weight must be OIKK, got " << shape_str(w.dims));
    GSN_CHECK(x.c() == w.dim(1), "conv2d channel mismatch: input " << shape_str(x.dims)
                                     << " expects in_ch " << w.dim(1) << " from weight "
                                     << shape_str(w.dims));
    GSN_CHECK(x.h() >= w.dim(2) && x.w() >= w.dim(3),
              "conv2d kernel " << shape_str(w.dims) << " larger than input " << shape_str(x.dims));
}

}  // namespace detail

// Valid convolution, weights shared across the batch. im2col + GEMM.
template <typename S>
Value<S> conv2d_valid(Value<S> x, Value<S> w, Index stride = 1) {
    const Tensor<S>& xt = x.val();
    const Tensor<S>& wt = w.val();
    detail::conv_shape_check(xt, wt);
    GSN_CHECK(stride >= 1, "conv2d stride must be >= 1");
    Index n = xt.n(), ci = xt.c(), h = xt.h(), wd = xt.w();
    Index co = wt.dim(0), kh = wt.dim(2), kw = wt.dim(3);
    Index ho = (h - kh) / stride + 1, wo = (wd - kw) / stride + 1;
    Index ckk = ci * kh * kw, p = ho * wo;

    Tensor<S> out({n, co, ho, wo});
    {
        auto col = detail::scratch_matrix(detail::scratch_a<S>(), ckk, p);
        auto wm = as_matrix(wt, co, ckk);
        for (Index i = 0; i < n; ++i) {
            detail::im2col(xt.data() + i * ci * h * wd, ci, h, wd, kh, kw, stride, col);
            MatMap<S>(out.data() + i * co * p, co, p).noalias() = wm * col;
        }
    }
    int px = x.id, pw = w.id;
    return x.tape->custom(std::move(out), {px, pw},
                          [px, pw, stride, n, ci, h, wd, co, kh, kw, ho, wo, ckk, p](Tape<S>& t, int id) {
        const Tensor<S>& xt = t.value(px);
        const Tensor<S>& wt = t.value(pw);
        const Tensor<S>& gy = t.grad(id);
        bool need_x = t.requires_grad(px), need_w = t.requires_grad(pw);
        auto col = detail::scratch_matrix(detail::scratch_a<S>(), ckk, p);
        auto gcol = detail::scratch_matrix(detail::scratch_b<S>(), ckk, p);
        for (Index i = 0; i < n; ++i) {
            ConstMatMap<S> gym(gy.data() + i * co * p, co, p);
            if (need_w) {
                detail::im2col(xt.data() + i * ci * h * wd, ci, h, wd, kh, kw, stride, col);
                as_matrix(t.grad(pw), co, ckk).noalias() += gym * ConstMatMap<S>(col.data(), ckk, p).transpose();
            }
            if (need_x) {
                gcol.noalias() = as_matrix(wt, co, ckk).transpose() * gym;
                detail::col2im_acc(ConstMatMap<S>(gcol.data(), ckk, p), ci, h, wd, kh, kw, stride,
                                   t.grad(px).data() + i * ci * h * wd);
            }
        }
    });
}

/// Convolution with a padding spec. Non-valid modes pad first, then run the
/// valid kernel, so every mode shares one differentiation path.
template <typename S>
Value<S> conv2d(Value<S> x, Value<S> w, Index stride = 1, Padding pad = Padding::valid()) {
    detail::conv_shape_check(x.val(), w.val());
    if (pad.mode != Padding::Mode::valid) x = pad2d(x, pad);
    return conv2d_valid(x, w, stride);
}

/// Nearest-neighbor 2x upsampling. Exactly inverted by 2x2 mean pooling.
template <typename S>
Value<S> upsample2x(Value<S> x) {
    const Tensor<S>& xt = x.val();
    GSN_CHECK(xt.rank() == 4, "upsample2x expects NCHW input, got " << shape_str(xt.dims));
    Index n = xt.n(), c = xt.c(), h = xt.h(), w = xt.w();
    Tensor<S> out({n, c, 2 * h, 2 * w});
    for (Index nc = 0; nc < n * c; ++nc) {
        const S* src = xt.data() + nc * h * w;
        S* dst = out.data() + nc * 4 * h * w;
        for (Index i = 0; i < h; ++i)
            for (Index j = 0; j < w; ++j) {
                S v = src[i * w + j];
                S* d = dst + 2 * i * 2 * w + 2 * j;
                d[0] = v;
                d[1] = v;
                d[2 * w] = v;
                d[2 * w + 1] = v;
            }
    }
    int px = x.id;
    return x.tape->custom(std::move(out), {px}, [px, n, c, h, w](Tape<S>& t, int id) {
        if (!t.requires_grad(px)) return;
        const Tensor<S>& gy = t.grad(id);
        Tensor<S>& gx = t.grad(px);
        for (Index nc = 0; nc < n * c; ++nc) {
            const S* src = gy.data() + nc * 4 * h * w;
            S* dst = gx.data() + nc * h * w;
            for (Index i = 0; i < h; ++i)
                for (Index j = 0; j < w; ++j) {
                    const S* s = src + 2 * i * 2 * w + 2 * j;
                    dst[i * w + j] += s[0] + s[1] + s[2 * w] + s[2 * w + 1];
                }
        }
    });
}

/// 2x2 mean pooling with stride 2; spatial extents must be even.
template <typename S>
Value<S> meanpool2x(Value<S> x) {
    const Tensor<S>& xt = x.val();
    GSN_CHECK(xt.rank() == 4, "meanpool2x expects NCHW input, got " << shape_str(xt.dims));
    GSN_CHECK(xt.h() % 2 == 0 && xt.w() % 2 == 0,
              "meanpool2x needs even spatial extents, got " << shape_str(xt.dims));
    Index n = xt.n(), c = xt.c(), h = xt.h() / 2, w = xt.w() / 2;
    Tensor<S> out({n, c, h, w});
    for (Index nc = 0; nc < n * c; ++nc) {
        const S* src = xt.data() + nc * 4 * h * w;
        S* dst = out.data() + nc * h * w;
        for (Index i = 0; i < h; ++i)
            for (Index j = 0; j < w; ++j) {
                const S* s = src + 2 * i * 2 * w + 2 * j;
                // pairwise sum keeps meanpool2x(upsample2x(x)) == x bit-exact
                dst[i * w + j] = ((s[0] + s[1]) + (s[2 * w] + s[2 * w + 1])) * (S)0.25;
            }
    }
    int px = x.id;
    return x.tape->custom(std::move(out), {px}, [px, n, c, h, w](Tape<S>& t, int id) {
        if (!t.requires_grad(px)) return;
        const Tensor<S>& gy = t.grad(id);
        Tensor<S>& gx = t.grad(px);
        for (Index nc = 0; nc < n * c; ++nc) {
            const S* src = gy.data() + nc * h * w;
            S* dst = gx.data() + nc * 4 * h * w;
            for (Index i = 0; i < h; ++i)
                for (Index j = 0; j < w; ++j) {
                    S g = src[i * w + j] * (S)0.25;
                    S* d = dst + 2 * i * 2 * w + 2 * j;
                    d[0] += g;
                    d[1] += g;
                    d[2 * w] += g;
                    d[2 * w + 1] += g;
                }
        }
    });
}

/// Spatial mean per channel: [N, C, H, W] -> [N, C].
template <typename S>
Value<S> global_avg_pool(Value<S> x) {
    const Tensor<S>& xt = x.val();
    GSN_CHECK(xt.rank() == 4, "global_avg_pool expects NCHW input");
    Index n = xt.n(), c = xt.c(), hw = xt.h() * xt.w();
    Tensor<S> out({n, c});
    for (Index nc = 0; nc < n * c; ++nc)
        out.v[nc] = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(xt.data() + nc * hw, hw).mean();
    int px = x.id;
    return x.tape->custom(std::move(out), {px}, [px, n, c, hw](Tape<S>& t, int id) {
        if (!t.requires_grad(px)) return;
        const Tensor<S>& gy = t.grad(id);
        Tensor<S>& gx = t.grad(px);
        S inv = (S)1 / (S)hw;
        for (Index nc = 0; nc < n * c; ++nc)
            Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(gx.data() + nc * hw, hw) += gy.v[nc] * inv;
    });
}

/// Per-channel bias over an NCHW tensor.
template <typename S>
Value<S> add_bias(Value<S> x, Value<S> b) {
    const Tensor<S>& xt = x.val();
    GSN_CHECK(xt.rank() == 4 && b.val().rank() == 1 && b.val().dim(0) == xt.c(),
              "add_bias: bias " << shape_str(b.val().dims) << " vs input " << shape_str(xt.dims));
    Index n = xt.n(), c = xt.c(), hw = xt.h() * xt.w();
    Tensor<S> out = xt;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < c; ++j)
            Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(out.data() + (i * c + j) * hw, hw) += b.val().v[j];
    int px = x.id, pb = b.id;
    return x.tape->custom(std::move(out), {px, pb}, [px, pb, n, c, hw](Tape<S>& t, int id) {
        const Tensor<S>& gy = t.grad(id);
        if (t.requires_grad(px)) t.grad(px).v += gy.v;
        if (t.requires_grad(pb)) {
            Tensor<S>& gb = t.grad(pb);
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < c; ++j)
                    gb.v[j] += Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(
                                   gy.data() + (i * c + j) * hw, hw).sum();
        }
    });
}

/// x + strength * noise, the noise broadcast across channels.
/// noise is [N, 1, H, W] (one field per sample); strength is a scalar value.
template <typename S>
Value<S> add_scaled_noise(Value<S> x, Value<S> strength, Value<S> noise) {
    const Tensor<S>& xt = x.val();
    const Tensor<S>& nt = noise.val();
    GSN_CHECK(strength.val().numel() == 1, "noise strength must be scalar");
    GSN_CHECK(nt.rank() == 4 && nt.c() == 1 && nt.n() == xt.n() && nt.h() == xt.h() && nt.w() == xt.w(),
              "noise field " << shape_str(nt.dims) << " does not match input " << shape_str(xt.dims));
    Index n = xt.n(), c = xt.c(), hw = xt.h() * xt.w();
    S s = strength.val().v[0];
    Tensor<S> out = xt;
    for (Index i = 0; i < n; ++i) {
        Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> nf(nt.data() + i * hw, hw);
        for (Index j = 0; j < c; ++j)
            Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(out.data() + (i * c + j) * hw, hw) += s * nf;
    }
    int px = x.id, ps = strength.id, pn = noise.id;
    return x.tape->custom(std::move(out), {px, ps, pn}, [px, ps, pn, n, c, hw](Tape<S>& t, int id) {
        const Tensor<S>& gy = t.grad(id);
        if (t.requires_grad(px)) t.grad(px).v += gy.v;
        if (t.requires_grad(ps)) {
            const Tensor<S>& nt = t.value(pn);
            S acc = 0;
            for (Index i = 0; i < n; ++i) {
                Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> nf(nt.data() + i * hw, hw);
                for (Index j = 0; j < c; ++j)
                    acc += (Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(
                                gy.data() + (i * c + j) * hw, hw) * nf).sum();
            }
            t.grad(ps).v[0] += acc;
        }
        if (t.requires_grad(pn)) {
            S s = t.value(ps).v[0];
            Tensor<S>& gn = t.grad(pn);
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < c; ++j)
                    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(gn.data() + i * hw, hw) +=
                        s * Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(
                                gy.data() + (i * c + j) * hw, hw);
        }
    });
}

/// Data merge: f'_i = f_i + p * payload_j with channel routing i = j + kB
/// (0-based: j = i mod B). A single-channel payload reduces to pixel-wise
/// addition, which is the cover-mode path.
template <typename S>
Value<S> merge_data(Value<S> f, Value<S> payload, Value<S> p) {
    const Tensor<S>& ft = f.val();
    const Tensor<S>& dt = payload.val();
    GSN_CHECK(ft.rank() == 4 && dt.rank() == 4, "merge_data expects NCHW operands");
    GSN_CHECK(p.val().numel() == 1, "merge strength must be scalar");
    GSN_CHECK(dt.n() == ft.n() && dt.h() == ft.h() && dt.w() == ft.w(),
              "merge_data spatial mismatch: features " << shape_str(ft.dims) << " vs payload "
                                                       << shape_str(dt.dims));
    Index n = ft.n(), c = ft.c(), b = dt.c(), hw = ft.h() * ft.w();
    S pv = p.val().v[0];
    Tensor<S> out = ft;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < c; ++j) {
            Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> dj(dt.data() + (i * b + j % b) * hw, hw);
            Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(out.data() + (i * c + j) * hw, hw) += pv * dj;
        }
    int pf = f.id, pd = payload.id, pp = p.id;
    return f.tape->custom(std::move(out), {pf, pd, pp}, [pf, pd, pp, n, c, b, hw](Tape<S>& t, int id) {
        const Tensor<S>& gy = t.grad(id);
        const Tensor<S>& dt = t.value(pd);
        if (t.requires_grad(pf)) t.grad(pf).v += gy.v;
        if (t.requires_grad(pp)) {
            S acc = 0;
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < c; ++j)
                    acc += (Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(
                                gy.data() + (i * c + j) * hw, hw) *
                            Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(
                                dt.data() + (i * b + j % b) * hw, hw)).sum();
            t.grad(pp).v[0] += acc;
        }
        if (t.requires_grad(pd)) {
            S pv = t.value(pp).v[0];
            Tensor<S>& gd = t.grad(pd);
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < c; ++j)
                    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(gd.data() + (i * b + j % b) * hw, hw) +=
                        pv * Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(
                                 gy.data() + (i * c + j) * hw, hw);
        }
    });
}

namespace detail {

// Smoothing kernel (1/64) [1,3,3,1]^T x [1,3,3,1].
template <typename S>
const Tensor<S>& lowpass_kernel() {
    static const Tensor<S> k = [] {
        Tensor<S> t({4, 4});
        const S base[4] = {1, 3, 3, 1};
        for (Index i = 0; i < 4; ++i)
            for (Index j = 0; j < 4; ++j) t.at(i, j) = base[i] * base[j] / (S)64;
        return t;
    }();
    return k;
}

}  // namespace detail

/// Depthwise valid convolution of every channel with one fixed kernel.
template <typename S>
Value<S> depthwise_fixed_conv(Value<S> x, const Tensor<S>& kernel) {
    const Tensor<S>& xt = x.val();
    GSN_CHECK(xt.rank() == 4 && kernel.rank() == 2, "depthwise_fixed_conv expects NCHW x and 2-D kernel");
    Index kh = kernel.dim(0), kw = kernel.dim(1);
    GSN_CHECK(xt.h() >= kh && xt.w() >= kw, "kernel larger than input " << shape_str(xt.dims));
    Index n = xt.n(), c = xt.c(), h = xt.h(), w = xt.w();
    Index ho = h - kh + 1, wo = w - kw + 1;
    Tensor<S> out({n, c, ho, wo});
    for (Index nc = 0; nc < n * c; ++nc) {
        const S* src = xt.data() + nc * h * w;
        S* dst = out.data() + nc * ho * wo;
        for (Index oy = 0; oy < ho; ++oy)
            for (Index ox = 0; ox < wo; ++ox) {
                S acc = 0;
                for (Index a = 0; a < kh; ++a)
                    for (Index bS = 0; bS < kw; ++bS) acc += src[(oy + a) * w + ox + bS] * kernel.at(a, bS);
                dst[oy * wo + ox] = acc;
            }
    }
    int px = x.id;
    Tensor<S> k = kernel;
    return x.tape->custom(std::move(out), {px}, [px, k, n, c, h, w, kh, kw, ho, wo](Tape<S>& t, int id) {
        if (!t.requires_grad(px)) return;
        const Tensor<S>& gy = t.grad(id);
        Tensor<S>& gx = t.grad(px);
        for (Index nc = 0; nc < n * c; ++nc) {
            const S* src = gy.data() + nc * ho * wo;
            S* dst = gx.data() + nc * h * w;
            for (Index oy = 0; oy < ho; ++oy)
                for (Index ox = 0; ox < wo; ++ox) {
                    S g = src[oy * wo + ox];
                    for (Index a = 0; a < kh; ++a)
                        for (Index bS = 0; bS < kw; ++bS) dst[(oy + a) * w + ox + bS] += g * k.at(a, bS);
                }
        }
    });
}

/// Low-pass smoothing of every channel; spatial size preserved
/// (reflect pad 1 left/top, 2 right/bottom for the 4x4 kernel).
template <typename S>
Value<S> low_pass(Value<S> x) {
    Padding pad;
    pad.mode = Padding::Mode::reflect;
    pad.top = 1;
    pad.left = 1;
    pad.bottom = 2;
    pad.right = 2;
    return depthwise_fixed_conv(pad2d(x, pad), detail::lowpass_kernel<S>());
}

/// Style-modulated convolution with optional weight demodulation.
/// Per sample: w1[o,i,k] = s[n,i] * w[o,i,k]; demodulation rescales each
/// output filter to unit norm, w2[o,.] = w1[o,.] / sqrt(sum w1^2 + eps).
/// Valid convolution; pad beforehand for "same" output.
template <typename S>
Value<S> modulated_conv(Value<S> x, Value<S> w, Value<S> styles, bool demodulate, S eps = (S)1e-8) {
    const Tensor<S>& xt = x.val();
    const Tensor<S>& wt = w.val();
    const Tensor<S>& st = styles.val();
    detail::conv_shape_check(xt, wt);
    GSN_CHECK(st.rank() == 2 && st.dim(0) == xt.n() && st.dim(1) == xt.c(),
              "styles " << shape_str(st.dims) << " must be [batch, in_ch] for input " << shape_str(xt.dims));
    Index n = xt.n(), ci = xt.c(), h = xt.h(), wd = xt.w();
    Index co = wt.dim(0), kh = wt.dim(2), kw = wt.dim(3);
    Index ho = h - kh + 1, wo = wd - kw + 1;
    Index ckk = ci * kh * kw, kk = kh * kw, p = ho * wo;

    auto modulate = [=](const Tensor<S>& wt_, const Tensor<S>& st_, Index i, Tensor<S>& w1, Tensor<S>& w2,
                        Eigen::Array<S, Eigen::Dynamic, 1>& inv) {
        w1 = wt_;
        auto w1m = as_matrix(w1, co, ckk);
        for (Index ic = 0; ic < ci; ++ic)
            w1m.middleCols(ic * kk, kk) *= st_.at(i, ic);
        if (demodulate) {
            inv = ((w1m.array().square().rowwise().sum()) + eps).rsqrt();
            w2 = w1;
            auto w2m = as_matrix(w2, co, ckk);
            for (Index o = 0; o < co; ++o) w2m.row(o) *= inv[o];
        } else {
            w2 = w1;
        }
    };

    Tensor<S> out({n, co, ho, wo});
    {
        auto col = detail::scratch_matrix(detail::scratch_a<S>(), ckk, p);
        Tensor<S> w1, w2;
        Eigen::Array<S, Eigen::Dynamic, 1> inv;
        for (Index i = 0; i < n; ++i) {
            modulate(wt, st, i, w1, w2, inv);
            detail::im2col(xt.data() + i * ci * h * wd, ci, h, wd, kh, kw, (Index)1, col);
            MatMap<S>(out.data() + i * co * p, co, p).noalias() = as_matrix(w2, co, ckk) * col;
        }
    }
    int px = x.id, pw = w.id, ps = styles.id;
    return x.tape->custom(std::move(out), {px, pw, ps},
                          [px, pw, ps, demodulate, eps, n, ci, h, wd, co, kh, kw, ho, wo, ckk, kk, p,
                           modulate](Tape<S>& t, int id) {
        const Tensor<S>& xt = t.value(px);
        const Tensor<S>& wt = t.value(pw);
        const Tensor<S>& st = t.value(ps);
        const Tensor<S>& gy = t.grad(id);
        bool need_x = t.requires_grad(px);
        bool need_w = t.requires_grad(pw);
        bool need_s = t.requires_grad(ps);
        auto col = detail::scratch_matrix(detail::scratch_a<S>(), ckk, p);
        auto gcol = detail::scratch_matrix(detail::scratch_b<S>(), ckk, p);
        Tensor<S> w1, w2, gw2({co, ckk}), gw1;
        Eigen::Array<S, Eigen::Dynamic, 1> inv;
        for (Index i = 0; i < n; ++i) {
            modulate(wt, st, i, w1, w2, inv);
            ConstMatMap<S> gym(gy.data() + i * co * p, co, p);
            if (need_x) {
                gcol.noalias() = as_matrix(w2, co, ckk).transpose() * gym;
                detail::col2im_acc(ConstMatMap<S>(gcol.data(), ckk, p), ci, h, wd, kh, kw, (Index)1,
                                   t.grad(px).data() + i * ci * h * wd);
            }
            if (!need_w && !need_s) continue;
            detail::im2col(xt.data() + i * ci * h * wd, ci, h, wd, kh, kw, (Index)1, col);
            as_matrix(gw2, co, ckk).noalias() = gym * ConstMatMap<S>(col.data(), ckk, p).transpose();
            if (demodulate) {
                gw1 = gw2;
                auto gw1m = as_matrix(gw1, co, ckk);
                auto w1m = as_matrix(w1, co, ckk);
                for (Index o = 0; o < co; ++o) {
                    S proj = (gw1m.row(o).array() * w1m.row(o).array()).sum();
                    gw1m.row(o) = inv[o] * gw1m.row(o) - (inv[o] * inv[o] * inv[o] * proj) * w1m.row(o);
                }
            } else {
                gw1 = gw2;
            }
            auto gw1m = as_matrix(gw1, co, ckk);
            if (need_w) {
                auto gwm = as_matrix(t.grad(pw), co, ckk);
                for (Index ic = 0; ic < ci; ++ic)
                    gwm.middleCols(ic * kk, kk) += st.at(i, ic) * gw1m.middleCols(ic * kk, kk);
            }
            if (need_s) {
                auto wm = as_matrix(wt, co, ckk);
                for (Index ic = 0; ic < ci; ++ic)
                    t.grad(ps).at(i, ic) +=
                        (gw1m.middleCols(ic * kk, kk).array() * wm.middleCols(ic * kk, kk).array()).sum();
            }
        }
    });
}

}  // namespace gsn
