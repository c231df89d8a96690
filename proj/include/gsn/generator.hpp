#pragma once

#include <string>
#include <vector>

#include "gsn/config.hpp"
#include "gsn/image_io.hpp"
#include "gsn/layers.hpp"

namespace gsn {

inline Index log2_exact(Index v) {
    Index e = 0;
    while ((Index(1) << e) < v) ++e;
    GSN_CHECK((Index(1) << e) == v, "expected a power of two, got " << v);
    return e;
}

/// Synthesis network. A learned 4x4 constant is grown by upsampling blocks to a
/// quarter of the output resolution; the data block then finishes the climb to
/// full resolution while mixing the payload tensor into its feature maps at
/// four points. Cover and stego images come from the same weights: the payload
/// is sampled noise for covers and secret bits for stegos.
template <typename S>
struct Generator {
    // Latent mapping: RMS-normalized z through a stack of dense + leaky-relu.
    static constexpr int kMapDepth = 8;

    struct GBlock {
        StyledConv<S> conv1, conv2;
        Param<S> noise_scale;  // scalar, applied to the block's shared noise field
        Index res = 0;
    };

    RunConfig cfg;
    std::vector<Dense<S>> mapping;
    Param<S> c0;  // [gen_channels, 4, 4]
    StyledConv<S> conv0;
    Param<S> noise0_scale;
    std::vector<GBlock> blocks;  // resolutions 8 .. resolution/4

    // Data block: three 1x1 and three 3x3 modulated convs, two upsamples, one
    // low-pass, four payload merges with learned strengths.
    StyledConv<S> d_pre1x1;   // at resolution/4
    StyledConv<S> d_pre3x3;   // at resolution/2
    StyledConv<S> d_mix3x3a;  // full resolution, after merge 1
    StyledConv<S> d_mix3x3b;  // after merge 2
    StyledConv<S> d_mix1x1;   // after merge 3
    StyledConv<S> d_rgb;      // after merge 4, linear output, no demodulation
    Param<S> p1, p2, p3, p4;

    Index channels_at(Index res) const {
        Index shift = log2_exact(res) - 2;
        Index c = cfg.gen_channels >> shift;
        return std::max(c, cfg.gen_channel_min);
    }

    explicit Generator(const RunConfig& c) : cfg(c) {
        cfg.validate();
        RandomStream rs(cfg.seed, streams::kInit);
        Index L = cfg.latent_dim;
        Index R = cfg.resolution;
        Index quarter = R / 4;

        mapping.reserve(kMapDepth);
        for (int i = 0; i < kMapDepth; ++i)
            mapping.emplace_back("G.map." + std::to_string(i), rs, L, L);

        Index gc = cfg.gen_channels;
        c0 = make_weight<S>("G.c0", rs, {gc, 4, 4}, 2.0);  // unit-variance start
        conv0 = StyledConv<S>("G.conv0", rs, L, gc, gc, 3);
        noise0_scale = make_filled<S>("G.conv0.noise", {1}, (S)0);

        for (Index r = 8; r <= quarter; r *= 2) {
            GBlock b;
            b.res = r;
            std::string name = "G.block" + std::to_string(r);
            b.conv1 = StyledConv<S>(name + ".conv1", rs, L, channels_at(r / 2), channels_at(r), 3);
            b.conv2 = StyledConv<S>(name + ".conv2", rs, L, channels_at(r), channels_at(r), 3);
            b.noise_scale = make_filled<S>(name + ".noise", {1}, (S)0);
            blocks.push_back(std::move(b));
        }

        Index cq = channels_at(quarter), ch = channels_at(R / 2), cf = channels_at(R);
        d_pre1x1 = StyledConv<S>("G.data.pre1x1", rs, L, cq, cq, 1);
        d_pre3x3 = StyledConv<S>("G.data.pre3x3", rs, L, cq, ch, 3);
        d_mix3x3a = StyledConv<S>("G.data.mix3x3a", rs, L, ch, cf, 3);
        d_mix3x3b = StyledConv<S>("G.data.mix3x3b", rs, L, cf, cf, 3);
        d_mix1x1 = StyledConv<S>("G.data.mix1x1", rs, L, cf, cf, 1);
        d_rgb = StyledConv<S>("G.data.rgb", rs, L, cf, 3, 1, /*demodulate=*/false);
        p1 = make_filled<S>("G.data.p1", {1}, (S)cfg.p_init);
        p2 = make_filled<S>("G.data.p2", {1}, (S)cfg.p_init);
        p3 = make_filled<S>("G.data.p3", {1}, (S)cfg.p_init);
        p4 = make_filled<S>("G.data.p4", {1}, (S)cfg.p_init);

        // Depth annotations drive the hierarchical gradient decay: each param
        // carries the spatial extent of the feature map its layer produces.
        for (auto& d : mapping) set_hgd_extent<S>({&d.w, &d.b}, 4, 4);
        set_hgd_extent<S>({&c0, &noise0_scale}, 4, 4);
        conv0.set_hgd(4, 4);
        for (auto& b : blocks) {
            b.conv1.set_hgd(b.res, b.res);
            b.conv2.set_hgd(b.res, b.res);
            set_hgd_extent<S>({&b.noise_scale}, b.res, b.res);
        }
        d_pre1x1.set_hgd(quarter, quarter);
        d_pre3x3.set_hgd(R / 2, R / 2);
        d_mix3x3a.set_hgd(R, R);
        d_mix3x3b.set_hgd(R, R);
        d_mix1x1.set_hgd(R, R);
        d_rgb.set_hgd(R, R);
        set_hgd_extent<S>({&p1, &p2, &p3, &p4}, R, R);
    }

    std::vector<Param<S>*> params() {
        std::vector<Param<S>*> out;
        for (auto& d : mapping) d.collect(out);
        out.push_back(&c0);
        conv0.collect(out);
        out.push_back(&noise0_scale);
        for (auto& b : blocks) {
            b.conv1.collect(out);
            b.conv2.collect(out);
            out.push_back(&b.noise_scale);
        }
        d_pre1x1.collect(out);
        d_pre3x3.collect(out);
        d_mix3x3a.collect(out);
        d_mix3x3b.collect(out);
        d_mix1x1.collect(out);
        d_rgb.collect(out);
        out.push_back(&p1);
        out.push_back(&p2);
        out.push_back(&p3);
        out.push_back(&p4);
        return out;
    }

    /// Resolutions of the shared noise fields, in consumption order.
    std::vector<Index> noise_extents() const {
        std::vector<Index> ext{4};
        for (const auto& b : blocks) ext.push_back(b.res);
        return ext;
    }

    /// One noise field per site, each [n, 1, r, r].
    std::vector<Tensor<S>> sample_noise_fields(RandomStream& rs, Index n) const {
        std::vector<Tensor<S>> fields;
        for (Index r : noise_extents()) fields.push_back(randn<S>(rs, {n, 1, r, r}));
        return fields;
    }

    /// z -> intermediate latent. Scale-invariant in z: z and 2z map identically.
    Value<S> map_latent(Tape<S>& t, Value<S> z) {
        const Tensor<S>& zt = z.val();
        GSN_CHECK(zt.rank() == 2 && zt.dim(1) == cfg.latent_dim,
                  "latents must be [n x " << cfg.latent_dim << "], got " << shape_str(zt.dims));
        Value<S> ms = scale(rowwise_sum(square(z)), (S)(1.0 / (double)cfg.latent_dim));
        Value<S> x = mul_rows(z, rsqrt_eps(ms, (S)1e-8));
        for (auto& d : mapping) x = leaky_relu(d(t, x));
        return x;
    }

    Value<S> run_block(Tape<S>& t, GBlock& b, Value<S> x, Value<S> w, Value<S> noise) {
        x = upsample2x(x);
        x = leaky_relu(b.conv1(t, x, w));
        x = b.conv2(t, x, w);
        x = add_scaled_noise(x, t.leaf(b.noise_scale), noise);
        return leaky_relu(x);
    }

    /// Image synthesis from an already-mapped latent. The payload is merged at
    /// four points once the features reach full resolution; channel i of a
    /// feature map receives payload channel i mod payload-depth.
    Value<S> synthesize(Tape<S>& t, Value<S> w, const Tensor<S>& payload,
                        const std::vector<Tensor<S>>& noise_fields) {
        Index n = w.val().dim(0);
        Index R = cfg.resolution;
        GSN_CHECK(payload.rank() == 4 && payload.dim(0) == n && payload.dim(2) == R && payload.dim(3) == R,
                  "payload must be [" << n << " x depth x " << R << " x " << R << "], got "
                                      << shape_str(payload.dims));
        GSN_CHECK(noise_fields.size() == noise_extents().size(),
                  "expected " << noise_extents().size() << " noise fields, got " << noise_fields.size());

        Value<S> x = broadcast_batch(t.leaf(c0), n);
        x = conv0(t, x, w);
        x = add_scaled_noise(x, t.leaf(noise0_scale), t.constant(noise_fields[0]));
        x = leaky_relu(x);
        for (std::size_t i = 0; i < blocks.size(); ++i)
            x = run_block(t, blocks[i], x, w, t.constant(noise_fields[i + 1]));

        // Data block. Fixed ordering: 1x1, up, 3x3, up, low-pass, then the
        // four merge + conv stages ending in the linear image head.
        x = leaky_relu(d_pre1x1(t, x, w));
        x = upsample2x(x);
        x = leaky_relu(d_pre3x3(t, x, w));
        x = upsample2x(x);
        if (cfg.use_filter) x = low_pass(x);
        Value<S> d = t.constant(payload);
        x = leaky_relu(d_mix3x3a(t, merge_data(x, d, t.leaf(p1)), w));
        x = leaky_relu(d_mix3x3b(t, merge_data(x, d, t.leaf(p2)), w));
        x = leaky_relu(d_mix1x1(t, merge_data(x, d, t.leaf(p3)), w));
        return d_rgb(t, merge_data(x, d, t.leaf(p4)), w);
    }

    struct Forward {
        Value<S> image;  // [n, 3, R, R]
        Value<S> w;      // [n, latent_dim]
    };

    Forward forward(Tape<S>& t, const Tensor<S>& z, const Tensor<S>& payload,
                    const std::vector<Tensor<S>>& noise_fields) {
        Value<S> w = map_latent(t, t.constant(z));
        return {synthesize(t, w, payload, noise_fields), w};
    }

    /// Inference entry point: runs a throwaway tape and materializes pixels.
    ImageBatch generate(const Tensor<S>& z, const Tensor<S>& payload,
                        const std::vector<Tensor<S>>& noise_fields, ImageSource tag) {
        Tape<S> t;
        Value<S> img = forward(t, z, payload, noise_fields).image;
        ImageBatch out;
        out.pixels = img.val().template cast<float>();
        out.tag = tag;
        return out;
    }
};

}  // namespace gsn
