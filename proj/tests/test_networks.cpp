#include "doctest.h"

#include <set>
#include <string>

#include "gsn/adversaries.hpp"
#include "gsn/extractor.hpp"
#include "gsn/generator.hpp"
#include "gsn/gradcheck.hpp"

using namespace gsn;

namespace {

RunConfig tiny_cfg(Index resolution) {
    RunConfig c;
    c.resolution = resolution;
    c.latent_dim = 8;
    c.payload_depth = 2;
    c.gen_channels = 8;
    c.gen_channel_min = 4;
    c.ext_width = 4;
    c.disc_channels = 2;
    c.disc_channel_max = 8;
    c.stega_channels = 2;
    c.stega_channel_max = 8;
    c.seed = 11;
    return c;
}

}  // namespace

TEST_SUITE("tape_ops_for_networks") {
    TEST_CASE("rsqrt_eps matches closed form and its gradient checks") {
        Tensor<double> x({3});
        x.v << 0.25, 1.0, 4.0;
        Tape<double> t;
        Tensor<double> y = rsqrt_eps(t.constant(x), 0.0).val();
        CHECK(y.v[0] == doctest::Approx(2.0));
        CHECK(y.v[1] == doctest::Approx(1.0));
        CHECK(y.v[2] == doctest::Approx(0.5));

        RandomStream rs(5, 1);
        auto rep = check_gradients<double>(
            [](Tape<double>&, std::vector<Value<double>> in) { return rsqrt_eps(in[0], 1e-3); },
            {randn<double>(rs, {2, 3}, 0.3, 1.5)});
        CHECK(rep.passes(1e-4));
    }

    TEST_CASE("mul_rows scales each row and differentiates both arguments") {
        Tensor<double> x({2, 3});
        x.v << 1, 2, 3, 4, 5, 6;
        Tensor<double> s({2});
        s.v << 2.0, -1.0;
        Tape<double> t;
        Tensor<double> y = mul_rows(t.constant(x), t.constant(s)).val();
        CHECK(y.at(0, 2) == doctest::Approx(6.0));
        CHECK(y.at(1, 0) == doctest::Approx(-4.0));

        RandomStream rs(6, 1);
        auto rep = check_gradients<double>(
            [](Tape<double>&, std::vector<Value<double>> in) { return mul_rows(in[0], in[1]); },
            {randn<double>(rs, {3, 4}), randn<double>(rs, {3})});
        CHECK(rep.passes(1e-4));
    }

    TEST_CASE("broadcast_batch repeats and sums gradients over the batch") {
        RandomStream rs(7, 1);
        Tensor<double> x = randn<double>(rs, {2, 3, 3});
        Tape<double> t;
        Tensor<double> y = broadcast_batch(t.constant(x), 4).val();
        CHECK(y.dims == Shape{4, 2, 3, 3});
        for (Index i = 0; i < 4; ++i) CHECK(y.at(i, 1, 2, 2) == x.at(1, 2, 2));

        auto rep = check_gradients<double>(
            [](Tape<double>&, std::vector<Value<double>> in) { return broadcast_batch(in[0], 3); },
            {randn<double>(rs, {2, 2, 2})});
        CHECK(rep.passes(1e-4));
    }
}

TEST_SUITE("generator") {
    TEST_CASE("map_latent is scale invariant in z and shape preserving") {
        RunConfig cfg = tiny_cfg(16);
        Generator<float> g(cfg);
        RandomStream rs(3, streams::kLatent);
        Tensor<float> z = randn<float>(rs, {5, cfg.latent_dim});
        Tensor<float> z2 = z;
        z2.v *= 2.0f;

        Tape<float> t;
        Tensor<float> w1 = g.map_latent(t, t.constant(z)).val();
        Tensor<float> w2 = g.map_latent(t, t.constant(z2)).val();
        CHECK(w1.dims == Shape{5, cfg.latent_dim});
        double max_diff = (w1.v - w2.v).abs().maxCoeff();
        CHECK(max_diff < 1e-4);
    }

    TEST_CASE("synthesis emits full-resolution images for both payload depths") {
        RunConfig cfg = tiny_cfg(32);
        Generator<float> g(cfg);
        CHECK(g.noise_extents() == std::vector<Index>{4, 8});

        RandomStream rs(4, streams::kLatent);
        Index n = 2;
        Tensor<float> z = randn<float>(rs, {n, cfg.latent_dim});
        auto noise = g.sample_noise_fields(rs, n);

        Tensor<float> d = rand_bits<float>(rs, {n, cfg.payload_depth, 32, 32});
        ImageBatch stego = g.generate(z, d, noise, ImageSource::stego);
        CHECK(stego.pixels.dims == Shape{n, 3, 32, 32});
        CHECK(stego.pixels.all_finite());

        Tensor<float> nz = randn<float>(rs, {n, 1, 32, 32});
        ImageBatch cover = g.generate(z, nz, noise, ImageSource::cover);
        CHECK(cover.pixels.dims == Shape{n, 3, 32, 32});
        CHECK(cover.pixels.all_finite());
    }

    TEST_CASE("zero cover noise and zero payload produce bit-identical images") {
        RunConfig cfg = tiny_cfg(32);
        Generator<float> g(cfg);
        RandomStream rs(9, streams::kLatent);
        Index n = 2;
        Tensor<float> z = randn<float>(rs, {n, cfg.latent_dim});
        auto noise = g.sample_noise_fields(rs, n);

        ImageBatch cover = g.generate(z, Tensor<float>::zeros({n, 1, 32, 32}), noise, ImageSource::cover);
        ImageBatch stego =
            g.generate(z, Tensor<float>::zeros({n, cfg.payload_depth, 32, 32}), noise, ImageSource::stego);
        CHECK((cover.pixels.v == stego.pixels.v).all());
    }

    TEST_CASE("images respond to the payload and to the latent") {
        RunConfig cfg = tiny_cfg(32);
        Generator<float> g(cfg);
        RandomStream rs(10, streams::kLatent);
        Tensor<float> z = randn<float>(rs, {1, cfg.latent_dim});
        auto noise = g.sample_noise_fields(rs, 1);

        Tensor<float> d0 = Tensor<float>::zeros({1, cfg.payload_depth, 32, 32});
        Tensor<float> d1 = rand_bits<float>(rs, {1, cfg.payload_depth, 32, 32});
        ImageBatch a = g.generate(z, d0, noise, ImageSource::stego);
        ImageBatch b = g.generate(z, d1, noise, ImageSource::stego);
        CHECK((a.pixels.v - b.pixels.v).abs().maxCoeff() > 0);

        Tensor<float> z2 = randn<float>(rs, {1, cfg.latent_dim});
        ImageBatch c = g.generate(z2, d0, noise, ImageSource::stego);
        CHECK((a.pixels.v - c.pixels.v).abs().maxCoeff() > 0);
    }

    TEST_CASE("disabling the low-pass filter changes the synthesis path") {
        RunConfig on = tiny_cfg(32);
        RunConfig off = on;
        off.use_filter = false;
        Generator<float> ga(on), gb(off);
        RandomStream rs(12, streams::kLatent);
        Tensor<float> z = randn<float>(rs, {1, on.latent_dim});
        auto noise = ga.sample_noise_fields(rs, 1);
        Tensor<float> d = rand_bits<float>(rs, {1, on.payload_depth, 32, 32});
        ImageBatch a = ga.generate(z, d, noise, ImageSource::stego);
        ImageBatch b = gb.generate(z, d, noise, ImageSource::stego);
        CHECK((a.pixels.v - b.pixels.v).abs().maxCoeff() > 0);
    }

    TEST_CASE("every parameter carries a gradient-decay extent and a unique name") {
        RunConfig cfg = tiny_cfg(32);
        Generator<float> g(cfg);
        auto ps = g.params();
        std::set<std::string> names;
        for (auto* p : ps) {
            CHECK(p->hgd_h > 0);
            CHECK(p->hgd_w > 0);
            CHECK(names.insert(p->name).second);
        }
        CHECK(g.mapping[0].w.hgd_h == 4);
        CHECK(g.c0.hgd_h == 4);
        CHECK(g.blocks[0].conv1.w.hgd_h == 8);
        CHECK(g.d_pre1x1.w.hgd_h == 8);
        CHECK(g.d_pre3x3.w.hgd_h == 16);
        CHECK(g.d_rgb.w.hgd_h == 32);
        CHECK(g.p1.hgd_h == 32);
    }

    TEST_CASE("upsampling block gradients check out") {
        RunConfig cfg = tiny_cfg(32);
        cfg.gen_channels = 4;
        cfg.gen_channel_min = 2;
        Generator<double> g(cfg);
        REQUIRE(g.blocks.size() == 1);
        g.blocks[0].noise_scale.value.v[0] = 0.3;

        RandomStream rs(13, 1);
        Tensor<double> x = randn<double>(rs, {1, 4, 4, 4});
        Tensor<double> w = randn<double>(rs, {1, cfg.latent_dim});
        Tensor<double> nz = randn<double>(rs, {1, 1, 8, 8});
        auto rep = check_gradients<double>(
            [&](Tape<double>& t, std::vector<Value<double>> in) {
                return g.run_block(t, g.blocks[0], in[0], in[1], in[2]);
            },
            {x, w, nz});
        CHECK(rep.finite);
        CHECK(rep.passes(1e-4));
    }

    TEST_CASE("payload shape is validated") {
        RunConfig cfg = tiny_cfg(32);
        Generator<float> g(cfg);
        RandomStream rs(14, streams::kLatent);
        Tensor<float> z = randn<float>(rs, {1, cfg.latent_dim});
        auto noise = g.sample_noise_fields(rs, 1);
        CHECK_THROWS(g.generate(z, Tensor<float>::zeros({1, 1, 16, 16}), noise, ImageSource::cover));
        CHECK_THROWS(g.generate(z, Tensor<float>::zeros({2, 1, 32, 32}), noise, ImageSource::cover));
    }
}

TEST_SUITE("extractor") {
    TEST_CASE("logit map matches image geometry and payload depth") {
        RunConfig cfg = tiny_cfg(16);
        Extractor<float> e(cfg);
        RandomStream rs(21, 1);
        Tensor<float> img = randn<float>(rs, {3, 3, 16, 16}, 0.5);
        Tape<float> t;
        Tensor<float> f = e.extract_logits(t, t.constant(img)).val();
        CHECK(f.dims == Shape{3, cfg.payload_depth, 16, 16});
        CHECK(f.all_finite());
    }

    TEST_CASE("binarize thresholds at zero, inclusive") {
        Tensor<float> f({4});
        f.v << -0.1f, 0.0f, 0.2f, -3.0f;
        Tensor<float> b = Extractor<float>::binarize(f);
        CHECK(b.v[0] == 0.0f);
        CHECK(b.v[1] == 1.0f);
        CHECK(b.v[2] == 1.0f);
        CHECK(b.v[3] == 0.0f);
    }

    TEST_CASE("bit accuracy is the fraction of matching positions") {
        Tensor<float> a({4});
        a.v << 1, 0, 1, 0;
        Tensor<float> b({4});
        b.v << 1, 0, 0, 1;
        CHECK(bit_accuracy(a, a) == doctest::Approx(1.0));
        CHECK(bit_accuracy(a, b) == doctest::Approx(0.5));
        Tensor<float> c({4});
        c.v << 0, 1, 0, 1;
        CHECK(bit_accuracy(a, c) == doctest::Approx(0.0));

        Tensor<float> bad({4});
        bad.v << 1, 0, 0.5f, 0;
        CHECK_THROWS(bit_accuracy(a, bad));
        Tensor<float> wrong({3});
        wrong.v << 1, 0, 1;
        CHECK_THROWS(bit_accuracy(a, wrong));
    }

    TEST_CASE("extraction gradients flow back to the image") {
        RunConfig cfg = tiny_cfg(16);
        cfg.ext_width = 3;
        cfg.payload_depth = 1;
        Extractor<double> e(cfg);
        RandomStream rs(22, 1);
        auto rep = check_gradients<double>(
            [&](Tape<double>& t, std::vector<Value<double>> in) { return e.extract_logits(t, in[0]); },
            {randn<double>(rs, {1, 3, 16, 16}, 0.5)});
        CHECK(rep.finite);
        CHECK(rep.passes(1e-4));
    }
}

TEST_SUITE("adversaries") {
    TEST_CASE("discriminator emits one finite logit per image and rejects bad sizes") {
        RunConfig cfg = tiny_cfg(32);
        Discriminator<float> d(cfg);
        RandomStream rs(31, 1);
        Tensor<float> img = randn<float>(rs, {4, 3, 32, 32}, 0.5);
        Tape<float> t;
        Tensor<float> logits = d.discriminate(t, t.constant(img)).val();
        CHECK(logits.dims == Shape{4});
        CHECK(logits.all_finite());

        Tensor<float> wrong = randn<float>(rs, {4, 3, 16, 16}, 0.5);
        Tape<float> t2;
        CHECK_THROWS(d.discriminate(t2, t2.constant(wrong)));
    }

    TEST_CASE("zero-weight discriminator returns its output bias") {
        RunConfig cfg = tiny_cfg(32);
        Discriminator<float> d(cfg);
        for (auto* p : d.params()) p->value.set_zero();
        d.fc2.b.value.v[0] = 0.37f;
        RandomStream rs(32, 1);
        Tensor<float> img = randn<float>(rs, {3, 3, 32, 32});
        Tape<float> t;
        Tensor<float> logits = d.discriminate(t, t.constant(img)).val();
        for (Index i = 0; i < 3; ++i) CHECK(logits.v[i] == doctest::Approx(0.37).epsilon(1e-6));
    }

    TEST_CASE("discriminator input gradients check out") {
        RunConfig cfg = tiny_cfg(16);
        Discriminator<double> d(cfg);
        RandomStream rs(33, 1);
        auto rep = check_gradients<double>(
            [&](Tape<double>& t, std::vector<Value<double>> in) { return d.discriminate(t, in[0]); },
            {randn<double>(rs, {1, 3, 16, 16}, 0.5)});
        CHECK(rep.finite);
        CHECK(rep.passes(1e-4));
    }

    TEST_CASE("steganalyzer probabilities form a distribution over two classes") {
        RunConfig cfg = tiny_cfg(32);
        Steganalyzer<float> s(cfg);
        RandomStream rs(34, 1);
        Tensor<float> img = randn<float>(rs, {5, 3, 32, 32}, 0.5);
        Tape<float> t;
        Tensor<float> p = s.steganalyze(t, t.constant(img)).val();
        CHECK(p.dims == Shape{5, 2});
        for (Index i = 0; i < 5; ++i) {
            CHECK(p.at(i, 0) > 0.0f);
            CHECK(p.at(i, 1) > 0.0f);
            CHECK(p.at(i, 0) + p.at(i, 1) == doctest::Approx(1.0).epsilon(1e-6));
        }

        auto sc = s.scores(img);
        REQUIRE(sc.size() == 5);
        for (Index i = 0; i < 5; ++i) CHECK(sc[(std::size_t)i] == doctest::Approx((double)p.at(i, 1)));
    }

    TEST_CASE("equal logits split probability evenly") {
        RunConfig cfg = tiny_cfg(32);
        Steganalyzer<float> s(cfg);
        s.head.w.value.set_zero();
        s.head.b.value.set_zero();
        RandomStream rs(35, 1);
        Tensor<float> img = randn<float>(rs, {2, 3, 32, 32});
        Tape<float> t;
        Tensor<float> p = s.steganalyze(t, t.constant(img)).val();
        for (Index i = 0; i < 2; ++i) {
            CHECK(p.at(i, 0) == 0.5f);
            CHECK(p.at(i, 1) == 0.5f);
        }
    }

    TEST_CASE("the first two steganalyzer stages preserve spatial size") {
        RunConfig cfg = tiny_cfg(32);
        Steganalyzer<float> s(cfg);
        RandomStream rs(36, 1);
        Tensor<float> img = randn<float>(rs, {1, 3, 32, 32});
        Tape<float> t;
        Value<float> x = leaky_relu(s.stem(t, t.constant(img)));
        CHECK(x.val().dims == Shape{1, cfg.stega_channels, 32, 32});
        x = s.full_res[0](t, x);
        CHECK(x.val().dims == Shape{1, cfg.stega_channels, 32, 32});
        x = s.full_res[1](t, x);
        CHECK(x.val().dims == Shape{1, cfg.stega_channels, 32, 32});
    }
}
