#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gsn/train.hpp"

using namespace gsn;

namespace {

RunConfig train_cfg() {
    RunConfig c;
    c.resolution = 16;
    c.latent_dim = 8;
    c.payload_depth = 1;
    c.gen_channels = 8;
    c.gen_channel_min = 4;
    c.ext_width = 4;
    c.disc_channels = 2;
    c.disc_channel_max = 8;
    c.stega_channels = 2;
    c.stega_channel_max = 8;
    c.batch_size = 2;
    c.seed = 21;
    c.steps = 0;
    return c;
}

Tensor<float> fake_real(Index n, Index r, std::uint64_t seed) {
    RandomStream rs(seed, 99);
    Tensor<float> t = randn<float>(rs, {n, 3, r, r}, 0.5);
    t.v = t.v.min(1.0f).max(-1.0f);
    return t;
}

bool params_identical(const std::vector<Param<float>*>& a, const std::vector<Param<float>*>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i]->name != b[i]->name) return false;
        if (!(a[i]->value.v == b[i]->value.v).all()) return false;
    }
    return true;
}

std::string fresh_dir(const std::string& name) {
    std::string d = (std::filesystem::temp_directory_path() / name).string();
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace

TEST_SUITE("optimizer") {
    TEST_CASE("drives a quadratic to its minimum") {
        Adam<double> opt;
        opt.lr = 0.1;
        Param<double> p("w", Tensor<double>::scalar(5.0));
        for (int i = 0; i < 300; ++i) {
            p.zero_grad();
            p.grad.v[0] = 2.0 * (p.value.v[0] - 3.0);
            opt.step({&p});
        }
        CHECK(p.value.v[0] == doctest::Approx(3.0).epsilon(0.02));
        CHECK(opt.t == 300);
    }

    TEST_CASE("first update is a signed step of size lr") {
        Adam<double> opt;
        opt.lr = 0.05;
        Param<double> p("w", Tensor<double>::scalar(1.0));
        p.grad.v[0] = -7.0;
        opt.step({&p});
        // beta1 = 0 and bias correction make the first step lr * sign(g)
        CHECK(p.value.v[0] == doctest::Approx(1.0 + 0.05).epsilon(1e-6));
    }

    TEST_CASE("rejects a group that changed size") {
        Adam<double> opt;
        Param<double> a("a", Tensor<double>::scalar(0.0));
        Param<double> b("b", Tensor<double>::scalar(0.0));
        opt.step({&a, &b});
        CHECK_THROWS(opt.step(std::vector<Param<double>*>{&a}));
    }

    TEST_CASE("non-trainable parameters are left alone") {
        Adam<double> opt;
        Param<double> a("a", Tensor<double>::scalar(2.0));
        a.trainable = false;
        a.grad.v[0] = 10.0;
        opt.step({&a});
        CHECK(a.value.v[0] == 2.0);
    }
}

TEST_SUITE("training_determinism") {
    TEST_CASE("ten steps are bitwise reproducible") {
        RunConfig cfg = train_cfg();
        Trainer<float> t1(cfg), t2(cfg);
        for (int s = 0; s < 10; ++s) {
            Tensor<float> real = fake_real(cfg.batch_size, cfg.resolution, 100 + (std::uint64_t)s);
            auto l1 = t1.train_step(real);
            auto l2 = t2.train_step(real);
            CHECK(l1.g == l2.g);
            CHECK(l1.d == l2.d);
            CHECK(l1.s == l2.s);
            CHECK(l1.e == l2.e);
            CHECK(l1.acc == l2.acc);
            if (s % cfg.reg_interval == 0) {
                CHECK(l1.r1 > 0.0);
            } else {
                CHECK(l1.r1 == 0.0);
                CHECK(l1.pl == 0.0);
            }
        }
        CHECK(params_identical(t1.G.params(), t2.G.params()));
        CHECK(params_identical(t1.E.params(), t2.E.params()));
        CHECK(params_identical(t1.D.params(), t2.D.params()));
        CHECK(params_identical(t1.SN.params(), t2.SN.params()));
        CHECK(t1.state.eta == t2.state.eta);
        REQUIRE(t1.opt_g.m.size() == t2.opt_g.m.size());
        for (std::size_t i = 0; i < t1.opt_g.m.size(); ++i) {
            CHECK((t1.opt_g.m[i].v == t2.opt_g.m[i].v).all());
            CHECK((t1.opt_g.v[i].v == t2.opt_g.v[i].v).all());
        }
    }

    TEST_CASE("real images influence only the critic") {
        RunConfig cfg = train_cfg();
        Trainer<float> t1(cfg), t2(cfg);
        t1.train_step(fake_real(cfg.batch_size, cfg.resolution, 100));
        t2.train_step(fake_real(cfg.batch_size, cfg.resolution, 200));
        CHECK(params_identical(t1.G.params(), t2.G.params()));
        CHECK(params_identical(t1.E.params(), t2.E.params()));
        CHECK(params_identical(t1.SN.params(), t2.SN.params()));
        CHECK_FALSE(params_identical(t1.D.params(), t2.D.params()));
    }
}

TEST_SUITE("gradient_decay_in_training") {
    TEST_CASE("recovery gradients are divided by the per-depth factor") {
        RunConfig cfg = train_cfg();
        Trainer<float> t(cfg);
        auto pb = t.sample_pairs(2);
        Trainer<float>::StepLosses out;
        t.recovery_backward(pb, out);

        std::vector<Tensor<float>> before;
        for (Param<float>* p : t.G.params()) before.push_back(p->grad);
        t.apply_recovery_decay();

        double worst = 0;
        bool any_decayed_nonzero = false;
        auto ps = t.G.params();
        for (std::size_t i = 0; i < ps.size(); ++i) {
            double f = hgd_factor(ps[i]->hgd_h, ps[i]->hgd_w, cfg.resolution, cfg.resolution, cfg.delta);
            if (f == 1.0) {
                CHECK((ps[i]->grad.v == before[i].v).all());
                continue;
            }
            for (Index j = 0; j < before[i].numel(); ++j) {
                double b = before[i].v[j], a = ps[i]->grad.v[j];
                if (b != 0.0) any_decayed_nonzero = true;
                double rel = std::abs(a * f - b) / std::max(1e-6, std::abs(b));
                worst = std::max(worst, rel);
            }
        }
        CHECK(any_decayed_nonzero);
        CHECK(worst < 1e-4);
    }

    TEST_CASE("an extreme decay base freezes every sub-resolution stage") {
        RunConfig cfg = train_cfg();
        cfg.delta = 1e50;
        Trainer<float> t(cfg);
        std::vector<Tensor<float>> g_before;
        for (Param<float>* p : t.G.params()) g_before.push_back(p->value);
        std::vector<Tensor<float>> e_before;
        for (Param<float>* p : t.E.params()) e_before.push_back(p->value);

        auto pb = t.sample_pairs(2);
        Trainer<float>::StepLosses out;
        t.phase_recovery(pb, out);

        bool full_res_moved = false;
        auto ps = t.G.params();
        for (std::size_t i = 0; i < ps.size(); ++i) {
            bool same = (ps[i]->value.v == g_before[i].v).all();
            if (ps[i]->hgd_h < cfg.resolution) {
                CHECK(same);
            } else if (!same) {
                full_res_moved = true;
            }
        }
        CHECK(full_res_moved);
        bool extractor_moved = false;
        auto es = t.E.params();
        for (std::size_t i = 0; i < es.size(); ++i)
            if (!(es[i]->value.v == e_before[i].v).all()) extractor_moved = true;
        CHECK(extractor_moved);
    }
}

TEST_SUITE("training_runs") {
    TEST_CASE("fit resumes from a checkpoint bitwise") {
        RunConfig cfg = train_cfg();
        cfg.steps = 6;
        cfg.checkpoint_every = 3;
        cfg.eval_every = 1000;
        std::string ddir = fresh_dir("gsn_test_corpus");
        make_synthetic_dataset(ddir, 10, cfg.resolution, 5);

        std::string run1 = fresh_dir("gsn_test_run1");
        Dataset d1 = Dataset::load(ddir, cfg);
        Trainer<float> t1(cfg);
        t1.fit(d1, run1);
        CHECK(t1.state.step == 6);

        std::string ck3 = Trainer<float>::checkpoint_path(run1, 3);
        REQUIRE(std::filesystem::exists(ck3));
        Trainer<float> t2(cfg);
        Dataset d2 = Dataset::load(ddir, cfg);
        Dataset::Cursor cur = t2.load_checkpoint(ck3);
        CHECK(t2.state.step == 3);
        d2.restore(cur);
        std::string run2 = fresh_dir("gsn_test_run2");
        t2.fit(d2, run2);

        CHECK(t2.state.step == 6);
        CHECK(params_identical(t1.G.params(), t2.G.params()));
        CHECK(params_identical(t1.E.params(), t2.E.params()));
        CHECK(params_identical(t1.D.params(), t2.D.params()));
        CHECK(params_identical(t1.SN.params(), t2.SN.params()));
        CHECK(t1.state.eta == t2.state.eta);
        REQUIRE(t1.state.history.size() == 6);
        REQUIRE(t2.state.history.size() == 6);
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(t1.state.history[i].e == t2.state.history[i].e);
            CHECK(t1.state.history[i].acc == t2.state.history[i].acc);
        }
        CHECK(t1.opt_g.t == t2.opt_g.t);
        REQUIRE(t1.opt_g.m.size() == t2.opt_g.m.size());
        for (std::size_t i = 0; i < t1.opt_g.m.size(); ++i) {
            CHECK((t1.opt_g.m[i].v == t2.opt_g.m[i].v).all());
            CHECK((t1.opt_g.v[i].v == t2.opt_g.v[i].v).all());
        }

        std::string latest = find_latest_checkpoint(run1);
        CHECK(latest == Trainer<float>::checkpoint_path(run1, 6));

        // the run log carries per-step losses and the final evaluation
        std::ifstream log(run1 + "/metrics.log");
        std::stringstream buf;
        buf << log.rdbuf();
        std::string text = buf.str();
        CHECK(text.find("step=6 ") != std::string::npos);
        CHECK(text.find("eval step=6 acc=") != std::string::npos);
        auto pos = text.find("eval step=6 acc=");
        double acc = std::stod(text.substr(pos + 16));
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
    }

    TEST_CASE("a checkpoint refuses a different configuration") {
        RunConfig cfg = train_cfg();
        std::string dir = fresh_dir("gsn_test_cfg_guard");
        Trainer<float> t(cfg);
        t.save_checkpoint(dir + "/checkpoint_00000000.bin", {});
        RunConfig other = cfg;
        other.lambda1 = 2.0;
        Trainer<float> t2(other);
        CHECK_THROWS(t2.load_checkpoint(dir + "/checkpoint_00000000.bin"));
    }

    TEST_CASE("zero requested steps still leaves a loadable snapshot") {
        RunConfig cfg = train_cfg();
        cfg.steps = 0;
        std::string ddir = fresh_dir("gsn_test_corpus0");
        make_synthetic_dataset(ddir, 4, cfg.resolution, 6);
        std::string run = fresh_dir("gsn_test_run0");
        Dataset d = Dataset::load(ddir, cfg);
        Trainer<float> t(cfg);
        t.fit(d, run);
        CHECK(t.state.step == 0);
        std::string latest = find_latest_checkpoint(run);
        CHECK(latest == Trainer<float>::checkpoint_path(run, 0));
        Trainer<float> t2(cfg);
        t2.load_checkpoint(latest);
        CHECK(params_identical(t.G.params(), t2.G.params()));
        CHECK(find_latest_checkpoint(run + "/nowhere").empty());
    }

    TEST_CASE("a poisoned weight aborts the step with a pointer to the cause") {
        RunConfig cfg = train_cfg();
        Trainer<float> t(cfg);
        t.G.params()[0]->value.v[0] = std::numeric_limits<float>::quiet_NaN();
        bool threw = false;
        try {
            t.train_step(fake_real(cfg.batch_size, cfg.resolution, 7));
        } catch (const std::runtime_error& e) {
            threw = true;
            CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
        }
        CHECK(threw);
    }
}
