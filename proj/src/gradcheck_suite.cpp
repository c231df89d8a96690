#include "gsn/gradcheck_suite.hpp"

#include <functional>

#include "gsn/adversaries.hpp"
#include "gsn/extractor.hpp"
#include "gsn/generator.hpp"
#include "gsn/gradcheck.hpp"
#include "gsn/losses.hpp"

namespace gsn {

namespace {

RunConfig suite_cfg(Index resolution) {
    RunConfig c;
    c.resolution = resolution;
    c.latent_dim = 4;
    c.payload_depth = 2;
    c.gen_channels = 4;
    c.gen_channel_min = 2;
    c.ext_width = 3;
    c.disc_channels = 2;
    c.disc_channel_max = 4;
    c.stega_channels = 2;
    c.stega_channel_max = 4;
    c.seed = 77;
    return c;
}

using Op = std::function<Value<double>(Tape<double>&, std::vector<Value<double>>)>;

struct Entry {
    std::string name;
    Op op;
    std::vector<Tensor<double>> inputs;
};

}  // namespace

std::vector<GradcheckRow> run_gradcheck_suite(double tol, bool inject_fault) {
    RandomStream rs(177, 1);
    std::vector<Entry> entries;

    entries.push_back({"conv2d",
                       [](Tape<double>&, std::vector<Value<double>> in) {
                           return conv2d_valid(in[0], in[1]);
                       },
                       {randn<double>(rs, {2, 2, 5, 5}), randn<double>(rs, {3, 2, 3, 3})}});

    entries.push_back({"conv2d_stride2",
                       [](Tape<double>&, std::vector<Value<double>> in) {
                           return conv2d_valid(in[0], in[1], 2);
                       },
                       {randn<double>(rs, {1, 2, 6, 6}), randn<double>(rs, {2, 2, 3, 3})}});

    entries.push_back({"pad2d_reflect",
                       [](Tape<double>&, std::vector<Value<double>> in) {
                           Padding p;
                           p.mode = Padding::Mode::reflect;
                           p.top = p.bottom = p.left = p.right = 1;
                           return pad2d(in[0], p);
                       },
                       {randn<double>(rs, {1, 2, 4, 4})}});

    entries.push_back({"upsample2x",
                       [](Tape<double>&, std::vector<Value<double>> in) { return upsample2x(in[0]); },
                       {randn<double>(rs, {2, 3, 4, 4})}});

    entries.push_back({"meanpool2x",
                       [](Tape<double>&, std::vector<Value<double>> in) { return meanpool2x(in[0]); },
                       {randn<double>(rs, {2, 3, 4, 4})}});

    entries.push_back({"global_avg_pool",
                       [](Tape<double>&, std::vector<Value<double>> in) { return global_avg_pool(in[0]); },
                       {randn<double>(rs, {2, 3, 4, 4})}});

    entries.push_back({"add_scaled_noise",
                       [](Tape<double>&, std::vector<Value<double>> in) {
                           return add_scaled_noise(in[0], in[1], in[2]);
                       },
                       {randn<double>(rs, {2, 3, 4, 4}), randn<double>(rs, {1}),
                        randn<double>(rs, {2, 1, 4, 4})}});

    entries.push_back({"modulated_conv",
                       [](Tape<double>&, std::vector<Value<double>> in) {
                           return modulated_conv(in[0], in[1], in[2], true);
                       },
                       {randn<double>(rs, {2, 3, 4, 4}), randn<double>(rs, {2, 3, 3, 3}),
                        randn<double>(rs, {2, 3}, 0.4, 1.0)}});

    entries.push_back({"merge_data",
                       [](Tape<double>&, std::vector<Value<double>> in) {
                           return merge_data(in[0], in[1], in[2]);
                       },
                       {randn<double>(rs, {2, 5, 4, 4}), randn<double>(rs, {2, 2, 4, 4}),
                        randn<double>(rs, {1})}});

    entries.push_back({"low_pass",
                       [](Tape<double>&, std::vector<Value<double>> in) { return low_pass(in[0]); },
                       {randn<double>(rs, {1, 2, 6, 6})}});

    entries.push_back({"softmax_rows",
                       [](Tape<double>&, std::vector<Value<double>> in) { return softmax_rows(in[0]); },
                       {randn<double>(rs, {3, 4})}});

    entries.push_back({"cross_entropy_rows",
                       [](Tape<double>&, std::vector<Value<double>> in) {
                           return add(cross_entropy_rows(in[0], 0), cross_entropy_rows(in[1], 1));
                       },
                       {randn<double>(rs, {4, 2}, 2.0), randn<double>(rs, {4, 2}, 2.0)}});

    entries.push_back({"fully_connected",
                       [](Tape<double>&, std::vector<Value<double>> in) {
                           return fully_connected(in[0], in[1], in[2]);
                       },
                       {randn<double>(rs, {3, 4}), randn<double>(rs, {4, 2}), randn<double>(rs, {2})}});

    // Composite forwards: network weights stay fixed, the data path is
    // differentiated.
    {
        RunConfig cfg = suite_cfg(32);
        auto g = std::make_shared<Generator<double>>(cfg);
        g->blocks[0].noise_scale.value.v[0] = 0.3;
        entries.push_back({"general_block",
                           [g](Tape<double>& t, std::vector<Value<double>> in) {
                               return g->run_block(t, g->blocks[0], in[0], in[1], in[2]);
                           },
                           {randn<double>(rs, {1, 4, 4, 4}), randn<double>(rs, {1, 4}),
                            randn<double>(rs, {1, 1, 8, 8})}});
    }
    {
        RunConfig cfg = suite_cfg(16);
        auto g = std::make_shared<Generator<double>>(cfg);
        auto noise = g->sample_noise_fields(rs, 1);
        Tensor<double> payload = rand_bits<double>(rs, {1, 2, 16, 16});
        entries.push_back({"map_latent",
                           [g](Tape<double>& t, std::vector<Value<double>> in) {
                               return g->map_latent(t, in[0]);
                           },
                           {randn<double>(rs, {2, 4})}});
        entries.push_back({"synthesize",
                           [g, noise, payload](Tape<double>& t, std::vector<Value<double>> in) {
                               Value<double> w = g->map_latent(t, in[0]);
                               return g->synthesize(t, w, payload, noise);
                           },
                           {randn<double>(rs, {1, 4})}});
    }
    {
        RunConfig cfg = suite_cfg(16);
        auto e = std::make_shared<Extractor<double>>(cfg);
        entries.push_back({"extract_logits",
                           [e](Tape<double>& t, std::vector<Value<double>> in) {
                               return e->extract_logits(t, in[0]);
                           },
                           {randn<double>(rs, {1, 3, 8, 8}, 0.5)}});
    }
    {
        RunConfig cfg = suite_cfg(16);
        auto d = std::make_shared<Discriminator<double>>(cfg);
        entries.push_back({"discriminate",
                           [d](Tape<double>& t, std::vector<Value<double>> in) {
                               return d->discriminate(t, in[0]);
                           },
                           {randn<double>(rs, {1, 3, 16, 16}, 0.5)}});
        auto s = std::make_shared<Steganalyzer<double>>(cfg);
        entries.push_back({"steganalyzer_logits",
                           [s](Tape<double>& t, std::vector<Value<double>> in) {
                               return s->logits(t, in[0]);
                           },
                           {randn<double>(rs, {1, 3, 16, 16}, 0.5)}});
    }

    if (inject_fault) {
        // Correct value but a backward off by a factor 1.001; the row must
        // come out FAIL, demonstrating the harness catches wrong gradients.
        entries.push_back({"injected_fault",
                           [](Tape<double>&, std::vector<Value<double>> in) {
                               Value<double> x = in[0];
                               Tensor<double> y = x.val();
                               y.v = y.v.square();
                               int px = x.id;
                               return x.tape->custom(std::move(y), {px}, [px](Tape<double>& t, int id) {
                                   t.grad(px).v += 2.002 * t.value(px).v * t.grad(id).v;
                               });
                           },
                           {randn<double>(rs, {3, 3})}});
    }

    std::vector<GradcheckRow> rows;
    rows.reserve(entries.size());
    for (Entry& e : entries) {
        auto rep = check_gradients<double>(e.op, e.inputs);
        GradcheckRow row;
        row.name = e.name;
        row.max_rel_err = (double)rep.max_rel_err;
        row.finite = rep.finite;
        row.pass = rep.passes(tol);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace gsn
