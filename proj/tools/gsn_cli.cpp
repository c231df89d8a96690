// Command-line surface: dataset synthesis, training, cover/stego generation,
// bit extraction, detection evaluation, the gradient-check table, and the
// cumulative ablation driver. Every command is deterministic under --seed.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gsn/bits.hpp"
#include "gsn/evaluate.hpp"
#include "gsn/gradcheck_suite.hpp"
#include "gsn/report.hpp"
#include "gsn/train.hpp"

using namespace gsn;

namespace {

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

RunConfig config_from(const std::string& config_path, const std::vector<std::string>& sets) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::load(config_path);
    for (const std::string& kv : sets) {
        auto eq = kv.find('=');
        GSN_CHECK(eq != std::string::npos, "--set expects key=value, got '" << kv << "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

void apply_ablations(RunConfig& cfg, const std::vector<std::string>& ablate) {
    for (const std::string& a : ablate) {
        if (a == "no-filter")
            cfg.use_filter = false;
        else if (a == "no-steganalyzer")
            cfg.use_steganalyzer = false;
        else if (a == "no-hgd")
            cfg.use_hgd = false;
        else
            fail("unknown ablation '" + a + "'");
    }
}

KvLines config_marks(const RunConfig& cfg) {
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    return {
        {"resolution", std::to_string(cfg.resolution)},
        {"payload_depth", std::to_string(cfg.payload_depth)},
        {"seed", std::to_string(cfg.seed)},
        {"filter", b(cfg.use_filter)},
        {"steganalyzer", b(cfg.use_steganalyzer)},
        {"hgd", b(cfg.use_hgd)},
    };
}

struct SummarySizes {
    Index train_pairs = 256;
    Index test_pairs = 64;
    Index detector_steps = 200;
    Index acc_pairs = 256;
    bool enabled = true;
};

/// Shared by train and ablate: fit on a corpus, then append a summary with
/// fresh-pair accuracy and a detection report.
DetectionReport train_one(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir,
                          bool resume, const SummarySizes& sz) {
    Dataset data = Dataset::load(data_dir, cfg);
    GSN_CHECK(data.size() >= 1, "dataset " << data_dir << " holds no usable images");
    Trainer<float> tr(cfg);
    if (resume) {
        std::string latest = find_latest_checkpoint(out_dir);
        if (!latest.empty()) {
            Dataset::Cursor cur = tr.load_checkpoint(latest);
            data.restore(cur);
            std::cout << "resumed from " << latest << " at step " << tr.state.step << "\n";
        }
    }
    tr.fit(data, out_dir, &std::cout);

    if (!tr.state.history.empty()) {
        std::vector<double> le, acc;
        for (const LossRecord& r : tr.state.history) {
            le.push_back(r.e);
            acc.push_back(r.acc);
        }
        plot_series(out_dir + "/loss_e.png", le);
        plot_series(out_dir + "/train_acc.png", acc);
    }

    DetectionReport rep;
    KvLines summary = config_marks(cfg);
    summary.emplace_back("steps", std::to_string(tr.state.step));
    if (sz.enabled) {
        double acc = tr.eval_accuracy(sz.acc_pairs, 0xACCu);
        EvalProtocol ep;
        ep.train_pairs = sz.train_pairs;
        ep.test_pairs = sz.test_pairs;
        ep.detector_steps = sz.detector_steps;
        ep.seed = cfg.seed;
        rep = evaluate_detection(tr.G, tr.E, cfg, ep);
        summary.emplace_back("acc", format_double(acc));
        summary.emplace_back("pe", format_double(rep.pe));
        summary.emplace_back("auc", format_double(rep.auc));
        summary.emplace_back("mae", format_double(rep.mae));
        summary.emplace_back("bit_acc_eval", format_double(rep.bit_acc));
        write_roc_points(out_dir + "/roc.tsv", rep.roc);
        plot_roc(out_dir + "/roc.png", rep.roc);
        std::cout << "summary acc=" << acc << " pe=" << rep.pe << " auc=" << rep.auc
                  << " mae=" << rep.mae << "\n";
    }
    write_kv(out_dir + "/summary.txt", summary);
    return rep;
}

int cmd_generate(const std::string& checkpoint, const std::string& mode, Index count,
                 std::uint64_t seed, const std::string& out_dir, const std::string& payload_file,
                 double sigma) {
    RunConfig cfg = read_checkpoint_config(checkpoint);
    Trainer<float> tr(cfg);
    tr.load_checkpoint(checkpoint);
    std::filesystem::create_directories(out_dir);

    Index R = cfg.resolution, B = cfg.payload_depth;
    Index cap = cfg.capacity_bits();
    bool stego = mode == "stego";
    RandomStream zrs(seed, streams::kLatent), nrs(seed, streams::kBlockNoise);
    RandomStream prs(seed, streams::kMergeNoise), brs(seed, streams::kSecret);

    BitStream payload;
    std::string payload_source = "none";
    if (stego) {
        if (!payload_file.empty()) {
            payload = load_bits(payload_file);
            payload_source = "file";
            GSN_CHECK(payload.length() <= cap * count,
                      "payload of " << payload.length() << " bits exceeds capacity: " << count
                                    << " images x " << cap << " bits (B=" << B << ", " << R << "x" << R
                                    << ") = " << cap * count << " bits");
        } else {
            payload.bits.resize((std::size_t)(cap * count));
            for (auto& b : payload.bits) b = brs.bernoulli() ? 1 : 0;
            payload_source = "random";
        }
    }

    KvLines manifest = {
        {"mode", mode},
        {"count", std::to_string(count)},
        {"seed", std::to_string(seed)},
        {"resolution", std::to_string(R)},
        {"payload_depth", std::to_string(B)},
        {"capacity_bits_per_image", std::to_string(cap)},
        {"checkpoint", checkpoint},
    };
    if (stego) {
        manifest.emplace_back("payload_source", payload_source);
        manifest.emplace_back("payload_bits", std::to_string(payload.length()));
        manifest.emplace_back("payload_hash", hex64(fnv1a64(bytes_from_bits(payload))));
        save_bits(payload, out_dir + "/payload.bits");
    }

    for (Index done = 0; done < count;) {
        Index m = std::min<Index>(32, count - done);
        Tensor<float> z = randn<float>(zrs, {m, cfg.latent_dim});
        auto noise = tr.G.sample_noise_fields(nrs, m);
        Tensor<float> d;
        if (stego) {
            d = Tensor<float>::zeros({m, B, R, R});
            for (Index i = 0; i < m; ++i) {
                Index base = (done + i) * cap;
                Index take = std::min<Index>(cap, std::max<Index>(0, payload.length() - base));
                for (Index k = 0; k < take; ++k) d.v[i * cap + k] = (float)payload.bits[(std::size_t)(base + k)];
            }
        } else {
            d = randn<float>(prs, {m, 1, R, R}, sigma);
        }
        ImageBatch batch = tr.G.generate(z, d, noise, stego ? ImageSource::stego : ImageSource::cover);
        for (Index i = 0; i < m; ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "%s_%05lld.png", mode.c_str(), (long long)(done + i));
            save_png(batch, i, out_dir + "/" + name);
            manifest.emplace_back("image", name);
        }
        done += m;
    }
    write_kv(out_dir + "/manifest.txt", manifest);
    std::cout << "wrote " << count << " " << mode << " images to " << out_dir << "\n";
    return 0;
}

int cmd_extract(const std::string& checkpoint, const std::string& png_path, Index n_bits,
                const std::string& out_path, const std::string& truth_file) {
    RunConfig cfg = read_checkpoint_config(checkpoint);
    Trainer<float> tr(cfg);
    tr.load_checkpoint(checkpoint);

    ImageBatch img = load_png(png_path, ImageSource::stego);
    Index R = cfg.resolution;
    GSN_CHECK(img.pixels.h() == R && img.pixels.w() == R,
              "image is " << img.pixels.h() << "x" << img.pixels.w() << " but the model expects " << R
                          << "x" << R);
    if (n_bits == 0) n_bits = cfg.capacity_bits();
    GSN_CHECK(n_bits <= cfg.capacity_bits(),
              "requested " << n_bits << " bits but capacity is " << cfg.capacity_bits());

    Tensor<float> bits = tr.E.extract_bits(img.pixels);
    BitStream rec = unpack_secret(bits.reshaped({cfg.payload_depth, R, R}), n_bits);
    save_bits(rec, out_path);
    std::cout << "recovered " << rec.length() << " bits -> " << out_path << "\n";

    if (!truth_file.empty()) {
        BitStream truth = load_bits(truth_file);
        GSN_CHECK(truth.length() >= rec.length(),
                  "ground truth holds " << truth.length() << " bits, fewer than the " << rec.length()
                                        << " recovered");
        Index hits = 0;
        for (Index i = 0; i < rec.length(); ++i)
            if (rec.bits[(std::size_t)i] == truth.bits[(std::size_t)i]) ++hits;
        std::cout << "acc=" << format_double((double)hits / (double)rec.length()) << "\n";
    }
    return 0;
}

int cmd_evaluate(const std::string& checkpoint, const EvalProtocol& ep, const std::string& out_dir) {
    RunConfig cfg = read_checkpoint_config(checkpoint);
    Trainer<float> tr(cfg);
    tr.load_checkpoint(checkpoint);
    DetectionReport rep = evaluate_detection(tr.G, tr.E, cfg, ep);

    std::filesystem::create_directories(out_dir);
    KvLines kv = {
        {"checkpoint", checkpoint},
        {"train_pairs", std::to_string(ep.train_pairs)},
        {"test_pairs", std::to_string(ep.test_pairs)},
        {"detector_steps", std::to_string(ep.detector_steps)},
        {"zero_payload", ep.zero_payload ? "true" : "false"},
    };
    for (auto& line : report_to_kv(rep)) kv.push_back(line);
    write_kv(out_dir + "/report.txt", kv);
    write_roc_points(out_dir + "/roc.tsv", rep.roc);
    plot_roc(out_dir + "/roc.png", rep.roc);
    std::cout << "pe=" << rep.pe << " auc=" << rep.auc << " mae=" << rep.mae
              << " bit_acc=" << rep.bit_acc << "\n";
    return 0;
}

int cmd_gradcheck(bool inject_fault) {
    auto rows = run_gradcheck_suite(1e-4, inject_fault);
    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.name.size());
    bool ok = true;
    for (const auto& r : rows) {
        std::cout << std::left << std::setw((int)width + 2) << r.name << std::scientific
                  << std::setprecision(3) << r.max_rel_err << (r.finite ? "" : " (non-finite)") << "  "
                  << (r.pass ? "PASS" : "FAIL") << "\n";
        ok = ok && r.pass;
    }
    std::cout.unsetf(std::ios::scientific);
    std::cout << (ok ? "all gradients match" : "gradient mismatch detected") << "\n";
    return ok ? 0 : 2;
}

int cmd_ablate(RunConfig base, const std::string& data_dir, const std::string& out_dir,
               const SummarySizes& sz) {
    struct Arm {
        const char* name;
        bool filter, steganalyzer, hgd;
    };
    const Arm arms[] = {
        {"baseline", false, false, false},
        {"filter", true, false, false},
        {"filter_steganalyzer", true, true, false},
        {"full", true, true, true},
    };
    std::filesystem::create_directories(out_dir);
    KvLines table;
    std::cout << std::left << std::setw(22) << "arm" << std::setw(8) << "filter" << std::setw(8)
              << "steg" << std::setw(8) << "hgd" << std::setw(10) << "pe" << std::setw(10) << "auc"
              << std::setw(10) << "mae" << "bit_acc\n";
    for (const Arm& a : arms) {
        RunConfig cfg = base;
        cfg.use_filter = a.filter;
        cfg.use_steganalyzer = a.steganalyzer;
        cfg.use_hgd = a.hgd;
        DetectionReport rep = train_one(cfg, data_dir, out_dir + "/" + a.name, false, sz);
        auto put = [&](const char* key, const std::string& v) {
            table.emplace_back(std::string(a.name) + "." + key, v);
        };
        put("pe", format_double(rep.pe));
        put("auc", format_double(rep.auc));
        put("mae", format_double(rep.mae));
        put("bit_acc", format_double(rep.bit_acc));
        std::cout << std::left << std::setw(22) << a.name << std::setw(8) << (a.filter ? "on" : "off")
                  << std::setw(8) << (a.steganalyzer ? "on" : "off") << std::setw(8)
                  << (a.hgd ? "on" : "off") << std::setw(10) << format_double(rep.pe) << std::setw(10)
                  << format_double(rep.auc) << std::setw(10) << format_double(rep.mae)
                  << format_double(rep.bit_acc) << "\n";
    }
    write_kv(out_dir + "/ablation.txt", table);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generative image steganography: train, generate, extract, evaluate"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, checkpoint, mode = "cover", payload_file, truth_file;
    std::string png_path, out_path = "recovered.bits";
    std::vector<std::string> sets, ablate;
    std::uint64_t seed = 1;
    Index steps = -1, count = 1, n_bits = 0, resolution = 32;
    double sigma = -1;
    bool resume = false, no_summary = false, zero_payload = false, inject_fault = false;
    SummarySizes sz;
    EvalProtocol ep;

    auto add_config = [&](CLI::App* c) {
        c->add_option("--config", config_path, "key = value config file");
        c->add_option("--set", sets, "config override, key=value (repeatable)");
        c->add_option("--seed", seed, "run seed");
        c->add_option("--steps", steps, "training steps override");
        c->add_option("--ablate", ablate, "disable a component")
            ->check(CLI::IsMember({"no-filter", "no-steganalyzer", "no-hgd"}));
    };

    CLI::App* mk = app.add_subcommand("make-dataset", "write a synthetic PNG corpus");
    mk->add_option("--out", out_dir, "output directory")->required();
    mk->add_option("--count", count, "number of images")->check(CLI::PositiveNumber);
    mk->add_option("--resolution", resolution, "image side length");
    mk->add_option("--seed", seed, "corpus seed");

    CLI::App* train = app.add_subcommand("train", "train the four-network rig");
    add_config(train);
    train->add_option("--data", data_dir, "real-image corpus directory")->required();
    train->add_option("--out", out_dir, "run directory")->required();
    train->add_flag("--resume", resume, "continue from the latest checkpoint in --out");
    train->add_flag("--no-summary", no_summary, "skip the post-run detection summary");
    train->add_option("--summary-train-pairs", sz.train_pairs, "detector training pairs for the summary");
    train->add_option("--summary-test-pairs", sz.test_pairs, "held-out pairs for the summary");
    train->add_option("--summary-detector-steps", sz.detector_steps, "detector steps for the summary");
    train->add_option("--summary-acc-pairs", sz.acc_pairs, "fresh pairs for the accuracy estimate");

    CLI::App* gen = app.add_subcommand("generate", "synthesize cover or stego images");
    gen->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    gen->add_option("--mode", mode, "cover | stego")->check(CLI::IsMember({"cover", "stego"}));
    gen->add_option("--count", count, "images to write")->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed, "generation seed");
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--payload", payload_file, "raw byte file to embed (stego mode)");
    gen->add_option("--sigma", sigma, "cover-mode merge noise scale (default: config sigma_test)");

    CLI::App* ext = app.add_subcommand("extract", "recover bits from a stego PNG");
    ext->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    ext->add_option("--in", png_path, "stego PNG path")->required();
    ext->add_option("--bits", n_bits, "bits to recover (default: full capacity)");
    ext->add_option("--out", out_path, "recovered bit file");
    ext->add_option("--truth", truth_file, "raw byte file with the original payload");

    CLI::App* ev = app.add_subcommand("evaluate", "train a fresh detector and report Pe/ROC/AUC/MAE");
    ev->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    ev->add_option("--train-pairs", ep.train_pairs, "pairs for detector training (>= 64)");
    ev->add_option("--test-pairs", ep.test_pairs, "held-out pairs (>= 64)");
    ev->add_option("--detector-steps", ep.detector_steps, "detector training steps");
    ev->add_option("--seed", ep.seed, "evaluation seed");
    ev->add_flag("--zero-payload", zero_payload, "control arm: zero payload in both branches");
    ev->add_option("--out", out_dir, "report directory")->required();

    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of every custom op");
    gc->add_flag("--inject-fault", inject_fault, "add a deliberately wrong backward; must FAIL");

    CLI::App* ab = app.add_subcommand("ablate", "cumulative component study at matched seeds");
    add_config(ab);
    ab->add_option("--data", data_dir, "real-image corpus directory")->required();
    ab->add_option("--out", out_dir, "study directory")->required();
    ab->add_option("--summary-train-pairs", sz.train_pairs, "detector training pairs per arm");
    ab->add_option("--summary-test-pairs", sz.test_pairs, "held-out pairs per arm");
    ab->add_option("--summary-detector-steps", sz.detector_steps, "detector steps per arm");

    CLI11_PARSE(app, argc, argv);

    try {
        if (mk->parsed()) {
            make_synthetic_dataset(out_dir, count, resolution, seed);
            std::cout << "wrote " << count << " images to " << out_dir << "\n";
            return 0;
        }
        if (train->parsed() || ab->parsed()) {
            RunConfig cfg = config_from(config_path, sets);
            if (steps >= 0) cfg.steps = steps;
            if (train->count("--seed") || ab->count("--seed")) cfg.seed = seed;
            apply_ablations(cfg, ablate);
            cfg.validate();
            sz.enabled = !no_summary;
            if (train->parsed()) {
                train_one(cfg, data_dir, out_dir, resume, sz);
                return 0;
            }
            return cmd_ablate(cfg, data_dir, out_dir, sz);
        }
        if (gen->parsed()) {
            if (sigma < 0) sigma = read_checkpoint_config(checkpoint).sigma_test;
            return cmd_generate(checkpoint, mode, count, seed, out_dir, payload_file, sigma);
        }
        if (ext->parsed()) return cmd_extract(checkpoint, png_path, n_bits, out_path, truth_file);
        if (ev->parsed()) {
            ep.zero_payload = zero_payload;
            return cmd_evaluate(checkpoint, ep, out_dir);
        }
        if (gc->parsed()) return cmd_gradcheck(inject_fault);
    } catch (const std::exception& e) {
        std::cerr << "error category=invalid_run message=" << e.what() << "\n";
        return 1;
    }
    return 0;
}
