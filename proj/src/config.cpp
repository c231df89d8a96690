#include "gsn/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace gsn {
namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

Index parse_index(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long long r = 0;
    try {
        r = std::stoll(v, &pos);
    } catch (const std::exception&) {
        fail("config key '" + key + "': expected integer, got '" + v + "'");
    }
    if (pos != v.size()) fail("config key '" + key + "': trailing characters in '" + v + "'");
    return (Index)r;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long r = 0;
    try {
        r = std::stoull(v, &pos);
    } catch (const std::exception&) {
        fail("config key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
    if (pos != v.size()) fail("config key '" + key + "': trailing characters in '" + v + "'");
    return (std::uint64_t)r;
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double r = 0;
    try {
        r = std::stod(v, &pos);
    } catch (const std::exception&) {
        fail("config key '" + key + "': expected number, got '" + v + "'");
    }
    if (pos != v.size()) fail("config key '" + key + "': trailing characters in '" + v + "'");
    return r;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail("config key '" + key + "': expected true/false, got '" + v + "'");
    return false;
}

bool is_pow2(Index x) { return x > 0 && (x & (x - 1)) == 0; }

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
    static const std::map<std::string, Setter> setters = {
#define GSN_CFG_INDEX(field) \
    {#field, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_index(k, v); }}
#define GSN_CFG_DOUBLE(field) \
    {#field, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_double(k, v); }}
#define GSN_CFG_BOOL(field) \
    {#field, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_bool(k, v); }}
        GSN_CFG_INDEX(resolution),
        GSN_CFG_INDEX(payload_depth),
        GSN_CFG_INDEX(latent_dim),
        GSN_CFG_DOUBLE(lambda1),
        GSN_CFG_DOUBLE(lambda2),
        GSN_CFG_DOUBLE(alpha),
        GSN_CFG_DOUBLE(beta),
        GSN_CFG_DOUBLE(delta),
        GSN_CFG_DOUBLE(sigma_train),
        GSN_CFG_DOUBLE(sigma_test),
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); }},
        GSN_CFG_INDEX(gen_channels),
        GSN_CFG_INDEX(gen_channel_min),
        GSN_CFG_INDEX(ext_width),
        GSN_CFG_INDEX(disc_channels),
        GSN_CFG_INDEX(disc_channel_max),
        GSN_CFG_INDEX(stega_channels),
        GSN_CFG_INDEX(stega_channel_max),
        GSN_CFG_INDEX(batch_size),
        GSN_CFG_INDEX(steps),
        GSN_CFG_DOUBLE(lr),
        GSN_CFG_DOUBLE(adam_beta1),
        GSN_CFG_DOUBLE(adam_beta2),
        GSN_CFG_DOUBLE(adam_eps),
        GSN_CFG_INDEX(reg_interval),
        GSN_CFG_DOUBLE(pl_decay),
        GSN_CFG_DOUBLE(p_init),
        {"adv_loss", [](RunConfig& c, const std::string&, const std::string& v) { c.adv_loss = v; }},
        {"loss_e_mode", [](RunConfig& c, const std::string&, const std::string& v) { c.loss_e_mode = v; }},
        GSN_CFG_BOOL(use_hgd),
        GSN_CFG_BOOL(use_filter),
        GSN_CFG_BOOL(use_steganalyzer),
        GSN_CFG_INDEX(checkpoint_every),
        GSN_CFG_INDEX(eval_every),
#undef GSN_CFG_INDEX
#undef GSN_CFG_DOUBLE
#undef GSN_CFG_BOOL
    };
    auto it = setters.find(key);
    if (it == setters.end()) fail("unknown config key '" + key + "'");
    it->second(*this, key, value);
}

void RunConfig::validate() const {
    GSN_CHECK(is_pow2(resolution) && resolution >= 16, "resolution must be a power of two >= 16, got " << resolution);
    GSN_CHECK(payload_depth >= 1 && payload_depth <= 8, "payload_depth must lie in [1,8], got " << payload_depth);
    GSN_CHECK(latent_dim >= 1, "latent_dim must be positive");
    GSN_CHECK(lambda1 > 0 && lambda2 > 0 && alpha > 0 && beta > 0, "loss weights must be positive");
    GSN_CHECK(delta > 1, "delta must exceed 1, got " << delta);
    GSN_CHECK(sigma_train > 0 && sigma_test > 0, "noise sigmas must be positive");
    GSN_CHECK(gen_channels >= 4 && gen_channel_min >= 1 && gen_channel_min <= gen_channels,
              "generator channel bounds invalid");
    GSN_CHECK(ext_width >= 1 && disc_channels >= 1 && stega_channels >= 1, "network widths must be positive");
    GSN_CHECK(disc_channel_max >= disc_channels && stega_channel_max >= stega_channels,
              "channel caps below base widths");
    GSN_CHECK(batch_size >= 1 && steps >= 0, "batch_size must be positive, steps non-negative");
    GSN_CHECK(lr > 0 && adam_eps > 0, "optimizer constants must be positive");
    GSN_CHECK(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1,
              "Adam moment decays must lie in [0,1)");
    GSN_CHECK(reg_interval >= 1, "reg_interval must be positive");
    GSN_CHECK(pl_decay > 0 && pl_decay < 1, "pl_decay must lie in (0,1)");
    GSN_CHECK(adv_loss == "nonsat" || adv_loss == "literal", "adv_loss must be nonsat or literal, got " << adv_loss);
    GSN_CHECK(loss_e_mode == "two_sided" || loss_e_mode == "one_sided",
              "loss_e_mode must be two_sided or one_sided, got " << loss_e_mode);
    GSN_CHECK(checkpoint_every >= 1 && eval_every >= 1, "checkpoint/eval cadence must be positive");
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "resolution = " << resolution << "\n";
    os << "payload_depth = " << payload_depth << "\n";
    os << "latent_dim = " << latent_dim << "\n";
    os << "lambda1 = " << lambda1 << "\n";
    os << "lambda2 = " << lambda2 << "\n";
    os << "alpha = " << alpha << "\n";
    os << "beta = " << beta << "\n";
    os << "delta = " << delta << "\n";
    os << "sigma_train = " << sigma_train << "\n";
    os << "sigma_test = " << sigma_test << "\n";
    os << "seed = " << seed << "\n";
    os << "gen_channels = " << gen_channels << "\n";
    os << "gen_channel_min = " << gen_channel_min << "\n";
    os << "ext_width = " << ext_width << "\n";
    os << "disc_channels = " << disc_channels << "\n";
    os << "disc_channel_max = " << disc_channel_max << "\n";
    os << "stega_channels = " << stega_channels << "\n";
    os << "stega_channel_max = " << stega_channel_max << "\n";
    os << "batch_size = " << batch_size << "\n";
    os << "steps = " << steps << "\n";
    os << "lr = " << lr << "\n";
    os << "adam_beta1 = " << adam_beta1 << "\n";
    os << "adam_beta2 = " << adam_beta2 << "\n";
    os << "adam_eps = " << adam_eps << "\n";
    os << "reg_interval = " << reg_interval << "\n";
    os << "pl_decay = " << pl_decay << "\n";
    os << "p_init = " << p_init << "\n";
    os << "adv_loss = " << adv_loss << "\n";
    os << "loss_e_mode = " << loss_e_mode << "\n";
    os << "use_hgd = " << (use_hgd ? "true" : "false") << "\n";
    os << "use_filter = " << (use_filter ? "true" : "false") << "\n";
    os << "use_steganalyzer = " << (use_steganalyzer ? "true" : "false") << "\n";
    os << "checkpoint_every = " << checkpoint_every << "\n";
    os << "eval_every = " << eval_every << "\n";
    return os.str();
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        GSN_CHECK(eq != std::string::npos, "config line " << lineno << " has no '=': " << line);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        GSN_CHECK(!key.empty(), "config line " << lineno << " has empty key");
        cfg.set(key, value);
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    GSN_CHECK(f.good(), "cannot open config file " << path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
}

void RunConfig::save(const std::string& path) const {
    std::ofstream f(path);
    GSN_CHECK(f.good(), "cannot write config file " << path);
    f << to_text();
    GSN_CHECK(f.good(), "write failed for config file " << path);
}

}  // namespace gsn
