#pragma once

#include "gsn/tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace gsn {

/// Run configuration. Serialized as flat `key = value` lines; keys match
/// field names exactly. validate() enforces the structural invariants.
struct RunConfig {
    // Problem geometry
    Index resolution = 32;     // output H = W, power of two
    Index payload_depth = 1;   // B, channels of the secret tensor (bpp)
    Index latent_dim = 128;

    // Loss weights and noise scales
    double lambda1 = 1.0;      // L_steg weight in the generator loss
    double lambda2 = 1.0;      // path-length regularizer weight
    double alpha = 1.0;        // R1 term weight in the discriminator loss
    double beta = 10.0;        // constant inside R1
    double delta = 10.0;       // hierarchical gradient decay base
    double sigma_train = 1.0;  // cover-mode merge noise during training
    double sigma_test = 0.1;   // cover-mode merge noise at evaluation

    std::uint64_t seed = 1;

    // Network widths
    Index gen_channels = 128;      // learned constant input channels (at 4x4)
    Index gen_channel_min = 16;    // floor when halving per upsample
    Index ext_width = 64;          // extractor block width
    Index disc_channels = 16;      // discriminator width at full resolution
    Index disc_channel_max = 128;  // cap when doubling per downsample
    Index stega_channels = 16;     // steganalyzer early-stage width
    Index stega_channel_max = 64;  // steganalyzer late-stage width

    // Optimization
    Index batch_size = 16;  // m, cover/stego pairs per step
    Index steps = 20000;
    double lr = 2e-3;
    double adam_beta1 = 0.0;
    double adam_beta2 = 0.99;
    double adam_eps = 1e-8;
    Index reg_interval = 4;  // lazy R1 / path-length cadence
    double pl_decay = 0.99;  // EMA decay for the path-length mean
    double p_init = 0.1;     // initial merge strength

    // Mode switches
    std::string adv_loss = "nonsat";        // "nonsat" | "literal"
    std::string loss_e_mode = "two_sided";  // "two_sided" | "one_sided"
    bool use_hgd = true;
    bool use_filter = true;
    bool use_steganalyzer = true;

    // Run plumbing
    Index checkpoint_every = 1000;
    Index eval_every = 500;

    void validate() const;

    Index capacity_bits() const { return payload_depth * resolution * resolution; }

    std::string to_text() const;
    static RunConfig from_text(const std::string& text);
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;

    /// Apply a single `key = value` assignment. Unknown keys or malformed
    /// values are rejected naming the key.
    void set(const std::string& key, const std::string& value);

    bool operator==(const RunConfig&) const = default;
};

}  // namespace gsn
