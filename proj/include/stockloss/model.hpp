#pragma once

#include <cstdint>
#include <string>

#include "stockloss/loss.hpp"

namespace stockloss {

enum class Architecture { Linear, MLP };

struct ModelConfig {
    Architecture architecture = Architecture::Linear;
    int hidden_width = 16;  // ignored for Linear
    int seq_len = 96;
    int n_stocks = 0;
    int n_features = 8;
    bool use_hold = false;
    std::uint64_t seed = 0;

    int input_dim() const { return seq_len * n_stocks * n_features; }
    int output_dim() const { return n_stocks + (use_hold ? 1 : 0); }
    std::size_t param_count() const;
};

// Flat parameter vector. Linear layout: W (out x in, row-major), b (out).
// MLP layout: W1 (hidden x in), b1 (hidden), W2 (out x hidden), b2 (out);
// hidden activation tanh.
struct ModelParams {
    ModelConfig cfg;
    std::vector<double> values;
};

// Seeded uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer.
ModelParams init_params(const ModelConfig& cfg);

// Window is the flattened lookback block, laid out day-major:
// index (t * n_stocks + s) * n_features + f, t oldest first.
OutputVector forward(const ModelParams& params, const std::vector<double>& window);

// Loss value and d(loss)/d(params) via the chain rule through the analytic
// loss gradient. Output layout matches ModelParams::values.
struct BackwardResult {
    double loss = 0.0;
    std::vector<double> grad;
};
BackwardResult backward(const ModelParams& params, const std::vector<double>& window,
                        const SignalDelta& delta, const LossConfig& loss_cfg);

// Per-(stock, feature) standardization statistics, laid out s * n_features + f.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> std_dev;  // floored away from zero
};

struct Checkpoint {
    ModelParams params;
    NormStats norm;
};

// Versioned text container; numbers stored as hex floats so the round trip
// is bit-exact. Writes go to a temp file renamed into place.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

const char* to_string(Architecture a);
std::optional<Architecture> parse_architecture(std::string_view s);

}  // namespace stockloss
