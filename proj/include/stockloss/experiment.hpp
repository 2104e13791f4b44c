#pragma once

#include "stockloss/synth.hpp"
#include "stockloss/train.hpp"

namespace stockloss {

struct SynthSpec {
    int n_stocks = 10;
    int n_days = 1305;
    Date start{1994, 1, 3};
    // Broadcast rules: empty = all zero (start_price: all drawn), one value =
    // every stock, otherwise one value per stock.
    std::vector<double> drift;
    std::vector<double> vol;
    std::vector<double> start_price;

    std::vector<StockRegime> regimes() const;
};

struct ExperimentConfig {
    int schema_version = 1;
    std::uint64_t seed = 7;
    std::string out_dir;
    bool use_synth = true;
    std::string csv_path;
    SynthSpec synth;
    SplitSpec split{0};
    ModelConfig model;  // n_stocks resolved from the panel at run time
    TrainConfig train_cfg;
    BacktestConfig backtest;
};

// `key = value` lines, `#` starts a comment, unknown keys are errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical echo: fixed key order, resolved per-stock lists, no comments.
// parse_config_text(serialize_config(c)) reproduces c.
std::string serialize_config(const ExperimentConfig& cfg);

struct ExperimentResult {
    TrainResult training;
    double test_profit_pct = 0.0;
    double buy_and_hold_pct = 0.0;
    std::vector<double> restart_test_profits;  // NaN for aborted restarts
};

// Full pipeline: panel (synth or CSV), train with restarts, test-year
// backtest of every restart and of the winner. Writes config.echo,
// checkpoint, history.csv, restart_profits.csv, ledger.csv and summary.txt
// into out_dir; nothing is written until the inputs have validated.
// Byte-identical outputs for identical configs.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace stockloss
