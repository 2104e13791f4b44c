#pragma once

#include "stockloss/backtest.hpp"
#include "stockloss/model.hpp"

namespace stockloss {

struct TrainConfig {
    int epochs = 100;          // 0 = keep the best initialization untouched
    double learning_rate = 0.001;
    int batch_size = 32;
    int n_restarts = 10;
    LossConfig loss;
    bool parallel_restarts = true;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;      // mean of batch mean-losses
    double val_profit_pct = 0.0;  // backtest of the current params, validation year
};

struct RestartOutcome {
    int restart = 0;
    bool aborted = false;         // non-finite loss or parameters mid-training
    double val_profit_pct = 0.0;
    ModelParams params;
    std::vector<EpochStats> history;
};

struct TrainResult {
    ModelParams best_params;
    int best_restart = 0;
    std::vector<EpochStats> history;     // the winning restart's history
    std::vector<RestartOutcome> restarts;
    NormStats norm;
};

// Mean/std per (stock, feature) over days [0, last_day]; std floored at
// 1e-12 so constant features standardize to zero rather than dividing by 0.
NormStats compute_norm_stats(const FeaturePanel& panel, std::size_t last_day);

// Fills `out` with the standardized lookback block ending at day t
// (t - seq_len + 1 .. t), day-major like the model expects.
void make_window(const FeaturePanel& panel, std::size_t t, const ModelConfig& cfg,
                 const NormStats& norm, std::vector<double>& out);

// Next-step signal at decision day t: price differences or return
// differences between days t+1 and t, per the configured source.
SignalDelta signal_delta_at(const FeaturePanel& panel, std::size_t t, SignalSource src);

// One allocation per day of [range.first, range.last - 1], each from a model
// forward pass over the full-panel window ending that day.
std::vector<AllocationDecision> decide_range(const FeaturePanel& panel, DayRange range,
                                             const ModelParams& params,
                                             const NormStats& norm,
                                             double epsilon_floor = kDefaultEpsilonFloor);

// Backtests the decisions of `range` against its slice of the panel.
double backtest_range_profit(const FeaturePanel& panel, DayRange range,
                             const ModelParams& params, const NormStats& norm,
                             const BacktestConfig& bcfg);

// Trains n_restarts models on samples whose target day falls before the
// validation year (= test_year - 1), Adam with mean-reduced shuffled
// mini-batches, and keeps the restart with the highest final validation
// profit (ties go to the lowest restart index). Deterministic for a fixed
// seed, with or without parallel restarts. Rows after the validation year
// are never touched.
TrainResult train(const FeaturePanel& panel, const SplitSpec& split_spec,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const BacktestConfig& backtest_cfg = {});

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace stockloss
