#include "stockloss/train.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace stockloss {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

NormStats compute_norm_stats(const FeaturePanel& panel, std::size_t last_day) {
    if (last_day >= panel.n_days())
        throw std::invalid_argument("compute_norm_stats: last_day out of range");
    const std::size_t n = panel.n_stocks();
    NormStats st;
    st.mean.assign(n * kNumFeatures, 0.0);
    st.std_dev.assign(n * kNumFeatures, 0.0);
    const double count = static_cast<double>(last_day + 1);
    for (std::size_t s = 0; s < n; ++s) {
        for (int f = 0; f < kNumFeatures; ++f) {
            double acc = 0.0;
            for (std::size_t t = 0; t <= last_day; ++t) acc += panel.at(t, s, f);
            const double m = acc / count;
            double var = 0.0;
            for (std::size_t t = 0; t <= last_day; ++t) {
                const double d = panel.at(t, s, f) - m;
                var += d * d;
            }
            st.mean[s * kNumFeatures + f] = m;
            st.std_dev[s * kNumFeatures + f] = std::max(std::sqrt(var / count), 1e-12);
        }
    }
    return st;
}

void make_window(const FeaturePanel& panel, std::size_t t, const ModelConfig& cfg,
                 const NormStats& norm, std::vector<double>& out) {
    const std::size_t n = panel.n_stocks();
    if (static_cast<std::size_t>(cfg.n_stocks) != n || cfg.n_features != kNumFeatures)
        throw std::invalid_argument("make_window: model shape does not match panel");
    const std::size_t seq = static_cast<std::size_t>(cfg.seq_len);
    if (t + 1 < seq || t >= panel.n_days())
        throw std::invalid_argument("make_window: not enough lookback before day");
    out.resize(seq * n * kNumFeatures);
    std::size_t k = 0;
    for (std::size_t tt = t + 1 - seq; tt <= t; ++tt)
        for (std::size_t s = 0; s < n; ++s)
            for (int f = 0; f < kNumFeatures; ++f) {
                const std::size_t sf = s * kNumFeatures + static_cast<std::size_t>(f);
                out[k++] = (panel.at(tt, s, f) - norm.mean[sf]) / norm.std_dev[sf];
            }
}

SignalDelta signal_delta_at(const FeaturePanel& panel, std::size_t t, SignalSource src) {
    if (t + 1 >= panel.n_days())
        throw std::invalid_argument("signal_delta_at: day t+1 not in panel");
    SignalDelta d;
    d.deltas.resize(panel.n_stocks());
    const int f = src == SignalSource::Price ? Feature::Price : Feature::Return;
    for (std::size_t s = 0; s < panel.n_stocks(); ++s)
        d.deltas[s] = panel.at(t + 1, s, f) - panel.at(t, s, f);
    return d;
}

std::vector<AllocationDecision> decide_range(const FeaturePanel& panel, DayRange range,
                                             const ModelParams& params,
                                             const NormStats& norm,
                                             double epsilon_floor) {
    if (range.last >= panel.n_days() || range.first >= range.last)
        throw std::invalid_argument("decide_range: need at least two days in range");
    std::vector<AllocationDecision> out;
    out.reserve(range.last - range.first);
    std::vector<double> window;
    for (std::size_t t = range.first; t < range.last; ++t) {
        make_window(panel, t, params.cfg, norm, window);
        out.push_back(allocate(forward(params, window), epsilon_floor));
    }
    return out;
}

double backtest_range_profit(const FeaturePanel& panel, DayRange range,
                             const ModelParams& params, const NormStats& norm,
                             const BacktestConfig& bcfg) {
    const std::vector<AllocationDecision> dec = decide_range(panel, range, params, norm);
    return run_backtest(slice(panel, range), dec, bcfg).profit_pct;
}

namespace {

struct AdamState {
    std::vector<double> m, v;
    long long step = 0;
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void update(std::vector<double>& params, const std::vector<double>& grad, double lr) {
        ++step;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
        }
    }
};

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

struct TrainContext {
    const FeaturePanel& panel;
    const ModelConfig& mcfg;
    const TrainConfig& tcfg;
    const BacktestConfig& bcfg;
    const NormStats& norm;
    std::vector<std::size_t> sample_days;        // decision days of training samples
    std::vector<SignalDelta> sample_deltas;      // aligned with sample_days
    DayRange val_range;
};

RestartOutcome run_restart(const TrainContext& ctx, int restart, std::uint64_t seed) {
    RestartOutcome out;
    out.restart = restart;

    ModelConfig cfg = ctx.mcfg;
    cfg.seed = seed;
    ModelParams params = init_params(cfg);
    std::mt19937_64 shuffle_rng(splitmix64(seed ^ 0xD1B54A32D192ED03ULL));

    AdamState adam(params.values.size());
    std::vector<double> grad_sum(params.values.size());
    std::vector<double> window;
    std::vector<std::size_t> order(ctx.sample_days.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    const std::size_t batch = static_cast<std::size_t>(ctx.tcfg.batch_size);
    try {
    for (int epoch = 1; epoch <= ctx.tcfg.epochs && !out.aborted; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_acc = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size() && !out.aborted; start += batch) {
            const std::size_t end = std::min(start + batch, order.size());
            const double bsz = static_cast<double>(end - start);
            std::fill(grad_sum.begin(), grad_sum.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t j = start; j < end; ++j) {
                const std::size_t ix = order[j];
                make_window(ctx.panel, ctx.sample_days[ix], cfg, ctx.norm, window);
                const BackwardResult br =
                    backward(params, window, ctx.sample_deltas[ix], ctx.tcfg.loss);
                if (!std::isfinite(br.loss)) {
                    out.aborted = true;
                    break;
                }
                batch_loss += br.loss;
                for (std::size_t i = 0; i < grad_sum.size(); ++i)
                    grad_sum[i] += br.grad[i];
            }
            if (out.aborted) break;
            for (double& g : grad_sum) g /= bsz;
            adam.update(params.values, grad_sum, ctx.tcfg.learning_rate);
            if (!all_finite(params.values)) {
                out.aborted = true;
                break;
            }
            loss_acc += batch_loss / bsz;
            ++n_batches;
        }
        if (out.aborted) break;
        EpochStats st;
        st.epoch = epoch;
        st.train_loss = loss_acc / static_cast<double>(n_batches);
        st.val_profit_pct =
            backtest_range_profit(ctx.panel, ctx.val_range, params, ctx.norm, ctx.bcfg);
        out.history.push_back(st);
    }

    out.params = std::move(params);
    if (!out.aborted) {
        out.val_profit_pct =
            ctx.tcfg.epochs == 0
                ? backtest_range_profit(ctx.panel, ctx.val_range, out.params, ctx.norm,
                                        ctx.bcfg)
                : out.history.back().val_profit_pct;
    }
    } catch (const std::exception&) {
        // Inputs were validated before the restarts started, so anything thrown
        // here is this restart's own numerics blowing up (e.g. exploding
        // parameters turning activations non-finite). Record the divergence.
        out.aborted = true;
        if (out.params.values.empty()) out.params = std::move(params);
    }
    if (out.aborted) out.val_profit_pct = -std::numeric_limits<double>::infinity();
    return out;
}

}  // namespace

TrainResult train(const FeaturePanel& panel, const SplitSpec& split_spec,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const BacktestConfig& backtest_cfg) {
    validate_panel(panel, nullptr);
    if (train_cfg.epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (train_cfg.learning_rate <= 0.0)
        throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (train_cfg.batch_size < 1)
        throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (train_cfg.n_restarts < 1)
        throw std::invalid_argument("TrainConfig: n_restarts must be >= 1");

    ModelConfig mcfg = model_cfg;
    if (mcfg.n_stocks == 0) mcfg.n_stocks = static_cast<int>(panel.n_stocks());
    if (static_cast<std::size_t>(mcfg.n_stocks) != panel.n_stocks())
        throw std::invalid_argument("train: model n_stocks does not match panel");
    if (mcfg.n_features != kNumFeatures)
        throw std::invalid_argument("train: model n_features must be 8");

    const int val_year = split_spec.test_year - 1;
    const auto val_range = year_range(panel, val_year);
    if (!val_range)
        throw std::runtime_error("train: no data for validation year " +
                                 std::to_string(val_year));
    if (val_range->first == 0)
        throw std::runtime_error("train: no training data before the validation year");
    if (val_range->first + 1 > val_range->last)
        throw std::runtime_error("train: validation year has fewer than two days");
    const std::size_t seq = static_cast<std::size_t>(mcfg.seq_len);
    if (val_range->first + 1 < seq)
        throw std::runtime_error("train: validation windows lack seq_len days of lookback");

    const NormStats norm = compute_norm_stats(panel, val_range->first - 1);

    std::vector<std::size_t> sample_days;
    std::vector<SignalDelta> sample_deltas;
    for (std::size_t t = seq - 1; t + 1 < panel.n_days(); ++t) {
        if (panel.dates[t + 1].y >= val_year) break;
        sample_days.push_back(t);
        sample_deltas.push_back(signal_delta_at(panel, t, train_cfg.loss.signal_source));
    }
    if (sample_days.empty())
        throw std::runtime_error("train: no full training window before the validation year");

    TrainContext context{panel, mcfg, train_cfg, backtest_cfg, norm,
                         std::move(sample_days), std::move(sample_deltas), *val_range};

    const int n_restarts = train_cfg.n_restarts;
    std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(n_restarts));
    auto seed_of = [&](int r) {
        return splitmix64(mcfg.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(r + 1)));
    };
    if (train_cfg.parallel_restarts && n_restarts > 1) {
        std::vector<std::future<RestartOutcome>> futs;
        futs.reserve(static_cast<std::size_t>(n_restarts));
        for (int r = 0; r < n_restarts; ++r)
            futs.push_back(std::async(std::launch::async, run_restart, std::cref(context),
                                      r, seed_of(r)));
        for (int r = 0; r < n_restarts; ++r)
            outcomes[static_cast<std::size_t>(r)] = futs[static_cast<std::size_t>(r)].get();
    } else {
        for (int r = 0; r < n_restarts; ++r)
            outcomes[static_cast<std::size_t>(r)] = run_restart(context, r, seed_of(r));
    }

    int best = -1;
    for (int r = 0; r < n_restarts; ++r) {
        const RestartOutcome& o = outcomes[static_cast<std::size_t>(r)];
        if (o.aborted) continue;
        if (best < 0 ||
            o.val_profit_pct > outcomes[static_cast<std::size_t>(best)].val_profit_pct)
            best = r;
    }
    if (best < 0) throw std::runtime_error("train: every restart diverged");

    TrainResult result;
    result.best_restart = best;
    result.best_params = outcomes[static_cast<std::size_t>(best)].params;
    result.history = outcomes[static_cast<std::size_t>(best)].history;
    result.restarts = std::move(outcomes);
    result.norm = norm;
    return result;
}

}  // namespace stockloss
