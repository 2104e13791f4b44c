#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "stockloss/synth.hpp"
#include "stockloss/train.hpp"

using namespace stockloss;

namespace {

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i]))
            return false;
    return true;
}

// Two deterministic monotone stocks covering 1994-1996: one grinds up,
// one grinds down, no noise.
FeaturePanel trend_panel() {
    std::vector<StockRegime> regimes = {
        StockRegime{0.004, 0.0, 100.0},
        StockRegime{-0.004, 0.0, 100.0},
    };
    return synth_market(2, 540, 9, regimes);
}

ModelConfig tiny_model(const FeaturePanel& panel) {
    ModelConfig cfg;
    cfg.architecture = Architecture::Linear;
    cfg.seq_len = 4;
    cfg.n_stocks = static_cast<int>(panel.n_stocks());
    cfg.n_features = 8;
    cfg.seed = 21;
    return cfg;
}

TrainConfig tiny_train(LossVariant v, bool smooth) {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 32;
    cfg.n_restarts = 2;
    cfg.loss.variant = v;
    cfg.loss.smooth = smooth;
    cfg.loss.signal_source = SignalSource::Price;
    return cfg;
}

}  // namespace

TEST_CASE("compute_norm_stats: moments over the requested prefix only") {
    const FeaturePanel panel = trend_panel();
    const std::size_t last = 9;  // days 0..9
    const NormStats norm = compute_norm_stats(panel, last);
    REQUIRE(norm.mean.size() == panel.n_stocks() * kNumFeatures);
    REQUIRE(norm.std_dev.size() == norm.mean.size());

    // Hand-computed population moments for (stock 1, Price).
    double sum = 0.0;
    for (std::size_t t = 0; t <= last; ++t) sum += panel.at(t, 1, Feature::Price);
    const double mean = sum / 10.0;
    double var = 0.0;
    for (std::size_t t = 0; t <= last; ++t) {
        const double d = panel.at(t, 1, Feature::Price) - mean;
        var += d * d;
    }
    var /= 10.0;
    const std::size_t idx = 1 * kNumFeatures + Feature::Price;
    CHECK(norm.mean[idx] == doctest::Approx(mean).epsilon(1e-14));
    CHECK(norm.std_dev[idx] == doctest::Approx(std::sqrt(var)).epsilon(1e-12));

    // Constant features get the floor, not a zero divider.
    const std::size_t shares_idx = 0 * kNumFeatures + Feature::SharesOutstanding;
    CHECK(norm.std_dev[shares_idx] == 1e-12);

    CHECK_THROWS_AS(compute_norm_stats(panel, panel.n_days()),
                    std::invalid_argument);
}

TEST_CASE("make_window: day-major layout ending at the decision day") {
    const FeaturePanel panel = trend_panel();
    ModelConfig cfg = tiny_model(panel);
    NormStats identity;
    identity.mean.assign(panel.n_stocks() * kNumFeatures, 0.0);
    identity.std_dev.assign(panel.n_stocks() * kNumFeatures, 1.0);

    std::vector<double> window;
    const std::size_t t = 10;
    make_window(panel, t, cfg, identity, window);
    REQUIRE(window.size() == static_cast<std::size_t>(cfg.input_dim()));
    for (int tt = 0; tt < cfg.seq_len; ++tt) {
        for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
            for (int f = 0; f < kNumFeatures; ++f) {
                const std::size_t w_idx =
                    (static_cast<std::size_t>(tt) * panel.n_stocks() + s) *
                        kNumFeatures +
                    static_cast<std::size_t>(f);
                CHECK(window[w_idx] ==
                      panel.at(t - cfg.seq_len + 1 + tt, s, f));
            }
        }
    }

    // Standardization applies (x - mean) / std elementwise.
    const NormStats norm = compute_norm_stats(panel, 20);
    make_window(panel, t, cfg, norm, window);
    const std::size_t idx = 0 * kNumFeatures + Feature::Price;
    const double raw = panel.at(t, 0, Feature::Price);
    const std::size_t w_last =
        (static_cast<std::size_t>(cfg.seq_len - 1) * panel.n_stocks() + 0) *
        kNumFeatures + Feature::Price;
    CHECK(window[w_last] ==
          doctest::Approx((raw - norm.mean[idx]) / norm.std_dev[idx]).epsilon(1e-14));

    CHECK_THROWS_AS(make_window(panel, 2, cfg, identity, window),
                    std::invalid_argument);  // not enough lookback
}

TEST_CASE("signal_delta_at: price and return differences to the next day") {
    const FeaturePanel panel = trend_panel();
    const std::size_t t = 30;
    const SignalDelta price = signal_delta_at(panel, t, SignalSource::Price);
    const SignalDelta ret = signal_delta_at(panel, t, SignalSource::Return);
    REQUIRE(price.deltas.size() == 2);
    for (std::size_t s = 0; s < 2; ++s) {
        CHECK(price.deltas[s] ==
              panel.at(t + 1, s, Feature::Price) - panel.at(t, s, Feature::Price));
        CHECK(ret.deltas[s] ==
              panel.at(t + 1, s, Feature::Return) - panel.at(t, s, Feature::Return));
    }
    CHECK_THROWS_AS(signal_delta_at(panel, panel.n_days() - 1, SignalSource::Price),
                    std::invalid_argument);
}

TEST_CASE("decide_range: one valid allocation per tradable day") {
    const FeaturePanel panel = trend_panel();
    const ModelConfig cfg = tiny_model(panel);
    const ModelParams params = init_params(cfg);
    const NormStats norm = compute_norm_stats(panel, 99);
    const DayRange range{100, 120};
    const std::vector<AllocationDecision> decisions =
        decide_range(panel, range, params, norm);
    REQUIRE(decisions.size() == 20);
    for (const AllocationDecision& d : decisions) {
        double total = d.hold_fraction;
        for (double f : d.fractions) {
            CHECK(f >= 0.0);
            total += f;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
    // Spot-check one day against a manual forward pass.
    std::vector<double> window;
    make_window(panel, 107, cfg, norm, window);
    const AllocationDecision manual = allocate(forward(params, window));
    CHECK(manual.fractions == decisions[7].fractions);
    CHECK(manual.directions == decisions[7].directions);
}

TEST_CASE("train: bit-identical across runs and across the parallel switch") {
    const FeaturePanel panel = trend_panel();
    const ModelConfig mcfg = tiny_model(panel);
    TrainConfig tcfg = tiny_train(LossVariant::StockLoss, true);

    const TrainResult a = train(panel, SplitSpec{1996}, mcfg, tcfg);
    const TrainResult b = train(panel, SplitSpec{1996}, mcfg, tcfg);
    CHECK(a.best_restart == b.best_restart);
    CHECK(bit_equal(a.best_params.values, b.best_params.values));
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].val_profit_pct == b.history[i].val_profit_pct);
    }

    tcfg.parallel_restarts = false;
    const TrainResult c = train(panel, SplitSpec{1996}, mcfg, tcfg);
    CHECK(a.best_restart == c.best_restart);
    CHECK(bit_equal(a.best_params.values, c.best_params.values));

    // Restart streams are decorrelated: different restarts, different params.
    REQUIRE(a.restarts.size() == 2);
    CHECK_FALSE(bit_equal(a.restarts[0].params.values, a.restarts[1].params.values));
}

TEST_CASE("train: epochs=0 picks the best raw initialization") {
    const FeaturePanel panel = trend_panel();
    const ModelConfig mcfg = tiny_model(panel);
    TrainConfig tcfg = tiny_train(LossVariant::StockLoss, true);
    tcfg.epochs = 0;
    tcfg.n_restarts = 3;
    const TrainResult r = train(panel, SplitSpec{1996}, mcfg, tcfg);
    CHECK(r.history.empty());
    REQUIRE(r.restarts.size() == 3);
    double best = -1e300;
    int best_idx = -1;
    for (const RestartOutcome& o : r.restarts) {
        CHECK(o.history.empty());
        CHECK_FALSE(o.aborted);
        if (o.val_profit_pct > best) {
            best = o.val_profit_pct;
            best_idx = o.restart;
        }
    }
    CHECK(r.best_restart == best_idx);
    CHECK(bit_equal(r.best_params.values,
                    r.restarts[static_cast<std::size_t>(best_idx)].params.values));
}

TEST_CASE("train: learns to buy the riser and short the faller") {
    const FeaturePanel panel = trend_panel();
    const ModelConfig mcfg = tiny_model(panel);
    TrainConfig tcfg = tiny_train(LossVariant::StockLoss, true);
    tcfg.epochs = 80;
    tcfg.learning_rate = 0.05;
    tcfg.n_restarts = 2;
    const TrainResult r = train(panel, SplitSpec{1996}, mcfg, tcfg);

    // Loss should drop over training on this deterministic market.
    REQUIRE(r.history.size() == 80);
    CHECK(r.history.back().train_loss < r.history.front().train_loss);

    // Decisions over the validation year: weight on (Buy riser, Short faller).
    const auto val = year_range(panel, 1995);
    REQUIRE(val.has_value());
    const std::vector<AllocationDecision> decisions =
        decide_range(panel, *val, r.best_params, r.norm);
    double correct = 0.0;
    for (const AllocationDecision& d : decisions) {
        if (d.directions[0] == TradeDirection::Buy) correct += d.fractions[0];
        if (d.directions[1] == TradeDirection::Short) correct += d.fractions[1];
    }
    correct /= static_cast<double>(decisions.size());
    CHECK(correct > 0.9);

    // And the validation-year backtest should beat doing nothing.
    CHECK(r.history.back().val_profit_pct > 0.0);
}

TEST_CASE("train: input validation") {
    const FeaturePanel panel = trend_panel();
    const ModelConfig mcfg = tiny_model(panel);
    TrainConfig tcfg = tiny_train(LossVariant::StockLoss, true);

    TrainConfig bad = tcfg;
    bad.epochs = -1;
    CHECK_THROWS_AS(train(panel, SplitSpec{1996}, mcfg, bad), std::invalid_argument);
    bad = tcfg;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(train(panel, SplitSpec{1996}, mcfg, bad), std::invalid_argument);
    bad = tcfg;
    bad.batch_size = 0;
    CHECK_THROWS_AS(train(panel, SplitSpec{1996}, mcfg, bad), std::invalid_argument);
    bad = tcfg;
    bad.n_restarts = 0;
    CHECK_THROWS_AS(train(panel, SplitSpec{1996}, mcfg, bad), std::invalid_argument);

    ModelConfig wrong = mcfg;
    wrong.n_stocks = 5;
    CHECK_THROWS_AS(train(panel, SplitSpec{1996}, wrong, tcfg), std::invalid_argument);
    wrong = mcfg;
    wrong.n_features = 4;
    CHECK_THROWS_AS(train(panel, SplitSpec{1996}, wrong, tcfg), std::invalid_argument);

    // 1995 as test year leaves no training data before the validation year.
    CHECK_THROWS_AS(train(panel, SplitSpec{1995}, mcfg, tcfg), std::runtime_error);
    CHECK_THROWS_AS(train(panel, SplitSpec{2005}, mcfg, tcfg), std::runtime_error);

    ModelConfig deep = mcfg;
    deep.seq_len = 400;  // validation windows would reach before day 0
    CHECK_THROWS_AS(train(panel, SplitSpec{1996}, deep, tcfg), std::runtime_error);
}

TEST_CASE("train: a divergent restart is dropped, all-divergent throws") {
    const FeaturePanel panel = trend_panel();
    const ModelConfig mcfg = tiny_model(panel);
    TrainConfig tcfg = tiny_train(LossVariant::StockLoss, true);
    tcfg.learning_rate = 1e308;  // Adam steps of ~1e308 overflow parameters
    tcfg.epochs = 3;
    tcfg.n_restarts = 1;
    CHECK_THROWS_AS(train(panel, SplitSpec{1996}, mcfg, tcfg), std::runtime_error);
}
