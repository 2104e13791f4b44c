#include "stockloss/backtest.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "stockloss/stats.hpp"

namespace stockloss {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double direction_factor(TradeDirection d) {
    switch (d) {
        case TradeDirection::Buy: return 1.0;
        case TradeDirection::Short: return -1.0;
        case TradeDirection::Flat: return 0.0;
    }
    return 0.0;
}

}  // namespace

BacktestLedger run_backtest(const FeaturePanel& panel,
                            const std::vector<AllocationDecision>& decisions,
                            const BacktestConfig& cfg) {
    if (cfg.initial_budget <= 0.0)
        throw std::invalid_argument("BacktestConfig: initial_budget must be > 0");
    if (cfg.transaction_cost_bps < 0.0)
        throw std::invalid_argument("BacktestConfig: transaction_cost_bps must be >= 0");
    const std::size_t n_days = panel.n_days();
    const std::size_t n = panel.n_stocks();
    if (n_days < 2) throw std::invalid_argument("run_backtest: panel needs >= 2 days");
    if (decisions.size() != n_days - 1)
        throw std::invalid_argument("run_backtest: need one decision per day except the last");

    for (const AllocationDecision& d : decisions) {
        if (d.fractions.size() != n || d.directions.size() != n)
            throw std::invalid_argument("run_backtest: decision width does not match panel");
        double total = d.hold_fraction;
        for (double f : d.fractions) {
            if (f < 0.0 || !std::isfinite(f))
                throw std::invalid_argument("run_backtest: bad fraction");
            total += f;
        }
        if (std::abs(total - 1.0) > 1e-6)
            throw std::invalid_argument("run_backtest: fractions do not partition the budget");
    }

    BacktestLedger ledger;
    const std::size_t n_steps = n_days - 1;
    ledger.daily_capital.reserve(n_steps + 1);
    ledger.daily_capital.push_back(cfg.initial_budget);
    ledger.per_day_stock_pnl.assign(n_steps, std::vector<double>(n, 0.0));
    ledger.gross_pnl.assign(n_steps, 0.0);
    ledger.cost.assign(n_steps, 0.0);

    double capital = cfg.initial_budget;
    for (std::size_t t = 0; t < n_steps; ++t) {
        const AllocationDecision& dec = decisions[t];
        double gross = 0.0;
        double traded = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double p0 = panel.at(t, s, Feature::Price);
            const double p1 = panel.at(t + 1, s, Feature::Price);
            if (p0 <= 0.0 || p1 <= 0.0)
                throw std::runtime_error("run_backtest: non-positive price at step " +
                                         std::to_string(t));
            const double pnl = dec.fractions[s] * direction_factor(dec.directions[s]) *
                               (p1 - p0) / p0;
            ledger.per_day_stock_pnl[t][s] = pnl;
            gross += pnl;
            traded += dec.fractions[s];
        }
        const double day_cost = cfg.transaction_cost_bps / 1e4 * traded;
        ledger.gross_pnl[t] = gross;
        ledger.cost[t] = day_cost;
        if (cfg.compounding)
            capital *= 1.0 + gross - day_cost;
        else
            capital += cfg.initial_budget * (gross - day_cost);
        ledger.daily_capital.push_back(capital);
    }
    ledger.profit_pct = (capital - cfg.initial_budget) / cfg.initial_budget * 100.0;
    return ledger;
}

double buy_and_hold(const FeaturePanel& panel) {
    if (panel.n_days() < 2)
        throw std::invalid_argument("buy_and_hold: panel needs >= 2 days");
    double first = 0.0, last = 0.0;
    for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
        first += panel.at(0, s, Feature::Price);
        last += panel.at(panel.n_days() - 1, s, Feature::Price);
    }
    return (last - first) / first * 100.0;
}

void write_ledger_csv(const BacktestLedger& ledger, const FeaturePanel& panel,
                      const std::string& path) {
    const std::size_t n_steps = ledger.gross_pnl.size();
    if (panel.n_days() != n_steps + 1)
        throw std::invalid_argument("write_ledger_csv: panel does not match ledger");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "day,date,capital,gross_pnl,cost\n";
    for (std::size_t t = 0; t < n_steps; ++t) {
        out << (t + 1) << ',' << format_date(panel.dates[t]) << ','
            << fmt17(ledger.daily_capital[t + 1]) << ',' << fmt17(ledger.gross_pnl[t])
            << ',' << fmt17(ledger.cost[t]) << '\n';
    }
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

void write_summary(const BacktestLedger& ledger, double buy_and_hold_pct,
                   const BacktestConfig& cfg, const std::string& path) {
    std::vector<double> net(ledger.gross_pnl.size());
    for (std::size_t t = 0; t < net.size(); ++t)
        net[t] = ledger.gross_pnl[t] - ledger.cost[t];
    double peak = ledger.daily_capital.empty() ? 0.0 : ledger.daily_capital[0];
    double max_dd = 0.0;
    for (double c : ledger.daily_capital) {
        peak = std::max(peak, c);
        if (peak > 0.0) max_dd = std::max(max_dd, (peak - c) / peak);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "profit_pct " << fmt17(ledger.profit_pct) << '\n';
    out << "buy_and_hold_pct " << fmt17(buy_and_hold_pct) << '\n';
    out << "initial_budget " << fmt17(ledger.daily_capital.front()) << '\n';
    out << "final_capital " << fmt17(ledger.daily_capital.back()) << '\n';
    out << "n_steps " << ledger.gross_pnl.size() << '\n';
    out << "compounding " << (cfg.compounding ? 1 : 0) << '\n';
    out << "transaction_cost_bps " << fmt17(cfg.transaction_cost_bps) << '\n';
    out << "max_drawdown_pct " << fmt17(max_dd * 100.0) << '\n';
    out << "daily_net_pnl_mean " << fmt17(net.empty() ? 0.0 : mean(net)) << '\n';
    out << "daily_net_pnl_std " << fmt17(sample_std(net)) << '\n';
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace stockloss
