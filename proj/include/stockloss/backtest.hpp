#pragma once

#include "stockloss/alloc.hpp"
#include "stockloss/panel.hpp"

namespace stockloss {

struct BacktestConfig {
    double initial_budget = 1000.0;
    bool compounding = true;           // false: each day stakes the initial budget
    double transaction_cost_bps = 0.0; // charged on the traded fraction, per day
};

struct BacktestLedger {
    std::vector<double> daily_capital;               // n_steps + 1, [0] = budget
    std::vector<std::vector<double>> per_day_stock_pnl;  // n_steps x n_stocks, relative
    std::vector<double> gross_pnl;                   // n_steps, sum over stocks
    std::vector<double> cost;                        // n_steps
    double profit_pct = 0.0;
};

// Daily full rebalance: the day-t decision earns
// fraction_i * dir_i * (P_{t+1} - P_t) / P_t per stock (dir: Buy +1,
// Short -1, Flat 0), the hold fraction earns nothing, and the last panel day
// produces no trade. Expects one decision per panel day except the last.
BacktestLedger run_backtest(const FeaturePanel& panel,
                            const std::vector<AllocationDecision>& decisions,
                            const BacktestConfig& cfg);

// One share of each stock, bought on the first day and sold on the last:
// (sum_i P_last - sum_i P_first) / sum_i P_first * 100.
double buy_and_hold(const FeaturePanel& panel);

// CSV rows `day,date,capital,gross_pnl,cost`, one per trading step; date is
// the decision day, capital the level after that day settles.
void write_ledger_csv(const BacktestLedger& ledger, const FeaturePanel& panel,
                      const std::string& path);

// Key-value text lines: profit, baseline, drawdown, and daily PnL moments.
void write_summary(const BacktestLedger& ledger, double buy_and_hold_pct,
                   const BacktestConfig& cfg, const std::string& path);

}  // namespace stockloss
