#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stockloss/experiment.hpp"
#include "stockloss/stats.hpp"

namespace sl = stockloss;

namespace {

// Relative error with a 1e-4 floor on the reference magnitude, so tiny
// entries are judged on a 1e-9 absolute scale at the 1e-5 threshold.
double grad_err(double analytic, double reference) {
    return std::abs(analytic - reference) / std::max(std::abs(reference), 1e-4);
}

struct GradcheckOptions {
    double gamma = 10.0;
    std::uint64_t seed = 12345;
    int points = 100;
    bool nonsmooth_at_zero = false;
};

int run_gradcheck(const GradcheckOptions& opt) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> mag(0.05, 0.95);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<int> n_dist(2, 6);

    const sl::LossVariant variants[] = {
        sl::LossVariant::StockLoss, sl::LossVariant::StockLossMax,
        sl::LossVariant::StockLossL2, sl::LossVariant::StockLossNorm};
    bool all_ok = true;

    std::printf("%-14s %-9s %-5s %-7s %14s  %s\n", "variant", "mode", "hold",
                "signal", "max_err", "status");
    for (const sl::LossVariant v : variants) {
        for (const bool smooth : {false, true}) {
            for (const bool hold : {false, true}) {
                for (const sl::SignalSource src :
                     {sl::SignalSource::Return, sl::SignalSource::Price}) {
                    sl::LossConfig cfg;
                    cfg.variant = v;
                    cfg.smooth = smooth;
                    cfg.gamma = opt.gamma;
                    cfg.use_hold = hold;
                    cfg.signal_source = src;
                    double worst = 0.0;
                    for (int p = 0; p < opt.points; ++p) {
                        const int n = n_dist(rng);
                        sl::OutputVector o;
                        for (int i = 0; i < n; ++i)
                            o.stock_outputs.push_back(
                                (u01(rng) < 0.5 ? -1.0 : 1.0) * mag(rng));
                        if (hold) o.hold_output = (u01(rng) < 0.5 ? -1.0 : 1.0) * mag(rng);
                        sl::SignalDelta d;
                        const double scale = src == sl::SignalSource::Price ? 5.0 : 0.05;
                        for (int i = 0; i < n; ++i)
                            d.deltas.push_back(scale * (2.0 * u01(rng) - 1.0));
                        const sl::LossEvaluation ev = sl::evaluate_loss(o, d, cfg);
                        const std::vector<double> fd =
                            sl::loss_gradient_fd(sl::evaluate_loss, o, d, cfg, 1e-6);
                        for (std::size_t k = 0; k < fd.size(); ++k)
                            worst = std::max(worst, grad_err(ev.gradient[k], fd[k]));
                    }
                    const bool ok = worst < 1e-5;
                    all_ok = all_ok && ok;
                    std::printf("%-14s %-9s %-5s %-7s %14.3e  %s\n", sl::to_string(v),
                                smooth ? "smooth" : "nonsmooth", hold ? "on" : "off",
                                sl::to_string(src), worst, ok ? "pass" : "FAIL");
                }
            }
        }
    }

    // How far the smooth objective sits from the kinked one when every
    // output is clear of the origin.
    {
        double worst = 0.0;
        for (int p = 0; p < opt.points; ++p) {
            const int n = n_dist(rng);
            sl::OutputVector o;
            sl::SignalDelta d;
            double dsum = 0.0;
            for (int i = 0; i < n; ++i) {
                o.stock_outputs.push_back((u01(rng) < 0.5 ? -1.0 : 1.0) *
                                          (0.85 + 0.1 * u01(rng)));
                d.deltas.push_back(0.05 * (2.0 * u01(rng) - 1.0));
                dsum += std::abs(d.deltas.back());
            }
            sl::LossConfig cfg;
            cfg.gamma = opt.gamma;
            cfg.smooth = false;
            const double v0 = sl::evaluate_loss(o, d, cfg).value;
            cfg.smooth = true;
            const double v1 = sl::evaluate_loss(o, d, cfg).value;
            if (dsum > 0.0) worst = std::max(worst, std::abs(v1 - v0) / dsum);
        }
        std::printf("smoothing gap (|O|>=0.85, per unit of signal): %.3e\n", worst);
    }

    if (opt.nonsmooth_at_zero) {
        // One-sided finite differences either side of O_1 = 0 against the
        // closed-form jump for equal deltas.
        sl::LossConfig cfg;
        cfg.variant = sl::LossVariant::StockLoss;
        sl::SignalDelta d;
        d.deltas = {0.02, 0.02, 0.02, 0.02, 0.02};
        sl::OutputVector plus, minus;
        plus.stock_outputs = {1e-4, 0.3, 0.4, 0.5, 0.6};
        minus.stock_outputs = {-1e-4, 0.3, 0.4, 0.5, 0.6};
        const double gp =
            sl::loss_gradient_fd(sl::evaluate_loss, plus, d, cfg, 1e-5)[0];
        const double gm =
            sl::loss_gradient_fd(sl::evaluate_loss, minus, d, cfg, 1e-5)[0];
        double s = 0.0;
        for (double x : plus.stock_outputs) s += std::abs(x);
        const double expect = 2.0 * d.deltas[0] * (s - 1e-4) / (s * s);
        std::printf("gradient jump across 0: fd %.6e analytic %.6e\n", gp - gm, expect);
    }

    std::printf("gradcheck: %s\n", all_ok ? "all combinations pass" : "FAILURES detected");
    return all_ok ? 0 : 1;
}

std::vector<double> read_restart_test_profits(const std::string& dir) {
    const std::string path = dir + "/restart_profits.csv";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing profit file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) ||
        line != "restart,aborted,val_profit_pct,test_profit_pct")
        throw std::runtime_error("'" + path + "': unexpected header");
    std::vector<double> profits;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string restart, aborted, val, test;
        if (!std::getline(ls, restart, ',') || !std::getline(ls, aborted, ',') ||
            !std::getline(ls, val, ',') || !std::getline(ls, test, ','))
            throw std::runtime_error("'" + path + "': malformed row");
        if (aborted == "1") continue;
        profits.push_back(std::strtod(test.c_str(), nullptr));
    }
    if (profits.empty())
        throw std::runtime_error("'" + path + "': no completed restarts");
    return profits;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"portfolio loss functions, trainable forecaster and backtest engine"};
    app.require_subcommand(1);

    // ---------- synth ----------
    auto* synth = app.add_subcommand("synth", "write a synthetic market panel CSV");
    int s_stocks = 2;
    int s_days = 10;
    std::uint64_t s_seed = 1;
    std::string s_start = "1994-01-03";
    std::string s_drift = "0";
    std::string s_vol = "0.01";
    std::string s_price;
    std::string s_out = "panel.csv";
    synth->add_option("--stocks", s_stocks, "number of stocks")->check(CLI::PositiveNumber);
    synth->add_option("--days", s_days, "number of trading days");
    synth->add_option("--seed", s_seed, "generator seed");
    synth->add_option("--start", s_start, "first calendar date (YYYY-MM-DD)");
    synth->add_option("--drift", s_drift, "per-day drift, one value or comma list");
    synth->add_option("--vol", s_vol, "per-day volatility, one value or comma list");
    synth->add_option("--start-price", s_price, "start prices, one value or comma list");
    synth->add_option("--out", s_out, "output CSV path");

    // ---------- train ----------
    auto* train_cmd = app.add_subcommand("train", "run a full experiment from a config");
    std::string t_config;
    std::string t_out;
    std::int64_t t_seed = -1;
    int t_epochs = -1;
    int t_restarts = -1;
    train_cmd->add_option("--config", t_config, "experiment config file")->required();
    train_cmd->add_option("--out", t_out, "override out_dir");
    train_cmd->add_option("--seed", t_seed, "override seed");
    train_cmd->add_option("--epochs", t_epochs, "override epochs (0 = init only)");
    train_cmd->add_option("--restarts", t_restarts, "override n_restarts");

    // ---------- backtest ----------
    auto* bt = app.add_subcommand("backtest", "backtest a checkpoint on a panel's test year");
    std::string b_ckpt, b_data, b_out = "backtest_out";
    int b_year = 0;
    double b_budget = 1000.0;
    double b_cost = 0.0;
    bool b_additive = false;
    bt->add_option("--checkpoint", b_ckpt, "checkpoint file")->required();
    bt->add_option("--data", b_data, "panel CSV")->required();
    bt->add_option("--test-year", b_year, "test year")->required();
    bt->add_option("--out", b_out, "output directory");
    bt->add_option("--budget", b_budget, "initial budget");
    bt->add_option("--cost-bps", b_cost, "transaction cost in basis points");
    bt->add_flag("--additive", b_additive, "stake the initial budget daily instead of compounding");

    // ---------- gradcheck ----------
    auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of every loss variant");
    GradcheckOptions gopt;
    gc->add_option("--gamma", gopt.gamma, "sign-proxy sharpness")->check(CLI::PositiveNumber);
    gc->add_option("--seed", gopt.seed, "sampling seed");
    gc->add_option("--points", gopt.points, "points per combination")->check(CLI::PositiveNumber);
    gc->add_flag("--include-nonsmooth-at-zero", gopt.nonsmooth_at_zero,
                 "also report the gradient jump across 0");

    // ---------- compare ----------
    auto* cmp = app.add_subcommand("compare", "rank-test restart profits across run dirs");
    std::vector<std::string> cmp_dirs;
    cmp->add_option("dirs", cmp_dirs, "run directories (>= 2)")->expected(-2);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            sl::SynthSpec spec;
            spec.n_stocks = s_stocks;
            spec.n_days = s_days;
            spec.start = sl::parse_date(s_start);
            auto parse_list = [](const std::string& text) {
                std::vector<double> out;
                std::istringstream in(text);
                std::string tok;
                while (std::getline(in, tok, ',')) out.push_back(std::stod(tok));
                return out;
            };
            spec.drift = parse_list(s_drift);
            spec.vol = parse_list(s_vol);
            if (!s_price.empty()) spec.start_price = parse_list(s_price);
            const sl::FeaturePanel panel =
                sl::synth_market(spec.n_stocks, spec.n_days, s_seed, spec.regimes(),
                                 spec.start);
            sl::save_csv(panel, s_out);
            std::printf("wrote %zu days x %zu stocks to %s\n", panel.n_days(),
                        panel.n_stocks(), s_out.c_str());
            return 0;
        }

        if (train_cmd->parsed()) {
            sl::ExperimentConfig cfg = sl::load_config(t_config);
            if (!t_out.empty()) cfg.out_dir = t_out;
            if (t_seed >= 0) cfg.seed = static_cast<std::uint64_t>(t_seed);
            if (t_epochs >= 0) cfg.train_cfg.epochs = t_epochs;
            if (t_restarts >= 0) cfg.train_cfg.n_restarts = t_restarts;
            const sl::ExperimentResult res = sl::run_experiment(cfg);
            std::printf("best restart: %d\n", res.training.best_restart);
            std::printf("test profit: %.4f%%  buy-and-hold: %.4f%%\n", res.test_profit_pct,
                        res.buy_and_hold_pct);
            std::printf("outputs in %s\n", cfg.out_dir.c_str());
            return 0;
        }

        if (bt->parsed()) {
            const sl::Checkpoint ckpt = sl::load_checkpoint(b_ckpt);
            std::vector<std::string> warnings;
            const sl::FeaturePanel panel = sl::load_csv(b_data, &warnings);
            for (const std::string& w : warnings)
                std::fprintf(stderr, "warning: %s\n", w.c_str());
            if (ckpt.params.cfg.n_stocks != static_cast<int>(panel.n_stocks()))
                throw std::runtime_error(
                    "CompatibilityError: checkpoint expects " +
                    std::to_string(ckpt.params.cfg.n_stocks) + " stocks, panel has " +
                    std::to_string(panel.n_stocks()));
            if (ckpt.params.cfg.n_features != sl::kNumFeatures)
                throw std::runtime_error("CompatibilityError: checkpoint feature count");
            const auto range = sl::year_range(panel, b_year);
            if (!range)
                throw std::runtime_error("panel has no rows in test year " +
                                         std::to_string(b_year));
            sl::BacktestConfig bcfg;
            bcfg.initial_budget = b_budget;
            bcfg.compounding = !b_additive;
            bcfg.transaction_cost_bps = b_cost;
            const auto decisions = sl::decide_range(panel, *range, ckpt.params, ckpt.norm);
            const sl::FeaturePanel test_panel = sl::slice(panel, *range);
            const sl::BacktestLedger ledger =
                sl::run_backtest(test_panel, decisions, bcfg);
            const double bnh = sl::buy_and_hold(test_panel);
            std::filesystem::create_directories(b_out);
            sl::write_ledger_csv(ledger, test_panel, b_out + "/ledger.csv");
            sl::write_summary(ledger, bnh, bcfg, b_out + "/summary.txt");
            std::printf("profit: %.4f%%  buy-and-hold: %.4f%%  (%s)\n", ledger.profit_pct,
                        bnh, b_out.c_str());
            return 0;
        }

        if (gc->parsed()) return run_gradcheck(gopt);

        if (cmp->parsed()) {
            std::vector<std::vector<double>> samples;
            for (const std::string& dir : cmp_dirs)
                samples.push_back(read_restart_test_profits(dir));
            std::printf("%-24s %-24s %5s %5s %9s %12s  %s\n", "run_a", "run_b", "n_a",
                        "n_b", "U", "p_value", "significant(0.05)");
            for (std::size_t i = 0; i < samples.size(); ++i) {
                for (std::size_t j = i + 1; j < samples.size(); ++j) {
                    const sl::MannWhitneyResult r =
                        sl::mann_whitney_u(samples[i], samples[j]);
                    std::printf("%-24s %-24s %5zu %5zu %9.1f %12.6g  %s\n",
                                cmp_dirs[i].c_str(), cmp_dirs[j].c_str(),
                                samples[i].size(), samples[j].size(), r.u, r.p_value,
                                r.p_value < 0.05 ? "yes" : "no");
                }
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
