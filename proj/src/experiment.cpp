#include "stockloss/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stockloss {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config: " + key + " must be true/false, got '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw std::runtime_error("config: bad number for " + key + ": '" + v + "'");
    return x;
}

long long parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad integer for " + key + ": '" + v + "'");
    }
}

std::vector<double> parse_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::string cur;
    std::istringstream in(v);
    while (std::getline(in, cur, ',')) out.push_back(parse_double(trim(cur), key));
    return out;
}

std::string join_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += fmt17(v[i]);
    }
    return out;
}

std::vector<double> broadcast(const std::vector<double>& v, int n, const char* what) {
    if (v.empty()) return std::vector<double>(static_cast<std::size_t>(n), 0.0);
    if (v.size() == 1) return std::vector<double>(static_cast<std::size_t>(n), v[0]);
    if (v.size() != static_cast<std::size_t>(n))
        throw std::runtime_error(std::string("config: ") + what + " needs 1 or " +
                                 std::to_string(n) + " values, got " +
                                 std::to_string(v.size()));
    return v;
}

}  // namespace

std::vector<StockRegime> SynthSpec::regimes() const {
    const std::vector<double> d = broadcast(drift, n_stocks, "synth_drift");
    const std::vector<double> v = broadcast(vol, n_stocks, "synth_vol");
    const std::vector<double> p = broadcast(start_price, n_stocks, "synth_start_price");
    std::vector<StockRegime> out(static_cast<std::size_t>(n_stocks));
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = StockRegime{d[i], v[i], p[i]};
    return out;
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool saw_version = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected `key = value`");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (key == "schema_version") {
            cfg.schema_version = static_cast<int>(parse_int(val, key));
            if (cfg.schema_version != 1)
                throw std::runtime_error("config: unsupported schema_version " + val);
            saw_version = true;
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(parse_int(val, key));
        } else if (key == "out_dir") {
            cfg.out_dir = val;
        } else if (key == "data") {
            if (val == "synth") cfg.use_synth = true;
            else if (val == "csv") cfg.use_synth = false;
            else throw std::runtime_error("config: data must be synth or csv");
        } else if (key == "csv_path") {
            cfg.csv_path = val;
        } else if (key == "synth_stocks") {
            cfg.synth.n_stocks = static_cast<int>(parse_int(val, key));
        } else if (key == "synth_days") {
            cfg.synth.n_days = static_cast<int>(parse_int(val, key));
        } else if (key == "synth_start") {
            cfg.synth.start = parse_date(val);
        } else if (key == "synth_drift") {
            cfg.synth.drift = parse_list(val, key);
        } else if (key == "synth_vol") {
            cfg.synth.vol = parse_list(val, key);
        } else if (key == "synth_start_price") {
            cfg.synth.start_price = parse_list(val, key);
        } else if (key == "test_year") {
            cfg.split.test_year = static_cast<int>(parse_int(val, key));
        } else if (key == "architecture") {
            const auto a = parse_architecture(val);
            if (!a) throw std::runtime_error("config: architecture must be Linear or MLP");
            cfg.model.architecture = *a;
        } else if (key == "hidden_width") {
            cfg.model.hidden_width = static_cast<int>(parse_int(val, key));
        } else if (key == "seq_len") {
            cfg.model.seq_len = static_cast<int>(parse_int(val, key));
        } else if (key == "use_hold") {
            cfg.model.use_hold = parse_bool(val, key);
        } else if (key == "loss_variant") {
            const auto v = parse_loss_variant(val);
            if (!v)
                throw std::runtime_error(
                    "config: loss_variant must be one of StockLoss, StockLossMax, "
                    "StockLossL2, StockLossNorm");
            cfg.train_cfg.loss.variant = *v;
        } else if (key == "loss_smooth") {
            cfg.train_cfg.loss.smooth = parse_bool(val, key);
        } else if (key == "loss_gamma") {
            cfg.train_cfg.loss.gamma = parse_double(val, key);
        } else if (key == "loss_signal") {
            const auto s = parse_signal_source(val);
            if (!s) throw std::runtime_error("config: loss_signal must be Return or Price");
            cfg.train_cfg.loss.signal_source = *s;
        } else if (key == "denom_epsilon") {
            cfg.train_cfg.loss.denom_epsilon = parse_double(val, key);
        } else if (key == "epochs") {
            cfg.train_cfg.epochs = static_cast<int>(parse_int(val, key));
        } else if (key == "learning_rate") {
            cfg.train_cfg.learning_rate = parse_double(val, key);
        } else if (key == "batch_size") {
            cfg.train_cfg.batch_size = static_cast<int>(parse_int(val, key));
        } else if (key == "n_restarts") {
            cfg.train_cfg.n_restarts = static_cast<int>(parse_int(val, key));
        } else if (key == "parallel_restarts") {
            cfg.train_cfg.parallel_restarts = parse_bool(val, key);
        } else if (key == "initial_budget") {
            cfg.backtest.initial_budget = parse_double(val, key);
        } else if (key == "compounding") {
            cfg.backtest.compounding = parse_bool(val, key);
        } else if (key == "transaction_cost_bps") {
            cfg.backtest.transaction_cost_bps = parse_double(val, key);
        } else {
            throw std::runtime_error("config: unknown key '" + key + "'");
        }
    }
    if (!saw_version) throw std::runtime_error("config: schema_version missing");
    cfg.train_cfg.loss.use_hold = cfg.model.use_hold;
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "schema_version = " << cfg.schema_version << '\n';
    out << "seed = " << cfg.seed << '\n';
    out << "out_dir = " << cfg.out_dir << '\n';
    out << "data = " << (cfg.use_synth ? "synth" : "csv") << '\n';
    if (!cfg.use_synth) out << "csv_path = " << cfg.csv_path << '\n';
    if (cfg.use_synth) {
        out << "synth_stocks = " << cfg.synth.n_stocks << '\n';
        out << "synth_days = " << cfg.synth.n_days << '\n';
        out << "synth_start = " << format_date(cfg.synth.start) << '\n';
        out << "synth_drift = "
            << join_list(broadcast(cfg.synth.drift, cfg.synth.n_stocks, "synth_drift"))
            << '\n';
        out << "synth_vol = "
            << join_list(broadcast(cfg.synth.vol, cfg.synth.n_stocks, "synth_vol")) << '\n';
        out << "synth_start_price = "
            << join_list(
                   broadcast(cfg.synth.start_price, cfg.synth.n_stocks, "synth_start_price"))
            << '\n';
    }
    out << "test_year = " << cfg.split.test_year << '\n';
    out << "architecture = " << to_string(cfg.model.architecture) << '\n';
    out << "hidden_width = " << cfg.model.hidden_width << '\n';
    out << "seq_len = " << cfg.model.seq_len << '\n';
    out << "use_hold = " << (cfg.model.use_hold ? "true" : "false") << '\n';
    out << "loss_variant = " << to_string(cfg.train_cfg.loss.variant) << '\n';
    out << "loss_smooth = " << (cfg.train_cfg.loss.smooth ? "true" : "false") << '\n';
    out << "loss_gamma = " << fmt17(cfg.train_cfg.loss.gamma) << '\n';
    out << "loss_signal = " << to_string(cfg.train_cfg.loss.signal_source) << '\n';
    out << "denom_epsilon = " << fmt17(cfg.train_cfg.loss.denom_epsilon) << '\n';
    out << "epochs = " << cfg.train_cfg.epochs << '\n';
    out << "learning_rate = " << fmt17(cfg.train_cfg.learning_rate) << '\n';
    out << "batch_size = " << cfg.train_cfg.batch_size << '\n';
    out << "n_restarts = " << cfg.train_cfg.n_restarts << '\n';
    out << "parallel_restarts = " << (cfg.train_cfg.parallel_restarts ? "true" : "false")
        << '\n';
    out << "initial_budget = " << fmt17(cfg.backtest.initial_budget) << '\n';
    out << "compounding = " << (cfg.backtest.compounding ? "true" : "false") << '\n';
    out << "transaction_cost_bps = " << fmt17(cfg.backtest.transaction_cost_bps) << '\n';
    return out.str();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.out_dir.empty()) throw std::runtime_error("run_experiment: out_dir not set");
    if (cfg.split.test_year == 0)
        throw std::runtime_error("run_experiment: test_year not set");

    FeaturePanel panel;
    if (cfg.use_synth) {
        panel = synth_market(cfg.synth.n_stocks, cfg.synth.n_days,
                             splitmix64(cfg.seed ^ 0x53594E5448ULL),
                             cfg.synth.regimes(), cfg.synth.start);
    } else {
        if (cfg.csv_path.empty())
            throw std::runtime_error("run_experiment: csv_path not set for data = csv");
        std::vector<std::string> warnings;
        panel = load_csv(cfg.csv_path, &warnings);
        for (const std::string& w : warnings)
            std::fprintf(stderr, "warning: %s\n", w.c_str());
    }

    const auto test_range = year_range(panel, cfg.split.test_year);
    if (!test_range)
        throw std::runtime_error("run_experiment: panel has no rows in test year " +
                                 std::to_string(cfg.split.test_year));
    split(panel, cfg.split);  // validates all three regions exist

    ModelConfig mcfg = cfg.model;
    mcfg.n_stocks = static_cast<int>(panel.n_stocks());
    mcfg.seed = splitmix64(cfg.seed ^ 0x4D4F44454CULL);

    ExperimentResult res;
    res.training = train(panel, cfg.split, mcfg, cfg.train_cfg, cfg.backtest);

    const FeaturePanel test_panel = slice(panel, *test_range);
    res.buy_and_hold_pct = buy_and_hold(test_panel);
    res.restart_test_profits.reserve(res.training.restarts.size());
    for (const RestartOutcome& r : res.training.restarts) {
        res.restart_test_profits.push_back(
            r.aborted ? std::nan("")
                      : backtest_range_profit(panel, *test_range, r.params,
                                              res.training.norm, cfg.backtest));
    }

    const std::vector<AllocationDecision> decisions =
        decide_range(panel, *test_range, res.training.best_params, res.training.norm);
    const BacktestLedger ledger = run_backtest(test_panel, decisions, cfg.backtest);
    res.test_profit_pct = ledger.profit_pct;

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);

    {
        std::ofstream out(dir / "config.echo");
        if (!out) throw std::runtime_error("cannot write config.echo");
        out << serialize_config(cfg);
    }
    save_checkpoint(Checkpoint{res.training.best_params, res.training.norm},
                    (dir / "checkpoint").string());
    {
        std::ofstream out(dir / "history.csv");
        if (!out) throw std::runtime_error("cannot write history.csv");
        out << "epoch,train_loss,val_profit_pct\n";
        for (const EpochStats& e : res.training.history)
            out << e.epoch << ',' << fmt17(e.train_loss) << ',' << fmt17(e.val_profit_pct)
                << '\n';
    }
    {
        std::ofstream out(dir / "restart_profits.csv");
        if (!out) throw std::runtime_error("cannot write restart_profits.csv");
        out << "restart,aborted,val_profit_pct,test_profit_pct\n";
        for (std::size_t r = 0; r < res.training.restarts.size(); ++r) {
            const RestartOutcome& o = res.training.restarts[r];
            out << o.restart << ',' << (o.aborted ? 1 : 0) << ','
                << (o.aborted ? "nan" : fmt17(o.val_profit_pct)) << ','
                << (o.aborted ? "nan" : fmt17(res.restart_test_profits[r])) << '\n';
        }
    }
    write_ledger_csv(ledger, test_panel, (dir / "ledger.csv").string());
    write_summary(ledger, res.buy_and_hold_pct, cfg.backtest,
                  (dir / "summary.txt").string());
    return res;
}

}  // namespace stockloss
