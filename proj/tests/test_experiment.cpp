#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "stockloss/experiment.hpp"

using namespace stockloss;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Small but complete config: 2 synthetic stocks over 1994-1996.
std::string tiny_config(const std::string& out_dir) {
    return "schema_version = 1\n"
           "seed = 99\n"
           "out_dir = " + out_dir + "\n"
           "data = synth\n"
           "synth_stocks = 2\n"
           "synth_days = 560\n"
           "synth_start = 1994-01-03\n"
           "synth_drift = 0.002, -0.002\n"
           "synth_vol = 0.005\n"
           "synth_start_price = 100\n"
           "test_year = 1996\n"
           "architecture = Linear\n"
           "seq_len = 4\n"
           "use_hold = false\n"
           "loss_variant = StockLoss\n"
           "loss_smooth = true\n"
           "loss_gamma = 10\n"
           "loss_signal = Price\n"
           "epochs = 2\n"
           "learning_rate = 0.01\n"
           "batch_size = 16\n"
           "n_restarts = 2\n"
           "initial_budget = 1000\n"
           "compounding = true\n"
           "transaction_cost_bps = 0\n";
}

}  // namespace

TEST_CASE("config text: comments, spacing, and round-trip stability") {
    const std::string text =
        "# experiment setup\n"
        "schema_version = 1\n"
        "seed=42\n"
        "  out_dir =  /tmp/xyz  \n"
        "data = synth\n"
        "synth_stocks = 3\n"
        "synth_drift = 0.01, -0.01, 0\n"  // one per stock
        "synth_vol = 0.02\n"              // broadcast to all
        "test_year = 1996\n"
        "architecture = MLP\n"
        "hidden_width = 8\n"
        "epochs = 5\n";
    const ExperimentConfig cfg = parse_config_text(text);
    CHECK(cfg.seed == 42);
    CHECK(cfg.out_dir == "/tmp/xyz");
    CHECK(cfg.use_synth);
    CHECK(cfg.synth.n_stocks == 3);
    REQUIRE(cfg.synth.drift.size() == 3);
    CHECK(cfg.synth.drift[1] == -0.01);
    REQUIRE(cfg.synth.vol.size() == 1);
    CHECK(cfg.model.architecture == Architecture::MLP);
    CHECK(cfg.model.hidden_width == 8);
    CHECK(cfg.train_cfg.epochs == 5);
    CHECK(cfg.split.test_year == 1996);

    // Serialization is a parse fixpoint.
    const std::string canon = serialize_config(cfg);
    const ExperimentConfig back = parse_config_text(canon);
    CHECK(serialize_config(back) == canon);
    // The canonical echo resolves the vol broadcast to one entry per stock.
    CHECK(canon.find("synth_vol = 0.02,0.02,0.02") != std::string::npos);
}

TEST_CASE("config text: malformed inputs are named errors") {
    CHECK_THROWS_WITH_AS(parse_config_text("schema_version = 1\nwibble = 3\n"),
                         doctest::Contains("unknown key 'wibble'"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config_text("seed = 1\n"),
                         doctest::Contains("schema_version"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config_text("schema_version = 2\n"),
                         doctest::Contains("schema_version"), std::runtime_error);
    CHECK_THROWS_AS(parse_config_text("schema_version = 1\nepochs = banana\n"),
                    std::runtime_error);
    CHECK_THROWS_AS(parse_config_text("schema_version = 1\ndata = sql\n"),
                    std::runtime_error);
    CHECK_THROWS_WITH_AS(
        parse_config_text("schema_version = 1\nloss_variant = huber\n"),
        doctest::Contains("StockLoss"), std::runtime_error);
    CHECK_THROWS_AS(parse_config_text("schema_version = 1\nno_equals_here\n"),
                    std::runtime_error);
}

TEST_CASE("synth broadcast rules") {
    SynthSpec spec;
    spec.n_stocks = 3;
    // Empty lists: all drift/vol zero, all start prices drawn.
    std::vector<StockRegime> regimes = spec.regimes();
    REQUIRE(regimes.size() == 3);
    for (const StockRegime& r : regimes) {
        CHECK(r.drift == 0.0);
        CHECK(r.vol == 0.0);
        CHECK(r.start_price == 0.0);
    }
    spec.drift = {0.01};
    spec.vol = {0.1, 0.2, 0.3};
    regimes = spec.regimes();
    CHECK(regimes[2].drift == 0.01);
    CHECK(regimes[1].vol == 0.2);

    spec.vol = {0.1, 0.2};  // neither 1 nor n_stocks
    CHECK_THROWS_AS(spec.regimes(), std::runtime_error);
}

TEST_CASE("run_experiment: writes the full run directory and reproduces itself") {
    const fs::path dir = fs::temp_directory_path() / "stockloss_test_run";
    fs::remove_all(dir);
    const ExperimentConfig cfg = parse_config_text(tiny_config(dir.string()));
    const ExperimentResult res = run_experiment(cfg);

    REQUIRE(res.restart_test_profits.size() == 2);
    for (double p : res.restart_test_profits) CHECK(std::isfinite(p));
    const std::size_t best = static_cast<std::size_t>(res.training.best_restart);
    CHECK(res.test_profit_pct == res.restart_test_profits[best]);
    CHECK(std::isfinite(res.buy_and_hold_pct));

    const char* files[] = {"config.echo", "checkpoint", "history.csv",
                           "restart_profits.csv", "ledger.csv", "summary.txt"};
    std::map<std::string, std::string> snapshot;
    for (const char* f : files) {
        CAPTURE(f);
        REQUIRE(fs::exists(dir / f));
        snapshot[f] = read_file(dir / f);
    }

    // history.csv: header + one row per epoch of the winning restart.
    std::stringstream hist(snapshot["history.csv"]);
    std::string line;
    std::getline(hist, line);
    CHECK(line == "epoch,train_loss,val_profit_pct");
    int rows = 0;
    while (std::getline(hist, line)) ++rows;
    CHECK(rows == 2);

    // restart_profits.csv: header + one row per restart, none aborted here.
    std::stringstream rp(snapshot["restart_profits.csv"]);
    std::getline(rp, line);
    CHECK(line == "restart,aborted,val_profit_pct,test_profit_pct");
    rows = 0;
    while (std::getline(rp, line)) {
        CHECK(line.substr(line.find(',') + 1, 1) == "0");
        ++rows;
    }
    CHECK(rows == 2);

    // The checkpoint reloads into a usable model with shapes resolved.
    const Checkpoint ck = load_checkpoint((dir / "checkpoint").string());
    CHECK(ck.params.cfg.n_stocks == 2);
    CHECK(ck.params.cfg.seq_len == 4);
    std::vector<double> window(
        static_cast<std::size_t>(ck.params.cfg.input_dim()), 0.0);
    CHECK_NOTHROW(forward(ck.params, window));

    // Second run, same config: every artifact byte-identical.
    const ExperimentResult res2 = run_experiment(cfg);
    CHECK(res2.test_profit_pct == res.test_profit_pct);
    for (const char* f : files) {
        CAPTURE(f);
        CHECK(read_file(dir / f) == snapshot[f]);
    }
    fs::remove_all(dir);
}

TEST_CASE("run_experiment: refuses to start on an incomplete config") {
    ExperimentConfig cfg = parse_config_text(tiny_config("/tmp/unused"));
    cfg.out_dir.clear();
    CHECK_THROWS_AS(run_experiment(cfg), std::runtime_error);

    cfg = parse_config_text(tiny_config("/tmp/unused"));
    cfg.split.test_year = 0;
    CHECK_THROWS_AS(run_experiment(cfg), std::runtime_error);

    cfg = parse_config_text(tiny_config("/tmp/unused"));
    cfg.split.test_year = 2011;  // synth panel never reaches it
    CHECK_THROWS_AS(run_experiment(cfg), std::runtime_error);

    cfg = parse_config_text(tiny_config("/tmp/unused"));
    cfg.use_synth = false;  // data = csv but no path
    CHECK_THROWS_AS(run_experiment(cfg), std::runtime_error);
}

TEST_CASE("run_experiment: csv input path matches the synth path") {
    // Generate a panel, save it, and run the same experiment from the file.
    const fs::path dir_a = fs::temp_directory_path() / "stockloss_test_synth_run";
    const fs::path dir_b = fs::temp_directory_path() / "stockloss_test_csv_run";
    const fs::path csv = fs::temp_directory_path() / "stockloss_test_panel.csv";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    const ExperimentConfig cfg_a = parse_config_text(tiny_config(dir_a.string()));
    run_experiment(cfg_a);

    const FeaturePanel panel =
        synth_market(cfg_a.synth.n_stocks, cfg_a.synth.n_days,
                     splitmix64(cfg_a.seed ^ 0x53594E5448ULL),
                     cfg_a.synth.regimes(), cfg_a.synth.start);
    save_csv(panel, csv.string());

    ExperimentConfig cfg_b = cfg_a;
    cfg_b.use_synth = false;
    cfg_b.csv_path = csv.string();
    cfg_b.out_dir = dir_b.string();
    const ExperimentResult res_b = run_experiment(cfg_b);

    // Same panel bits, same seeds: identical artifacts except the config echo.
    for (const char* f : {"checkpoint", "history.csv", "restart_profits.csv",
                          "ledger.csv", "summary.txt"}) {
        CAPTURE(f);
        CHECK(read_file(dir_a / f) == read_file(dir_b / f));
    }
    CHECK(std::isfinite(res_b.test_profit_pct));
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    fs::remove(csv);
}
