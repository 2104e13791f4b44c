#include "stockloss/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace stockloss {

namespace {

void check_cfg(const ModelConfig& cfg) {
    if (cfg.n_stocks < 1) throw std::invalid_argument("ModelConfig: n_stocks must be >= 1");
    if (cfg.n_features < 1)
        throw std::invalid_argument("ModelConfig: n_features must be >= 1");
    if (cfg.seq_len < 1) throw std::invalid_argument("ModelConfig: seq_len must be >= 1");
    if (cfg.architecture == Architecture::MLP && cfg.hidden_width < 1)
        throw std::invalid_argument("ModelConfig: hidden_width must be >= 1");
}

void check_window(const ModelConfig& cfg, const std::vector<double>& window) {
    if (window.size() != static_cast<std::size_t>(cfg.input_dim()))
        throw std::invalid_argument("window size does not match seq_len*n_stocks*n_features");
    for (double v : window)
        if (!std::isfinite(v)) throw std::invalid_argument("window contains non-finite value");
}

// tanh clamped to the open interval, so outputs always satisfy |o| < 1 even
// when the argument saturates to 1.0 in double precision.
double tanh_open(double z) {
    constexpr double lim = 1.0 - 1e-16;
    const double t = std::tanh(z);
    return t >= lim ? lim : (t <= -lim ? -lim : t);
}

struct Layout {
    std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, total = 0;
    int in = 0, hid = 0, out = 0;
    bool mlp = false;
};

Layout layout_of(const ModelConfig& cfg) {
    Layout l;
    l.in = cfg.input_dim();
    l.out = cfg.output_dim();
    l.mlp = cfg.architecture == Architecture::MLP;
    l.hid = l.mlp ? cfg.hidden_width : 0;
    const std::size_t in = static_cast<std::size_t>(l.in);
    const std::size_t out = static_cast<std::size_t>(l.out);
    const std::size_t hid = static_cast<std::size_t>(l.hid);
    if (l.mlp) {
        l.w1 = 0;
        l.b1 = hid * in;
        l.w2 = l.b1 + hid;
        l.b2 = l.w2 + out * hid;
        l.total = l.b2 + out;
    } else {
        l.w1 = 0;
        l.b1 = out * in;
        l.total = l.b1 + out;
    }
    return l;
}

std::string fmt_hex(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

double parse_hex(const std::string& tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw std::runtime_error("checkpoint: bad number '" + tok + "'");
    return v;
}

}  // namespace

std::size_t ModelConfig::param_count() const {
    return layout_of(*this).total;
}

ModelParams init_params(const ModelConfig& cfg) {
    check_cfg(cfg);
    const Layout l = layout_of(cfg);
    ModelParams p;
    p.cfg = cfg;
    p.values.resize(l.total);
    std::mt19937_64 rng(cfg.seed);
    auto fill = [&](std::size_t from, std::size_t to, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t i = from; i < to; ++i) p.values[i] = u(rng);
    };
    if (l.mlp) {
        fill(l.w1, l.w2, l.in);   // W1 and b1 share the input fan-in
        fill(l.w2, l.total, l.hid);
    } else {
        fill(0, l.total, l.in);
    }
    return p;
}

OutputVector forward(const ModelParams& params, const std::vector<double>& window) {
    check_cfg(params.cfg);
    check_window(params.cfg, window);
    const Layout l = layout_of(params.cfg);
    if (params.values.size() != l.total)
        throw std::invalid_argument("parameter vector size does not match layout");

    std::vector<double> out(static_cast<std::size_t>(l.out));
    if (l.mlp) {
        std::vector<double> hidden(static_cast<std::size_t>(l.hid));
        for (int h = 0; h < l.hid; ++h) {
            double z = params.values[l.b1 + static_cast<std::size_t>(h)];
            const double* w = &params.values[l.w1 + static_cast<std::size_t>(h) *
                                                       static_cast<std::size_t>(l.in)];
            for (int i = 0; i < l.in; ++i) z += w[i] * window[static_cast<std::size_t>(i)];
            hidden[static_cast<std::size_t>(h)] = std::tanh(z);
        }
        for (int o = 0; o < l.out; ++o) {
            double z = params.values[l.b2 + static_cast<std::size_t>(o)];
            const double* w = &params.values[l.w2 + static_cast<std::size_t>(o) *
                                                       static_cast<std::size_t>(l.hid)];
            for (int h = 0; h < l.hid; ++h) z += w[h] * hidden[static_cast<std::size_t>(h)];
            out[static_cast<std::size_t>(o)] = tanh_open(z);
        }
    } else {
        for (int o = 0; o < l.out; ++o) {
            double z = params.values[l.b1 + static_cast<std::size_t>(o)];
            const double* w = &params.values[l.w1 + static_cast<std::size_t>(o) *
                                                       static_cast<std::size_t>(l.in)];
            for (int i = 0; i < l.in; ++i) z += w[i] * window[static_cast<std::size_t>(i)];
            out[static_cast<std::size_t>(o)] = tanh_open(z);
        }
    }

    OutputVector ov;
    if (params.cfg.use_hold) {
        ov.hold_output = out.back();
        out.pop_back();
    }
    ov.stock_outputs = std::move(out);
    return ov;
}

BackwardResult backward(const ModelParams& params, const std::vector<double>& window,
                        const SignalDelta& delta, const LossConfig& loss_cfg) {
    check_cfg(params.cfg);
    check_window(params.cfg, window);
    const Layout l = layout_of(params.cfg);
    if (params.values.size() != l.total)
        throw std::invalid_argument("parameter vector size does not match layout");

    // Forward pass, keeping the activations needed for the backward sweep.
    std::vector<double> hidden(static_cast<std::size_t>(l.hid));
    std::vector<double> out(static_cast<std::size_t>(l.out));
    if (l.mlp) {
        for (int h = 0; h < l.hid; ++h) {
            double z = params.values[l.b1 + static_cast<std::size_t>(h)];
            const double* w = &params.values[l.w1 + static_cast<std::size_t>(h) *
                                                       static_cast<std::size_t>(l.in)];
            for (int i = 0; i < l.in; ++i) z += w[i] * window[static_cast<std::size_t>(i)];
            hidden[static_cast<std::size_t>(h)] = std::tanh(z);
        }
    }
    const std::vector<double>& last_in = l.mlp ? hidden : window;
    const int last_in_dim = l.mlp ? l.hid : l.in;
    const std::size_t w_last = l.mlp ? l.w2 : l.w1;
    const std::size_t b_last = l.mlp ? l.b2 : l.b1;
    for (int o = 0; o < l.out; ++o) {
        double z = params.values[b_last + static_cast<std::size_t>(o)];
        const double* w = &params.values[w_last + static_cast<std::size_t>(o) *
                                                     static_cast<std::size_t>(last_in_dim)];
        for (int i = 0; i < last_in_dim; ++i) z += w[i] * last_in[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(o)] = tanh_open(z);
    }

    OutputVector ov;
    ov.stock_outputs.assign(out.begin(),
                            out.end() - (params.cfg.use_hold ? 1 : 0));
    if (params.cfg.use_hold) ov.hold_output = out.back();
    const LossEvaluation ev = evaluate_loss(ov, delta, loss_cfg);

    BackwardResult res;
    res.loss = ev.value;
    res.grad.assign(l.total, 0.0);

    // d(loss)/d(pre-activation) of the output layer.
    std::vector<double> dz_out(static_cast<std::size_t>(l.out));
    for (int o = 0; o < l.out; ++o) {
        const double y = out[static_cast<std::size_t>(o)];
        dz_out[static_cast<std::size_t>(o)] = ev.gradient[static_cast<std::size_t>(o)] *
                                              (1.0 - y * y);
    }

    for (int o = 0; o < l.out; ++o) {
        const double dz = dz_out[static_cast<std::size_t>(o)];
        double* gw = &res.grad[w_last + static_cast<std::size_t>(o) *
                                           static_cast<std::size_t>(last_in_dim)];
        for (int i = 0; i < last_in_dim; ++i) gw[i] = dz * last_in[static_cast<std::size_t>(i)];
        res.grad[b_last + static_cast<std::size_t>(o)] = dz;
    }
    if (l.mlp) {
        for (int h = 0; h < l.hid; ++h) {
            double dh = 0.0;
            for (int o = 0; o < l.out; ++o)
                dh += dz_out[static_cast<std::size_t>(o)] *
                      params.values[l.w2 + static_cast<std::size_t>(o) *
                                              static_cast<std::size_t>(l.hid) +
                                    static_cast<std::size_t>(h)];
            const double y = hidden[static_cast<std::size_t>(h)];
            const double dz = dh * (1.0 - y * y);
            double* gw = &res.grad[l.w1 + static_cast<std::size_t>(h) *
                                              static_cast<std::size_t>(l.in)];
            for (int i = 0; i < l.in; ++i) gw[i] = dz * window[static_cast<std::size_t>(i)];
            res.grad[l.b1 + static_cast<std::size_t>(h)] = dz;
        }
    }
    return res;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const ModelConfig& cfg = ckpt.params.cfg;
    check_cfg(cfg);
    const Layout l = layout_of(cfg);
    if (ckpt.params.values.size() != l.total)
        throw std::invalid_argument("save_checkpoint: parameter size mismatch");
    const std::size_t norm_n =
        static_cast<std::size_t>(cfg.n_stocks) * static_cast<std::size_t>(cfg.n_features);
    if (ckpt.norm.mean.size() != norm_n || ckpt.norm.std_dev.size() != norm_n)
        throw std::invalid_argument("save_checkpoint: norm stats size mismatch");

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
        out << "stockloss-checkpoint v1\n";
        out << "architecture " << to_string(cfg.architecture) << '\n';
        out << "hidden_width " << cfg.hidden_width << '\n';
        out << "seq_len " << cfg.seq_len << '\n';
        out << "n_stocks " << cfg.n_stocks << '\n';
        out << "n_features " << cfg.n_features << '\n';
        out << "use_hold " << (cfg.use_hold ? 1 : 0) << '\n';
        out << "seed " << cfg.seed << '\n';
        auto dump = [&](const char* name, const std::vector<double>& v) {
            out << name << ' ' << v.size();
            for (double x : v) out << ' ' << fmt_hex(x);
            out << '\n';
        };
        dump("norm_mean", ckpt.norm.mean);
        dump("norm_std", ckpt.norm.std_dev);
        dump("params", ckpt.params.values);
        if (!out) throw std::runtime_error("write to '" + tmp + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "stockloss-checkpoint v1")
        throw std::runtime_error("'" + path + "' is not a v1 checkpoint");

    Checkpoint ckpt;
    ModelConfig& cfg = ckpt.params.cfg;
    auto next_kv = [&](const std::string& key) -> std::string {
        if (!std::getline(in, line))
            throw std::runtime_error("checkpoint: missing field '" + key + "'");
        std::istringstream ls(line);
        std::string k, v;
        ls >> k >> v;
        if (k != key) throw std::runtime_error("checkpoint: expected '" + key +
                                               "', found '" + k + "'");
        return v;
    };
    const std::string arch = next_kv("architecture");
    const auto parsed = parse_architecture(arch);
    if (!parsed) throw std::runtime_error("checkpoint: unknown architecture '" + arch + "'");
    cfg.architecture = *parsed;
    cfg.hidden_width = std::stoi(next_kv("hidden_width"));
    cfg.seq_len = std::stoi(next_kv("seq_len"));
    cfg.n_stocks = std::stoi(next_kv("n_stocks"));
    cfg.n_features = std::stoi(next_kv("n_features"));
    cfg.use_hold = next_kv("use_hold") == "1";
    cfg.seed = std::stoull(next_kv("seed"));
    check_cfg(cfg);

    auto read_vec = [&](const std::string& key) {
        if (!std::getline(in, line))
            throw std::runtime_error("checkpoint: missing block '" + key + "'");
        std::istringstream ls(line);
        std::string k;
        std::size_t count = 0;
        ls >> k >> count;
        if (k != key) throw std::runtime_error("checkpoint: expected '" + key +
                                               "', found '" + k + "'");
        std::vector<double> v(count);
        std::string tok;
        for (std::size_t i = 0; i < count; ++i) {
            if (!(ls >> tok))
                throw std::runtime_error("checkpoint: block '" + key + "' truncated");
            v[i] = parse_hex(tok);
        }
        return v;
    };
    ckpt.norm.mean = read_vec("norm_mean");
    ckpt.norm.std_dev = read_vec("norm_std");
    ckpt.params.values = read_vec("params");

    const Layout l = layout_of(cfg);
    if (ckpt.params.values.size() != l.total)
        throw std::runtime_error("checkpoint: parameter count does not match layout");
    const std::size_t norm_n =
        static_cast<std::size_t>(cfg.n_stocks) * static_cast<std::size_t>(cfg.n_features);
    if (ckpt.norm.mean.size() != norm_n || ckpt.norm.std_dev.size() != norm_n)
        throw std::runtime_error("checkpoint: norm stats do not match panel shape");
    return ckpt;
}

const char* to_string(Architecture a) {
    return a == Architecture::Linear ? "Linear" : "MLP";
}

std::optional<Architecture> parse_architecture(std::string_view s) {
    if (s == "Linear") return Architecture::Linear;
    if (s == "MLP") return Architecture::MLP;
    return std::nullopt;
}

}  // namespace stockloss
