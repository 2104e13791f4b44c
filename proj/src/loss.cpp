#include "stockloss/loss.hpp"

#include <algorithm>
#include <cmath>

namespace stockloss {

namespace {

// Per-node ingredients shared by every variant. With s(x) = smooth ?
// tanh(gamma*x) : sign(x):
//   mag  = x*s(x) (smooth) or |x|      — the un-normalized allocation weight
//   dmag = d(mag)/dx
//   dir  = s(x)                        — the trade-direction factor
//   g    = d(mag*dir)/dx               — derivative of the signed weight
// In non-smooth mode mag*dir = x exactly, so g = 1 everywhere.
struct NodeTerms {
    double mag = 0.0;
    double dmag = 0.0;
    double dir = 0.0;
    double g = 0.0;
};

NodeTerms node_terms(double x, double gamma, bool smooth) {
    NodeTerms n;
    if (smooth) {
        const double t = std::tanh(gamma * x);
        const double sech2 = 1.0 - t * t;
        n.mag = x * t;
        n.dmag = t + gamma * x * sech2;
        n.dir = t;
        n.g = t * t + 2.0 * gamma * x * t * sech2;
    } else {
        n.mag = std::abs(x);
        n.dmag = (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        n.dir = n.dmag;
        n.g = 1.0;
    }
    return n;
}

void validate_inputs(const OutputVector& outputs, const SignalDelta& delta,
                     const LossConfig& cfg) {
    validate_outputs(outputs);
    if (cfg.gamma <= 0.0) throw std::invalid_argument("LossConfig: gamma must be > 0");
    if (cfg.denom_epsilon <= 0.0)
        throw std::invalid_argument("LossConfig: denom_epsilon must be > 0");
    if (delta.deltas.size() != outputs.n_stocks())
        throw std::invalid_argument("SignalDelta length does not match stock count");
    for (double d : delta.deltas)
        if (!std::isfinite(d)) throw std::invalid_argument("SignalDelta: non-finite entry");
    if (cfg.use_hold && !outputs.hold_output)
        throw std::invalid_argument("use_hold requires an OutputVector with a hold node");
    if (!cfg.use_hold && outputs.hold_output)
        throw std::invalid_argument("hold output present but use_hold is false");
}

// max_j delta_j, pushed to +denom_epsilon when its magnitude is below the
// guard. A negative max is kept as-is: the equations are used as written.
double guarded_max_delta(const std::vector<double>& deltas, double eps) {
    const double d = *std::max_element(deltas.begin(), deltas.end());
    return std::abs(d) < eps ? eps : d;
}

LossEvaluation evaluate_impl(const OutputVector& outputs, const SignalDelta& delta,
                             const LossConfig& cfg) {
    validate_inputs(outputs, delta, cfg);
    const std::size_t n = outputs.n_stocks();
    const bool hold = cfg.use_hold;
    const double eps = cfg.denom_epsilon;

    std::vector<NodeTerms> t(n);
    for (std::size_t i = 0; i < n; ++i)
        t[i] = node_terms(outputs.stock_outputs[i], cfg.gamma, cfg.smooth);
    NodeTerms th;
    if (hold) th = node_terms(*outputs.hold_output, cfg.gamma, cfg.smooth);

    // Allocation normalizer over all nodes; clamped like the other
    // denominators, and treated as a constant while clamped.
    double s_raw = hold ? th.mag : 0.0;
    for (const NodeTerms& nt : t) s_raw += nt.mag;
    const bool s_clamped = s_raw < eps;
    const double S = s_clamped ? eps : s_raw;

    // Signed allocation-weighted signal sum.
    double W = 0.0;
    for (std::size_t i = 0; i < n; ++i) W += t[i].mag * t[i].dir * delta.deltas[i];

    LossEvaluation ev;
    ev.gradient.assign(outputs.size(), 0.0);

    auto ds = [&](const NodeTerms& nt) { return s_clamped ? 0.0 : nt.dmag; };

    switch (cfg.variant) {
        case LossVariant::StockLoss:
        case LossVariant::StockLossMax: {
            const bool is_max = cfg.variant == LossVariant::StockLossMax;
            const double dfac = is_max ? guarded_max_delta(delta.deltas, eps) : 1.0;
            const double top = W / dfac + (hold ? th.mag : 0.0);
            ev.value = (is_max ? 1.0 : 0.0) - top / S;
            for (std::size_t k = 0; k < n; ++k) {
                const double dtop = delta.deltas[k] * t[k].g / dfac;
                ev.gradient[k] = -(dtop * S - top * ds(t[k])) / (S * S);
            }
            if (hold) ev.gradient[n] = -(th.dmag * S - top * ds(th)) / (S * S);
            break;
        }
        case LossVariant::StockLossL2: {
            const double dfac = guarded_max_delta(delta.deltas, eps);
            double m = 0.0;
            std::vector<double> q(n);
            for (std::size_t i = 0; i < n; ++i) {
                q[i] = delta.deltas[i] / dfac;
                m += t[i].mag * q[i] * q[i];
            }
            const double hterm = hold ? th.mag * th.mag / (S * S) : 0.0;
            const double radicand = m / S + hterm;
            if (radicand < eps * eps) {
                // Floored: sqrt would blow up the gradient at 0.
                ev.value = 1.0 - eps;
                break;
            }
            const double r = std::sqrt(radicand);
            ev.value = 1.0 - r;
            for (std::size_t k = 0; k < n; ++k) {
                double drad = (q[k] * q[k] * t[k].dmag * S - m * ds(t[k])) / (S * S);
                if (hold) drad -= 2.0 * th.mag * th.mag * ds(t[k]) / (S * S * S);
                ev.gradient[k] = -drad / (2.0 * r);
            }
            if (hold) {
                double drad = (2.0 * th.mag * th.dmag - m * ds(th)) / (S * S)
                              - 2.0 * th.mag * th.mag * ds(th) / (S * S * S);
                ev.gradient[n] = -drad / (2.0 * r);
            }
            break;
        }
        case LossVariant::StockLossNorm: {
            double q_raw = 0.0;
            for (std::size_t i = 0; i < n; ++i) q_raw += t[i].mag * delta.deltas[i];
            const bool q_clamped = std::abs(q_raw) < eps;
            const double Q = q_clamped ? (q_raw < 0.0 ? -eps : eps) : q_raw;
            ev.value = 1.0 - W / Q - (hold ? th.mag / S : 0.0);
            for (std::size_t k = 0; k < n; ++k) {
                const double dq = q_clamped ? 0.0 : delta.deltas[k] * t[k].dmag;
                ev.gradient[k] = -(delta.deltas[k] * t[k].g * Q - W * dq) / (Q * Q);
                if (hold) ev.gradient[k] += th.mag * ds(t[k]) / (S * S);
            }
            if (hold) ev.gradient[n] = -(th.dmag * S - th.mag * ds(th)) / (S * S);
            break;
        }
    }

    if (!std::isfinite(ev.value))
        throw std::runtime_error("loss value is non-finite");
    for (double g : ev.gradient)
        if (!std::isfinite(g)) throw std::runtime_error("loss gradient is non-finite");
    return ev;
}

void require_variant(const LossConfig& cfg, LossVariant v, const char* name) {
    if (cfg.variant != v)
        throw std::invalid_argument(std::string(name) + ": cfg.variant mismatch");
}

}  // namespace

LossEvaluation evaluate_loss(const OutputVector& outputs, const SignalDelta& delta,
                             const LossConfig& cfg) {
    return evaluate_impl(outputs, delta, cfg);
}

LossEvaluation stock_loss(const OutputVector& outputs, const SignalDelta& delta,
                          const LossConfig& cfg) {
    require_variant(cfg, LossVariant::StockLoss, "stock_loss");
    return evaluate_impl(outputs, delta, cfg);
}

LossEvaluation stock_loss_max(const OutputVector& outputs, const SignalDelta& delta,
                              const LossConfig& cfg) {
    require_variant(cfg, LossVariant::StockLossMax, "stock_loss_max");
    return evaluate_impl(outputs, delta, cfg);
}

LossEvaluation stock_loss_l2(const OutputVector& outputs, const SignalDelta& delta,
                             const LossConfig& cfg) {
    require_variant(cfg, LossVariant::StockLossL2, "stock_loss_l2");
    return evaluate_impl(outputs, delta, cfg);
}

LossEvaluation stock_loss_norm(const OutputVector& outputs, const SignalDelta& delta,
                               const LossConfig& cfg) {
    require_variant(cfg, LossVariant::StockLossNorm, "stock_loss_norm");
    return evaluate_impl(outputs, delta, cfg);
}

std::vector<double> loss_gradient_fd(const LossFn& fn, const OutputVector& outputs,
                                     const SignalDelta& delta, const LossConfig& cfg,
                                     double h) {
    if (h <= 0.0) throw std::invalid_argument("loss_gradient_fd: h must be > 0");
    validate_outputs(outputs);
    auto check_node = [&](double v) {
        if (v + h >= 1.0 || v - h <= -1.0)
            throw std::domain_error("loss_gradient_fd: perturbation leaves (-1, 1)");
        if (!cfg.smooth && std::abs(v) < h)
            throw std::domain_error(
                "loss_gradient_fd: perturbation straddles the kink at 0");
    };
    for (double v : outputs.stock_outputs) check_node(v);
    if (outputs.hold_output) check_node(*outputs.hold_output);

    const std::size_t total = outputs.size();
    std::vector<double> grad(total);
    for (std::size_t k = 0; k < total; ++k) {
        OutputVector plus = outputs;
        OutputVector minus = outputs;
        double& vp = k < outputs.n_stocks() ? plus.stock_outputs[k] : *plus.hold_output;
        double& vm = k < outputs.n_stocks() ? minus.stock_outputs[k] : *minus.hold_output;
        vp += h;
        vm -= h;
        grad[k] = (fn(plus, delta, cfg).value - fn(minus, delta, cfg).value) / (2.0 * h);
    }
    return grad;
}

const char* to_string(LossVariant v) {
    switch (v) {
        case LossVariant::StockLoss: return "StockLoss";
        case LossVariant::StockLossMax: return "StockLossMax";
        case LossVariant::StockLossL2: return "StockLossL2";
        case LossVariant::StockLossNorm: return "StockLossNorm";
    }
    return "?";
}

const char* to_string(SignalSource s) {
    return s == SignalSource::Return ? "Return" : "Price";
}

std::optional<LossVariant> parse_loss_variant(std::string_view s) {
    if (s == "StockLoss") return LossVariant::StockLoss;
    if (s == "StockLossMax") return LossVariant::StockLossMax;
    if (s == "StockLossL2") return LossVariant::StockLossL2;
    if (s == "StockLossNorm") return LossVariant::StockLossNorm;
    return std::nullopt;
}

std::optional<SignalSource> parse_signal_source(std::string_view s) {
    if (s == "Return") return SignalSource::Return;
    if (s == "Price") return SignalSource::Price;
    return std::nullopt;
}

}  // namespace stockloss
