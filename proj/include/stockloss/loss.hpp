#pragma once

#include <functional>
#include <string_view>

#include "stockloss/alloc.hpp"

namespace stockloss {

enum class LossVariant { StockLoss, StockLossMax, StockLossL2, StockLossNorm };
enum class SignalSource { Return, Price };

struct LossConfig {
    LossVariant variant = LossVariant::StockLoss;
    bool smooth = false;
    double gamma = 10.0;          // sharpness of the tanh sign proxy
    bool use_hold = false;        // reward keeping part of the budget uninvested
    SignalSource signal_source = SignalSource::Return;
    double denom_epsilon = 1e-8;  // magnitude guard for all normalizers
};

// Next-step signal per stock: difference of consecutive one-day returns
// (signal_source = Return) or of consecutive prices (signal_source = Price).
struct SignalDelta {
    std::vector<double> deltas;
};

struct LossEvaluation {
    double value = 0.0;
    std::vector<double> gradient;  // one entry per output node, hold node last
};

// Dispatches on cfg.variant. Outputs and cfg.use_hold must be consistent:
// a hold entry in the gradient exists exactly when the vector carries one.
LossEvaluation evaluate_loss(const OutputVector& outputs, const SignalDelta& delta,
                             const LossConfig& cfg);

// Negated expected profit: -(sum_i Vhat_i * delta_i * dir_i + hold fraction).
LossEvaluation stock_loss(const OutputVector& outputs, const SignalDelta& delta,
                          const LossConfig& cfg);

// 1 - sum_i Vhat_i * (delta_i / max_j delta_j) * dir_i - hold fraction.
LossEvaluation stock_loss_max(const OutputVector& outputs, const SignalDelta& delta,
                              const LossConfig& cfg);

// 1 - sqrt(sum_i Vhat_i * (delta_i / max_j delta_j)^2 + hold^2). Carries no
// directional factor; direction is applied only when trades are placed.
LossEvaluation stock_loss_l2(const OutputVector& outputs, const SignalDelta& delta,
                             const LossConfig& cfg);

// 1 - sum_i |O_i| * delta_i * dir_i / sum_j |O_j| * delta_j - hold fraction.
LossEvaluation stock_loss_norm(const OutputVector& outputs, const SignalDelta& delta,
                               const LossConfig& cfg);

using LossFn = std::function<LossEvaluation(const OutputVector&, const SignalDelta&,
                                            const LossConfig&)>;

// Central finite-difference gradient, one entry per output node. Rejects
// perturbations that would leave (-1, 1) and, for non-smooth configs,
// perturbations that would straddle the kink at 0 (test one-sided instead).
std::vector<double> loss_gradient_fd(const LossFn& fn, const OutputVector& outputs,
                                     const SignalDelta& delta, const LossConfig& cfg,
                                     double h);

const char* to_string(LossVariant v);
const char* to_string(SignalSource s);
std::optional<LossVariant> parse_loss_variant(std::string_view s);
std::optional<SignalSource> parse_signal_source(std::string_view s);

}  // namespace stockloss
