#include "stockloss/alloc.hpp"

#include <cmath>

namespace stockloss {

void validate_outputs(const OutputVector& outputs) {
    if (outputs.stock_outputs.empty())
        throw std::invalid_argument("OutputVector: need at least one stock output");
    for (double o : outputs.stock_outputs) {
        if (!std::isfinite(o))
            throw std::invalid_argument("OutputVector: non-finite stock output");
        if (std::abs(o) >= 1.0)
            throw std::invalid_argument("OutputVector: stock output outside (-1, 1)");
    }
    if (outputs.hold_output) {
        if (!std::isfinite(*outputs.hold_output))
            throw std::invalid_argument("OutputVector: non-finite hold output");
        if (std::abs(*outputs.hold_output) >= 1.0)
            throw std::invalid_argument("OutputVector: hold output outside (-1, 1)");
    }
}

double sign_proxy(double x, double gamma, bool smooth) {
    if (smooth) return std::tanh(gamma * x);
    if (x > 0.0) return 1.0;
    if (x < 0.0) return -1.0;
    return 0.0;
}

AllocationDecision allocate(const OutputVector& outputs, double epsilon_floor) {
    validate_outputs(outputs);
    const std::size_t n = outputs.n_stocks();

    AllocationDecision dec;
    dec.epsilon_floor = epsilon_floor;
    dec.fractions.assign(n, 0.0);
    dec.directions.assign(n, TradeDirection::Flat);

    bool any_live = false;
    for (double o : outputs.stock_outputs)
        if (std::abs(o) >= epsilon_floor) { any_live = true; break; }
    if (!any_live) {
        // Degenerate: nothing tradeable, keep the whole budget.
        dec.hold_fraction = 1.0;
        return dec;
    }

    double denom = 0.0;
    for (double o : outputs.stock_outputs) denom += std::abs(o);
    if (outputs.hold_output) denom += std::abs(*outputs.hold_output);

    dec.hold_fraction = outputs.hold_output ? std::abs(*outputs.hold_output) / denom : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double o = outputs.stock_outputs[i];
        const double frac = std::abs(o) / denom;
        if (o >= epsilon_floor) {
            dec.fractions[i] = frac;
            dec.directions[i] = TradeDirection::Buy;
        } else if (o <= -epsilon_floor) {
            dec.fractions[i] = frac;
            dec.directions[i] = TradeDirection::Short;
        } else {
            // Flat: too small to trade, fraction goes to hold.
            dec.hold_fraction += frac;
        }
    }
    return dec;
}

const char* to_string(TradeDirection dir) {
    switch (dir) {
        case TradeDirection::Buy: return "Buy";
        case TradeDirection::Short: return "Short";
        case TradeDirection::Flat: return "Flat";
    }
    return "?";
}

}  // namespace stockloss
