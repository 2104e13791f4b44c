#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stockloss {

// Raw model outputs for N stocks plus an optional hold node. Values come out
// of a tanh head, so each lies strictly inside (-1, 1).
struct OutputVector {
    std::vector<double> stock_outputs;
    std::optional<double> hold_output;

    std::size_t n_stocks() const { return stock_outputs.size(); }
    std::size_t size() const { return stock_outputs.size() + (hold_output ? 1 : 0); }
};

enum class TradeDirection { Buy, Short, Flat };

// Budget split derived from an OutputVector: per-stock fractions, trade
// directions, and the uninvested remainder.
struct AllocationDecision {
    std::vector<double> fractions;        // one per stock, >= 0
    std::vector<TradeDirection> directions;
    double hold_fraction = 0.0;
    double epsilon_floor = 0.0;
};

constexpr double kDefaultEpsilonFloor = 1e-6;

// Throws std::invalid_argument on empty, non-finite, or out-of-range outputs.
void validate_outputs(const OutputVector& outputs);

// sign(x) with sign(0) = 0, or its smooth proxy tanh(gamma * x).
double sign_proxy(double x, double gamma, bool smooth);

// Splits the unit budget proportionally to |O_i| over all nodes (the hold
// node, when present, enters the denominator like a stock). Stocks with
// |O_i| < epsilon_floor are marked Flat and their fraction moves to hold.
// If every stock output is below the floor the whole budget is held.
AllocationDecision allocate(const OutputVector& outputs,
                            double epsilon_floor = kDefaultEpsilonFloor);

const char* to_string(TradeDirection dir);

}  // namespace stockloss
