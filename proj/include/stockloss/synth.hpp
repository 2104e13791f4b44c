#pragma once

#include <cstdint>

#include "stockloss/panel.hpp"

namespace stockloss {

// Per-stock price dynamics: each day the price is multiplied by
// (1 + drift) * exp(vol * z - vol^2 / 2) with z standard normal, so the
// expected growth factor is exactly 1 + drift and vol = 0 degenerates to a
// deterministic compounding path. start_price <= 0 means "draw one".
struct StockRegime {
    double drift = 0.0;
    double vol = 0.0;
    double start_price = 0.0;
};

// Seeded synthetic market over consecutive weekdays starting at start
// (advanced to a weekday if needed). Returns and market caps satisfy the
// panel identities bit-exactly; the remaining features are plausible noise.
// Deterministic for a fixed seed.
FeaturePanel synth_market(int n_stocks, int n_days, std::uint64_t seed,
                          const std::vector<StockRegime>& regimes,
                          Date start = Date{1994, 1, 3});

}  // namespace stockloss
