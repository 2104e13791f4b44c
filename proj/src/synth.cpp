#include "stockloss/synth.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace stockloss {

FeaturePanel synth_market(int n_stocks, int n_days, std::uint64_t seed,
                          const std::vector<StockRegime>& regimes, Date start) {
    if (n_stocks < 1) throw std::invalid_argument("synth_market: n_stocks must be >= 1");
    if (n_days < 2) throw std::invalid_argument("synth_market: n_days must be >= 2");
    if (regimes.size() != static_cast<std::size_t>(n_stocks))
        throw std::invalid_argument("synth_market: need one regime per stock");
    for (const StockRegime& r : regimes) {
        if (r.vol < 0.0) throw std::invalid_argument("synth_market: vol must be >= 0");
        if (!std::isfinite(r.drift) || !std::isfinite(r.vol) || !std::isfinite(r.start_price))
            throw std::invalid_argument("synth_market: non-finite regime parameter");
        if (r.drift <= -1.0)
            throw std::invalid_argument("synth_market: drift must be > -1");
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> z01(0.0, 1.0);

    FeaturePanel panel;
    panel.dates.resize(static_cast<std::size_t>(n_days));
    Date d = is_weekday(start) ? start : next_weekday(start);
    for (int t = 0; t < n_days; ++t) {
        panel.dates[static_cast<std::size_t>(t)] = d;
        d = next_weekday(d);
    }
    panel.tickers.resize(static_cast<std::size_t>(n_stocks));
    for (int s = 0; s < n_stocks; ++s) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "S%03d", s);
        panel.tickers[static_cast<std::size_t>(s)] = buf;
    }
    panel.values.assign(static_cast<std::size_t>(n_days) *
                            static_cast<std::size_t>(n_stocks) * kNumFeatures,
                        0.0);

    // Per-stock statics first, then per-stock daily draws, all in a fixed
    // order so the stream is reproducible.
    std::vector<double> price(static_cast<std::size_t>(n_stocks));
    std::vector<double> shares(static_cast<std::size_t>(n_stocks));
    for (int s = 0; s < n_stocks; ++s) {
        const StockRegime& r = regimes[static_cast<std::size_t>(s)];
        const double drawn = 20.0 + 160.0 * u01(rng);
        price[static_cast<std::size_t>(s)] = r.start_price > 0.0 ? r.start_price : drawn;
        shares[static_cast<std::size_t>(s)] = std::floor(1e6 + 9.99e8 * u01(rng));
    }

    for (std::size_t s = 0; s < static_cast<std::size_t>(n_stocks); ++s) {
        const StockRegime& r = regimes[s];
        double p = price[s];
        double prev = p;
        for (std::size_t t = 0; t < static_cast<std::size_t>(n_days); ++t) {
            if (t > 0) {
                double factor = 1.0 + r.drift;
                if (r.vol > 0.0)
                    factor *= std::exp(r.vol * z01(rng) - 0.5 * r.vol * r.vol);
                prev = p;
                p *= factor;
                if (!(p > 0.0) || !std::isfinite(p))
                    throw std::runtime_error("synth_market: price path left (0, inf)");
            }
            panel.at(t, s, Feature::Price) = p;
            panel.at(t, s, Feature::Return) = t == 0 ? 0.0 : (p - prev) / prev;
            panel.at(t, s, Feature::VolumeChange) = -0.2 + 0.4 * u01(rng);
            panel.at(t, s, Feature::BidAskSpread) = 1e-4 + 0.0099 * u01(rng);
            panel.at(t, s, Feature::Illiquidity) = 1e-9 + 1e-6 * u01(rng);
            panel.at(t, s, Feature::Turnover) = 0.001 + 0.199 * u01(rng);
            panel.at(t, s, Feature::SharesOutstanding) = shares[s];
            panel.at(t, s, Feature::MarketCap) = p * shares[s];
        }
    }

    validate_panel(panel, nullptr);
    return panel;
}

}  // namespace stockloss
