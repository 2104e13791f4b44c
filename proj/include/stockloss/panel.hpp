#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace stockloss {

struct Date {
    int y = 1970;
    int m = 1;
    int d = 1;
    auto operator<=>(const Date&) const = default;
};

Date parse_date(const std::string& s);  // ISO-8601 calendar date, throws
std::string format_date(const Date& d); // YYYY-MM-DD
bool is_weekday(const Date& d);
Date next_weekday(Date d);              // smallest weekday strictly after d

inline constexpr int kNumFeatures = 8;

enum Feature : int {
    VolumeChange = 0,
    BidAskSpread,
    Illiquidity,
    Turnover,
    Price,
    Return,
    SharesOutstanding,
    MarketCap,
};

inline constexpr std::array<const char*, kNumFeatures> kFeatureNames = {
    "volume_change", "bid_ask_spread", "illiquidity",        "turnover",
    "price",         "return",         "shares_outstanding", "market_cap",
};

// Dense per-day, per-stock feature matrix; values laid out day-major:
// index (t * n_stocks + s) * kNumFeatures + f.
struct FeaturePanel {
    std::vector<Date> dates;            // strictly increasing
    std::vector<std::string> tickers;
    std::vector<double> values;

    std::size_t n_days() const { return dates.size(); }
    std::size_t n_stocks() const { return tickers.size(); }

    double at(std::size_t t, std::size_t s, int f) const {
        return values[(t * tickers.size() + s) * kNumFeatures + f];
    }
    double& at(std::size_t t, std::size_t s, int f) {
        return values[(t * tickers.size() + s) * kNumFeatures + f];
    }
};

// Hard errors (throw): empty panel, unordered dates, non-finite values,
// non-positive price or shares. Soft issues (appended to warnings when
// provided): market_cap or return inconsistent with the price series beyond
// 1e-6 relative.
void validate_panel(const FeaturePanel& panel,
                    std::vector<std::string>* warnings = nullptr);

// Long-format CSV, one row per (date, ticker); header must match
// `date,ticker,<the 8 feature names>`. Missing (date, ticker) cells and
// duplicates are hard errors.
FeaturePanel load_csv(const std::string& path,
                      std::vector<std::string>* warnings = nullptr);

// Inverse of load_csv; numbers printed round-trip bit-exactly.
void save_csv(const FeaturePanel& panel, const std::string& path);

struct SplitSpec {
    int test_year = 0;
};

// Contiguous day-index range [first, last] of a panel, both inclusive.
struct DayRange {
    std::size_t first = 0;
    std::size_t last = 0;
    std::size_t n_days() const { return last - first + 1; }
};

std::optional<DayRange> year_range(const FeaturePanel& panel, int year);
FeaturePanel slice(const FeaturePanel& panel, DayRange range);

struct SplitPanels {
    FeaturePanel train;       // all years before test_year - 1
    FeaturePanel validation;  // test_year - 1
    FeaturePanel test;        // test_year
};

// Rows after test_year are dropped. Throws when any of the three regions
// would be empty.
SplitPanels split(const FeaturePanel& panel, const SplitSpec& spec);

}  // namespace stockloss
