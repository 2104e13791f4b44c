#include "stockloss/panel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace stockloss {

namespace {

std::chrono::sys_days to_sys_days(const Date& d) {
    using namespace std::chrono;
    return sys_days{year{d.y} / month{static_cast<unsigned>(d.m)} /
                    day{static_cast<unsigned>(d.d)}};
}

Date from_sys_days(std::chrono::sys_days sd) {
    const std::chrono::year_month_day ymd{sd};
    return Date{static_cast<int>(ymd.year()), static_cast<int>(unsigned(ymd.month())),
                static_cast<int>(unsigned(ymd.day()))};
}

std::string fmt_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string csv_header() {
    std::string h = "date,ticker";
    for (const char* f : kFeatureNames) {
        h += ',';
        h += f;
    }
    return h;
}

}  // namespace

Date parse_date(const std::string& s) {
    int y = 0, m = 0, d = 0;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%d%c", &y, &m, &d, &tail) != 3)
        throw std::runtime_error("bad date '" + s + "' (expected YYYY-MM-DD)");
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw std::runtime_error("invalid calendar date '" + s + "'");
    return Date{y, m, d};
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.y, d.m, d.d);
    return buf;
}

bool is_weekday(const Date& d) {
    const std::chrono::weekday wd{to_sys_days(d)};
    return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

Date next_weekday(Date d) {
    auto sd = to_sys_days(d);
    do {
        sd += std::chrono::days{1};
    } while (!is_weekday(from_sys_days(sd)));
    return from_sys_days(sd);
}

void validate_panel(const FeaturePanel& panel, std::vector<std::string>* warnings) {
    const std::size_t t_n = panel.n_days();
    const std::size_t s_n = panel.n_stocks();
    if (t_n == 0 || s_n == 0) throw std::runtime_error("panel is empty");
    if (panel.values.size() != t_n * s_n * kNumFeatures)
        throw std::runtime_error("panel value array has wrong size");
    for (std::size_t t = 1; t < t_n; ++t)
        if (!(panel.dates[t - 1] < panel.dates[t]))
            throw std::runtime_error("panel dates not strictly increasing at " +
                                     format_date(panel.dates[t]));
    for (double v : panel.values)
        if (!std::isfinite(v)) throw std::runtime_error("panel contains non-finite value");

    for (std::size_t t = 0; t < t_n; ++t) {
        for (std::size_t s = 0; s < s_n; ++s) {
            const double price = panel.at(t, s, Feature::Price);
            const double shares = panel.at(t, s, Feature::SharesOutstanding);
            if (price <= 0.0)
                throw std::runtime_error("non-positive price at " +
                                         format_date(panel.dates[t]) + " " +
                                         panel.tickers[s]);
            if (shares <= 0.0)
                throw std::runtime_error("non-positive shares_outstanding at " +
                                         format_date(panel.dates[t]) + " " +
                                         panel.tickers[s]);
            const double cap = panel.at(t, s, Feature::MarketCap);
            const double expect_cap = price * shares;
            if (std::abs(cap - expect_cap) > 1e-6 * std::abs(expect_cap) && warnings)
                warnings->push_back("market_cap mismatch at " +
                                    format_date(panel.dates[t]) + " " + panel.tickers[s] +
                                    ": " + fmt_value(cap) + " vs price*shares " +
                                    fmt_value(expect_cap));
            if (t >= 1) {
                const double prev = panel.at(t - 1, s, Feature::Price);
                const double expect_ret = (price - prev) / prev;
                const double ret = panel.at(t, s, Feature::Return);
                if (std::abs(ret - expect_ret) >
                        1e-6 * std::max(1.0, std::abs(expect_ret)) &&
                    warnings)
                    warnings->push_back("return mismatch at " +
                                        format_date(panel.dates[t]) + " " +
                                        panel.tickers[s] + ": " + fmt_value(ret) +
                                        " vs price-implied " + fmt_value(expect_ret));
            }
        }
    }
}

FeaturePanel load_csv(const std::string& path, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != csv_header())
        throw std::runtime_error("'" + path + "': header must be `" + csv_header() + "`");

    struct Row {
        Date date;
        std::string ticker;
        std::array<double, kNumFeatures> feat;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> f = split_fields(line);
        if (f.size() != 2 + kNumFeatures)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected " + std::to_string(2 + kNumFeatures) +
                                     " fields, got " + std::to_string(f.size()));
        Row r;
        r.date = parse_date(f[0]);
        r.ticker = f[1];
        if (r.ticker.empty())
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": empty ticker");
        for (int k = 0; k < kNumFeatures; ++k) {
            const std::string& cell = f[2 + k];
            char* end = nullptr;
            r.feat[k] = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": unparseable " +
                                         std::string(kFeatureNames[k]) + " '" + cell +
                                         "'");
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::runtime_error("'" + path + "' has no data rows");

    FeaturePanel panel;
    {
        std::vector<Date> dates;
        std::vector<std::string> tickers;
        for (const Row& r : rows) {
            dates.push_back(r.date);
            tickers.push_back(r.ticker);
        }
        std::sort(dates.begin(), dates.end());
        dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
        std::sort(tickers.begin(), tickers.end());
        tickers.erase(std::unique(tickers.begin(), tickers.end()), tickers.end());
        panel.dates = std::move(dates);
        panel.tickers = std::move(tickers);
    }
    const std::size_t t_n = panel.n_days();
    const std::size_t s_n = panel.n_stocks();
    std::map<Date, std::size_t> date_ix;
    std::map<std::string, std::size_t> ticker_ix;
    for (std::size_t t = 0; t < t_n; ++t) date_ix[panel.dates[t]] = t;
    for (std::size_t s = 0; s < s_n; ++s) ticker_ix[panel.tickers[s]] = s;

    panel.values.assign(t_n * s_n * kNumFeatures, 0.0);
    std::vector<char> seen(t_n * s_n, 0);
    for (const Row& r : rows) {
        const std::size_t t = date_ix.at(r.date);
        const std::size_t s = ticker_ix.at(r.ticker);
        if (seen[t * s_n + s])
            throw std::runtime_error("duplicate row for " + format_date(r.date) + " " +
                                     r.ticker);
        seen[t * s_n + s] = 1;
        for (int k = 0; k < kNumFeatures; ++k) panel.at(t, s, k) = r.feat[k];
    }
    for (std::size_t t = 0; t < t_n; ++t)
        for (std::size_t s = 0; s < s_n; ++s)
            if (!seen[t * s_n + s])
                throw std::runtime_error("PanelGap: no row for " +
                                         format_date(panel.dates[t]) + " " +
                                         panel.tickers[s]);

    validate_panel(panel, warnings);
    return panel;
}

void save_csv(const FeaturePanel& panel, const std::string& path) {
    validate_panel(panel, nullptr);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << csv_header() << '\n';
    for (std::size_t t = 0; t < panel.n_days(); ++t) {
        for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
            out << format_date(panel.dates[t]) << ',' << panel.tickers[s];
            for (int k = 0; k < kNumFeatures; ++k) out << ',' << fmt_value(panel.at(t, s, k));
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::optional<DayRange> year_range(const FeaturePanel& panel, int year) {
    std::optional<DayRange> r;
    for (std::size_t t = 0; t < panel.n_days(); ++t) {
        if (panel.dates[t].y != year) continue;
        if (!r) r = DayRange{t, t};
        else r->last = t;
    }
    return r;
}

FeaturePanel slice(const FeaturePanel& panel, DayRange range) {
    if (range.last >= panel.n_days() || range.first > range.last)
        throw std::invalid_argument("slice: bad day range");
    FeaturePanel out;
    out.tickers = panel.tickers;
    out.dates.assign(panel.dates.begin() + static_cast<std::ptrdiff_t>(range.first),
                     panel.dates.begin() + static_cast<std::ptrdiff_t>(range.last) + 1);
    const std::size_t row = panel.n_stocks() * kNumFeatures;
    out.values.assign(panel.values.begin() + static_cast<std::ptrdiff_t>(range.first * row),
                      panel.values.begin() + static_cast<std::ptrdiff_t>((range.last + 1) * row));
    return out;
}

SplitPanels split(const FeaturePanel& panel, const SplitSpec& spec) {
    const auto test = year_range(panel, spec.test_year);
    if (!test) throw std::runtime_error("split: no data for test year " +
                                        std::to_string(spec.test_year));
    const auto val = year_range(panel, spec.test_year - 1);
    if (!val) throw std::runtime_error("split: no data for validation year " +
                                       std::to_string(spec.test_year - 1));
    if (val->first == 0)
        throw std::runtime_error("split: no training data before year " +
                                 std::to_string(spec.test_year - 1));
    SplitPanels out;
    out.train = slice(panel, DayRange{0, val->first - 1});
    out.validation = slice(panel, *val);
    out.test = slice(panel, *test);
    return out;
}

}  // namespace stockloss
