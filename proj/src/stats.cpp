#include "stockloss/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace stockloss {

namespace {

// Midranks (1-based) of the pooled sample; ties share the average rank.
std::vector<double> midranks(const std::vector<double>& pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

// Walks every way of assigning n of the pooled ranks to the first sample and
// tallies how many land at or beyond the observed rank sum.
void count_assignments(const std::vector<double>& ranks, std::size_t next,
                       std::size_t remaining, double rank_sum, double observed,
                       double tol, long long& le, long long& ge, long long& total) {
    if (remaining == 0) {
        ++total;
        if (rank_sum <= observed + tol) ++le;
        if (rank_sum >= observed - tol) ++ge;
        return;
    }
    if (ranks.size() - next < remaining) return;
    count_assignments(ranks, next + 1, remaining - 1, rank_sum + ranks[next], observed,
                      tol, le, ge, total);
    count_assignments(ranks, next + 1, remaining, rank_sum, observed, tol, le, ge, total);
}

}  // namespace

MannWhitneyResult mann_whitney_u(const std::vector<double>& a,
                                 const std::vector<double>& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("mann_whitney_u: samples must be non-empty");
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    const std::size_t total_n = n + m;

    std::vector<double> pooled;
    pooled.reserve(total_n);
    pooled.insert(pooled.end(), a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    for (double v : pooled)
        if (!std::isfinite(v))
            throw std::invalid_argument("mann_whitney_u: non-finite value");

    const std::vector<double> ranks = midranks(pooled);
    double rank_sum_a = 0.0;
    for (std::size_t i = 0; i < n; ++i) rank_sum_a += ranks[i];

    MannWhitneyResult res;
    res.u = rank_sum_a - 0.5 * static_cast<double>(n) * static_cast<double>(n + 1);

    if (n <= 8 && m <= 8) {
        res.exact = true;
        long long le = 0, ge = 0, count = 0;
        count_assignments(ranks, 0, n, 0.0, rank_sum_a, 1e-9, le, ge, count);
        const double p_le = static_cast<double>(le) / static_cast<double>(count);
        const double p_ge = static_cast<double>(ge) / static_cast<double>(count);
        res.p_value = std::min(1.0, 2.0 * std::min(p_le, p_ge));
        return res;
    }

    // Normal approximation with tie correction and continuity correction.
    const double nd = static_cast<double>(n);
    const double md = static_cast<double>(m);
    const double nt = static_cast<double>(total_n);
    double tie_sum = 0.0;
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    const double mu = 0.5 * nd * md;
    const double var = nd * md / 12.0 * ((nt + 1.0) - tie_sum / (nt * (nt - 1.0)));
    if (var <= 0.0) {
        res.p_value = 1.0;
        return res;
    }
    const double z = std::max(0.0, (std::abs(res.u - mu) - 0.5) / std::sqrt(var));
    res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return res;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("linear_fit: need matching samples of size >= 2");
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    LinearFit fit;
    const double denom = n * sxx - sx * sx;
    if (denom != 0.0) {
        fit.slope = (n * sxy - sx * sy) / denom;
        fit.intercept = (sy - fit.slope * sx) / n;
    } else {
        fit.intercept = sy / n;
    }
    double ss_res = 0.0, ss_tot = 0.0;
    const double ym = sy / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (fit.slope * x[i] + fit.intercept);
        ss_res += e * e;
        ss_tot += (y[i] - ym) * (y[i] - ym);
    }
    fit.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean: empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace stockloss
