#pragma once

#include <cstddef>
#include <vector>

namespace stockloss {

struct MannWhitneyResult {
    double u = 0.0;        // U statistic of the first sample
    double p_value = 1.0;  // two-sided
    bool exact = false;    // true when computed by exhaustive enumeration
};

// Two-sided rank test with midrank tie handling. Exact enumeration over all
// C(n+m, n) group assignments when both samples have <= 8 elements, otherwise
// a continuity-corrected normal approximation with tie correction.
MannWhitneyResult mann_whitney_u(const std::vector<double>& a,
                                 const std::vector<double>& b);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

// Ordinary least squares of y on x. r2 is 1 for a perfect fit; a degenerate
// y (zero variance) yields r2 = 1 by convention.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

double mean(const std::vector<double>& v);

// Sample standard deviation (n-1 denominator); 0 for fewer than 2 points.
double sample_std(const std::vector<double>& v);

}  // namespace stockloss
