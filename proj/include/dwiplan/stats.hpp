#pragma once

#include <cstddef>
#include <vector>

namespace dwiplan {

struct SampleStats {
    double mean = 0.0;
    double sd = 0.0; // n-1 denominator; NaN for a single sample (undefined)
    std::size_t n = 0;
};

// Mean and sample standard deviation of the biopsy draws; errors on empty input.
SampleStats sample_stats(const std::vector<double>& xs);

// Pairwise (tree) summation. Deterministic and far better conditioned than a
// running sum; used everywhere a float reduction feeds a reported number.
double pairwise_sum(const double* xs, std::size_t n);
double pairwise_sum(const std::vector<double>& xs);

// Linear-interpolation quantile (the "type 7" rule: the p-quantile sits at
// rank (n-1)*p of the sorted values). p in [0,1]; input need not be sorted.
double quantile_type7(std::vector<double> xs, double p);

// Same, for several probabilities at once; sorts once.
std::vector<double> quantiles_type7(std::vector<double> xs, const std::vector<double>& ps);

// Sample skewness g1 = m3 / m2^(3/2) with population moments m2, m3.
double sample_skewness(const std::vector<double>& xs);

// Pearson correlation; errors when either side has zero variance.
double pearson_correlation(const std::vector<double>& xs, const std::vector<double>& ys);

// Drops NaNs; used before any order statistic on masked maps.
std::vector<double> finite_values(const std::vector<double>& xs);

} // namespace dwiplan
