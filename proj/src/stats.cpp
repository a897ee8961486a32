#include "dwiplan/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dwiplan/error.hpp"

namespace dwiplan {

double pairwise_sum(const double* xs, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += xs[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_sum(xs, half) + pairwise_sum(xs + half, n - half);
}

double pairwise_sum(const std::vector<double>& xs) { return pairwise_sum(xs.data(), xs.size()); }

SampleStats sample_stats(const std::vector<double>& xs) {
    if (xs.empty())
        fail(errc::insufficient_data, "sample_stats: no samples");
    SampleStats st;
    st.n = xs.size();
    st.mean = pairwise_sum(xs) / static_cast<double>(st.n);
    if (st.n == 1) {
        st.sd = std::numeric_limits<double>::quiet_NaN();
        return st;
    }
    std::vector<double> sq(st.n);
    for (std::size_t i = 0; i < st.n; ++i) {
        double d = xs[i] - st.mean;
        sq[i] = d * d;
    }
    st.sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(st.n - 1));
    return st;
}

double quantile_type7(std::vector<double> xs, double p) {
    std::vector<double> ps{p};
    return quantiles_type7(std::move(xs), ps)[0];
}

std::vector<double> quantiles_type7(std::vector<double> xs, const std::vector<double>& ps) {
    if (xs.empty())
        fail(errc::insufficient_data, "quantile: no values");
    std::sort(xs.begin(), xs.end());
    std::vector<double> out;
    out.reserve(ps.size());
    const std::size_t n = xs.size();
    for (double p : ps) {
        if (!(p >= 0.0 && p <= 1.0))
            fail(errc::invalid_argument, "quantile: probability outside [0,1]");
        double pos = p * static_cast<double>(n - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        if (lo >= n - 1) {
            out.push_back(xs[n - 1]);
            continue;
        }
        double frac = pos - static_cast<double>(lo);
        out.push_back(xs[lo] + frac * (xs[lo + 1] - xs[lo]));
    }
    return out;
}

double sample_skewness(const std::vector<double>& xs) {
    if (xs.size() < 3)
        fail(errc::insufficient_data, "skewness: need at least 3 values");
    const double n = static_cast<double>(xs.size());
    const double mean = pairwise_sum(xs) / n;
    std::vector<double> d2(xs.size()), d3(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double d = xs[i] - mean;
        d2[i] = d * d;
        d3[i] = d * d * d;
    }
    double m2 = pairwise_sum(d2) / n;
    double m3 = pairwise_sum(d3) / n;
    if (m2 <= 0.0)
        return 0.0; // constant sample: no asymmetry to speak of
    return m3 / std::pow(m2, 1.5);
}

double pearson_correlation(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        fail(errc::invalid_argument, "pearson: length mismatch");
    if (xs.size() < 2)
        fail(errc::insufficient_data, "pearson: need at least 2 points");
    const double n = static_cast<double>(xs.size());
    const double mx = pairwise_sum(xs) / n;
    const double my = pairwise_sum(ys) / n;
    std::vector<double> xx(xs.size()), yy(xs.size()), xy(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        xx[i] = dx * dx;
        yy[i] = dy * dy;
        xy[i] = dx * dy;
    }
    double sxx = pairwise_sum(xx), syy = pairwise_sum(yy), sxy = pairwise_sum(xy);
    if (sxx <= 0.0 || syy <= 0.0)
        fail(errc::undefined_correlation, "pearson: a side has zero variance");
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> finite_values(const std::vector<double>& xs) {
    std::vector<double> out;
    out.reserve(xs.size());
    for (double v : xs)
        if (std::isfinite(v)) out.push_back(v);
    return out;
}

} // namespace dwiplan
