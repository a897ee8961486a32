#pragma once

#include <cstddef>
#include <vector>

namespace dwiplan {

// Fixed-width binning over a closed value range. Edges are shared between the
// distributions a divergence compares; values outside the range are clipped
// into the end bins so both histograms always cover the same support.
struct Histogram {
    std::vector<double> bin_edges; // size num_bins + 1, strictly increasing
    std::vector<double> counts;    // size num_bins
    double n_total = 0.0;          // sum of counts before normalization

    std::size_t num_bins() const { return counts.size(); }
    // counts / n_total; sums to 1.
    std::vector<double> normalized() const;

    void validate() const;
};

// Freedman-Diaconis bin width 2*IQR*n^(-1/3) with the linear-interpolation
// quantile rule. NaNs are ignored; needs >= 4 finite values; errors when the
// IQR is zero (degenerate distribution).
double fd_bin_width(const std::vector<double>& values);

// Edges start at range_min and step by bin_width until the range is covered.
std::vector<double> make_bin_edges(double range_min, double range_max, double bin_width);

// Histogram of the finite entries of `values` over the given edges.
Histogram make_histogram(const std::vector<double>& values, const std::vector<double>& edges);

// KL divergence Div(P || Q) in bits over shared bins. When every bin with
// P > 0 also has Q > 0 this is the plain sum P*log2(P/Q) over those bins;
// otherwise both histograms get additive smoothing eps = 1/(10*n_total)
// (each with its own total) before normalizing, which keeps the sum finite.
double kl_divergence(const Histogram& p, const Histogram& q);

} // namespace dwiplan
