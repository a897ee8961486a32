#include "dwiplan/histogram.hpp"

#include <algorithm>
#include <cmath>

#include "dwiplan/error.hpp"
#include "dwiplan/stats.hpp"

namespace dwiplan {

std::vector<double> Histogram::normalized() const {
    if (n_total <= 0.0)
        fail(errc::insufficient_data, "histogram: nothing counted");
    std::vector<double> p(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) p[i] = counts[i] / n_total;
    return p;
}

void Histogram::validate() const {
    if (counts.empty() || bin_edges.size() != counts.size() + 1)
        fail(errc::invalid_argument, "histogram: edge/count size mismatch");
    for (std::size_t i = 0; i + 1 < bin_edges.size(); ++i)
        if (!(bin_edges[i] < bin_edges[i + 1]))
            fail(errc::invalid_argument, "histogram: edges not strictly increasing");
}

double fd_bin_width(const std::vector<double>& values) {
    std::vector<double> xs = finite_values(values);
    if (xs.size() < 4)
        fail(errc::insufficient_data, "fd_bin_width: need at least 4 finite values");
    auto qs = quantiles_type7(xs, {0.25, 0.75});
    double iqr = qs[1] - qs[0];
    if (!(iqr > 0.0))
        fail(errc::insufficient_data, "fd_bin_width: zero interquartile range");
    return 2.0 * iqr * std::pow(static_cast<double>(xs.size()), -1.0 / 3.0);
}

std::vector<double> make_bin_edges(double range_min, double range_max, double bin_width) {
    if (!(bin_width > 0.0))
        fail(errc::invalid_argument, "make_bin_edges: bin width must be positive");
    if (!(range_max > range_min))
        fail(errc::invalid_argument, "make_bin_edges: empty value range");
    auto nbins = static_cast<std::size_t>(std::ceil((range_max - range_min) / bin_width - 1e-12));
    if (nbins == 0) nbins = 1;
    std::vector<double> edges(nbins + 1);
    for (std::size_t i = 0; i <= nbins; ++i)
        edges[i] = range_min + bin_width * static_cast<double>(i);
    return edges;
}

Histogram make_histogram(const std::vector<double>& values, const std::vector<double>& edges) {
    Histogram h;
    h.bin_edges = edges;
    h.counts.assign(edges.size() - 1, 0.0);
    h.validate();
    const double lo = edges.front();
    const double width_total = edges.back() - edges.front();
    const auto nbins = static_cast<std::ptrdiff_t>(h.counts.size());
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        // Uniform edges let the bin come from one division; out-of-range
        // values are clipped into the end bins.
        auto bin = static_cast<std::ptrdiff_t>(
            std::floor((v - lo) / width_total * static_cast<double>(nbins)));
        bin = std::clamp<std::ptrdiff_t>(bin, 0, nbins - 1);
        h.counts[static_cast<std::size_t>(bin)] += 1.0;
        h.n_total += 1.0;
    }
    return h;
}

double kl_divergence(const Histogram& p, const Histogram& q) {
    p.validate();
    q.validate();
    if (p.bin_edges != q.bin_edges)
        fail(errc::bins_mismatch, "kl_divergence: histograms do not share bin edges");
    if (p.n_total <= 0.0 || q.n_total <= 0.0)
        fail(errc::insufficient_data, "kl_divergence: empty histogram");

    bool needs_smoothing = false;
    for (std::size_t i = 0; i < p.counts.size(); ++i)
        if (p.counts[i] > 0.0 && q.counts[i] <= 0.0) { needs_smoothing = true; break; }

    std::vector<double> pp, qq;
    if (needs_smoothing) {
        const double eps_p = 1.0 / (10.0 * p.n_total);
        const double eps_q = 1.0 / (10.0 * q.n_total);
        const double np = p.n_total + eps_p * static_cast<double>(p.counts.size());
        const double nq = q.n_total + eps_q * static_cast<double>(q.counts.size());
        pp.resize(p.counts.size());
        qq.resize(q.counts.size());
        for (std::size_t i = 0; i < p.counts.size(); ++i) {
            pp[i] = (p.counts[i] + eps_p) / np;
            qq[i] = (q.counts[i] + eps_q) / nq;
        }
    } else {
        pp = p.normalized();
        qq = q.normalized();
    }

    std::vector<double> terms;
    terms.reserve(pp.size());
    for (std::size_t i = 0; i < pp.size(); ++i)
        if (pp[i] > 0.0)
            terms.push_back(pp[i] * std::log2(pp[i] / qq[i]));
    return pairwise_sum(terms);
}

} // namespace dwiplan
