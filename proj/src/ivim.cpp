#include "dwiplan/ivim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dwiplan/error.hpp"

namespace dwiplan {

void IVIMSignal::validate() const {
    if (b_values.size() != ratios.size())
        fail(errc::invalid_signal, "ivim: b-value/ratio count mismatch");
    if (b_values.size() < 4)
        fail(errc::invalid_signal, "ivim: need at least 4 b-values");
    if (b_values.front() != 0.0)
        fail(errc::invalid_signal, "ivim: first b-value must be 0");
    int high = 0;
    for (std::size_t i = 0; i < b_values.size(); ++i) {
        if (i > 0 && !(b_values[i] > b_values[i - 1]))
            fail(errc::invalid_signal, "ivim: b-values must be strictly ascending");
        if (!(ratios[i] > 0.0) || !std::isfinite(ratios[i]))
            fail(errc::invalid_signal, "ivim: signal ratios must be positive");
        if (b_values[i] >= ivim_config::kSegmentedSplitB) ++high;
    }
    if (high < 2)
        fail(errc::invalid_signal, "ivim: need at least 2 b-values at or above the split");
}

double forward_ivim(const IVIMParams& p, double b) {
    return (1.0 - p.f) * std::exp(-b * p.d) + p.f * std::exp(-b * (p.d + p.d_star));
}

IVIMSignal forward_ivim(const IVIMParams& p, const std::vector<double>& b_values) {
    IVIMSignal s;
    s.b_values = b_values;
    s.ratios.reserve(b_values.size());
    for (double b : b_values) s.ratios.push_back(forward_ivim(p, b));
    return s;
}

namespace {

double sse_of(const IVIMParams& p, const std::vector<double>& b, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        double r = forward_ivim(p, b[i]) - y[i];
        s += r * r;
    }
    return s;
}

// Solve the damped 3x3 normal equations by Gaussian elimination with partial
// pivoting; returns false on a singular system.
bool solve3(double a[3][3], double rhs[3], double out[3]) {
    int piv[3] = {0, 1, 2};
    for (int c = 0; c < 3; ++c) {
        int best = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::fabs(a[piv[r]][c]) > std::fabs(a[piv[best]][c])) best = r;
        std::swap(piv[c], piv[best]);
        double d = a[piv[c]][c];
        if (std::fabs(d) < 1e-300) return false;
        for (int r = c + 1; r < 3; ++r) {
            double f = a[piv[r]][c] / d;
            for (int k = c; k < 3; ++k) a[piv[r]][k] -= f * a[piv[c]][k];
            rhs[piv[r]] -= f * rhs[piv[c]];
        }
    }
    for (int c = 2; c >= 0; --c) {
        double s = rhs[piv[c]];
        for (int k = c + 1; k < 3; ++k) s -= a[piv[c]][k] * out[k];
        out[c] = s / a[piv[c]][c];
    }
    return true;
}

IVIMParams clamp_params(IVIMParams p) {
    p.d = std::clamp(p.d, 0.0, 1.0);
    p.f = std::clamp(p.f, 0.0, 1.0);
    p.d_star = std::clamp(p.d_star, p.d, 1.0);
    return p;
}

} // namespace

IVIMFitResult fit_ivim(const IVIMSignal& signal) {
    signal.validate();
    const std::size_t n = signal.b_values.size();
    const std::vector<double>& b = signal.b_values;

    // Normalize so the b=0 sample is exactly 1.
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = signal.ratios[i] / signal.ratios[0];

    // Stage 1: log-linear fit over the high-b segment, where the fast
    // component has decayed away: ln S = ln(1-f) - b d.
    double sb = 0.0, sl = 0.0, sbb = 0.0, sbl = 0.0;
    int m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (b[i] < ivim_config::kSegmentedSplitB) continue;
        double lnv = std::log(y[i]);
        sb += b[i];
        sl += lnv;
        sbb += b[i] * b[i];
        sbl += b[i] * lnv;
        ++m;
    }
    double denom = m * sbb - sb * sb;
    double slope = denom != 0.0 ? (m * sbl - sb * sl) / denom : 0.0;
    double intercept = (sl - slope * sb) / m;
    double d0 = std::clamp(-slope, 0.0, 1.0);
    double f0 = std::clamp(1.0 - std::exp(intercept), 0.0, 0.999);

    // Stage 2: coarse log grid for d_star at fixed (d0, f0).
    double lo = std::max(10.0 * d0, 1e-5);
    double hi = ivim_config::kDstarSearchMax;
    if (lo > hi) lo = hi;
    IVIMParams best{d0, lo, f0};
    double best_sse = std::numeric_limits<double>::infinity();
    for (int k = 0; k < ivim_config::kDstarGridPoints; ++k) {
        double t = static_cast<double>(k) / (ivim_config::kDstarGridPoints - 1);
        IVIMParams p{d0, lo * std::pow(hi / lo, t), f0};
        double s = sse_of(p, b, y);
        if (s < best_sse) {
            best_sse = s;
            best = p;
        }
    }

    // Stage 3: damped Gauss-Newton over all samples.
    IVIMParams p = clamp_params(best);
    double sse = sse_of(p, b, y);
    double lambda = 1e-3;
    IVIMFitResult out;
    int it = 0;
    bool converged = false;
    for (; it < ivim_config::kMaxIterations; ++it) {
        double jtj[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
        double jtr[3] = {0, 0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            double e_slow = std::exp(-b[i] * p.d);
            double e_fast = std::exp(-b[i] * (p.d + p.d_star));
            double model = (1.0 - p.f) * e_slow + p.f * e_fast;
            double r = model - y[i];
            double j[3];
            j[0] = -b[i] * ((1.0 - p.f) * e_slow + p.f * e_fast); // d model / d d
            j[1] = -b[i] * p.f * e_fast;                          // d model / d d_star
            j[2] = e_fast - e_slow;                               // d model / d f
            for (int a = 0; a < 3; ++a) {
                jtr[a] += j[a] * r;
                for (int c = 0; c < 3; ++c) jtj[a][c] += j[a] * j[c];
            }
        }

        bool stepped = false;
        for (int tries = 0; tries < 12; ++tries) {
            double a[3][3];
            double rhs[3];
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) a[r][c] = jtj[r][c];
                a[r][r] += lambda * jtj[r][r] + 1e-30;
                rhs[r] = -jtr[r];
            }
            double delta[3];
            if (solve3(a, rhs, delta)) {
                IVIMParams trial = clamp_params({p.d + delta[0], p.d_star + delta[1], p.f + delta[2]});
                double trial_sse = sse_of(trial, b, y);
                if (trial_sse <= sse) {
                    double step = std::max({std::fabs(trial.d - p.d),
                                            std::fabs(trial.d_star - p.d_star),
                                            std::fabs(trial.f - p.f)});
                    p = trial;
                    sse = trial_sse;
                    lambda = std::max(lambda / 3.0, 1e-12);
                    stepped = true;
                    if (step <= ivim_config::kStepTol) converged = true;
                    break;
                }
            }
            lambda = std::min(lambda * 4.0, 1e14);
        }
        if (converged || !stepped) {
            converged = converged || !stepped; // no acceptable step left: at a minimum
            ++it;
            break;
        }
    }

    out.params = p;
    out.residual_rms = std::sqrt(sse / static_cast<double>(n));
    out.converged = converged;
    out.iterations = it;
    return out;
}

DmapBuildResult build_dmap(const std::vector<ScalarGrid3>& dwi_stack,
                           const std::vector<double>& b_values, const LabelGrid3& mask,
                           double max_residual_rms) {
    if (dwi_stack.empty() || dwi_stack.size() != b_values.size())
        fail(errc::invalid_argument, "build_dmap: stack and b-value list must match");
    for (const auto& g : dwi_stack) {
        g.validate();
        require_same_geometry(g.geom, mask.geom, "build_dmap");
    }
    mask.validate();

    DmapBuildResult res;
    res.dmap = ScalarGrid3(mask.geom, UnitTag::d_value_mm2_per_s,
                           std::numeric_limits<double>::quiet_NaN());

    IVIMSignal sig;
    sig.b_values = b_values;
    sig.ratios.resize(b_values.size());
    const std::size_t nvox = mask.geom.voxel_count();
    for (std::size_t i = 0; i < nvox; ++i) {
        auto label = static_cast<TissueLabel>(mask.labels[i]);
        if (label == TissueLabel::necrosis) {
            res.dmap.values[i] = 0.0; // convention: necrotic tissue carries d = 0
            continue;
        }
        if (label != TissueLabel::tumor) continue;
        double s0 = dwi_stack[0].values[i];
        bool ok = std::isfinite(s0) && s0 > 0.0;
        if (ok) {
            for (std::size_t k = 0; k < b_values.size(); ++k) {
                double s = dwi_stack[k].values[i];
                if (!std::isfinite(s) || !(s > 0.0)) {
                    ok = false;
                    break;
                }
                sig.ratios[k] = s / s0;
            }
        }
        if (!ok) {
            ++res.invalid_signal_voxels;
            continue;
        }
        IVIMFitResult fit = fit_ivim(sig);
        if (max_residual_rms > 0.0 && fit.residual_rms > max_residual_rms) {
            ++res.residual_rejected_voxels;
            continue;
        }
        res.dmap.values[i] = fit.params.d;
    }
    return res;
}

} // namespace dwiplan
