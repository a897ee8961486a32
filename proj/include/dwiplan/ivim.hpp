#pragma once

#include <cstddef>
#include <vector>

#include "dwiplan/grid.hpp"

namespace dwiplan {

// Bi-exponential diffusion parameters: slow (tissue) coefficient d, fast
// (pseudo-diffusion) excess d_star, perfusion fraction f. Units mm^2/s.
struct IVIMParams {
    double d = 0.0;
    double d_star = 0.0;
    double f = 0.0;
};

// Signal attenuation samples S(b)/S(0) at the acquired b-values.
struct IVIMSignal {
    std::vector<double> b_values; // s/mm^2, ascending, first entry 0
    std::vector<double> ratios;   // positive

    void validate() const;
};

// S(b)/S(0) = (1-f) exp(-b d) + f exp(-b (d + d_star)).
double forward_ivim(const IVIMParams& p, double b);
IVIMSignal forward_ivim(const IVIMParams& p, const std::vector<double>& b_values);

struct IVIMFitResult {
    IVIMParams params;
    double residual_rms = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Segmented initialization (log-linear fit over b >= split for d and f, coarse
// d_star grid) followed by a damped Gauss-Newton refinement of all three
// parameters over every b-value. Bounds kept during refinement: d >= 0,
// f in [0,1], d_star >= d (rates stay ordered, which is what rules out the
// swapped mode). Deterministic: no randomness, fixed iteration caps.
IVIMFitResult fit_ivim(const IVIMSignal& signal);

struct DmapBuildResult {
    ScalarGrid3 dmap;                  // d at tumor voxels, 0 at necrosis, NaN elsewhere
    std::size_t invalid_signal_voxels = 0; // non-positive S(0) or S(b); left NaN
    std::size_t residual_rejected_voxels = 0;
};

// Voxel-wise fit over the tumor mask. `dwi_stack` holds one aligned grid per
// b-value. Necrosis voxels are not fitted; they carry the conventional value 0.
// Voxels whose fit residual RMS exceeds `max_residual_rms` are dropped to NaN
// (default: no gate).
DmapBuildResult build_dmap(const std::vector<ScalarGrid3>& dwi_stack,
                           const std::vector<double>& b_values, const LabelGrid3& mask,
                           double max_residual_rms = 0.0);

// Fitting constants; exposed for tests.
namespace ivim_config {
constexpr double kSegmentedSplitB = 200.0; // s/mm^2
constexpr double kDstarSearchMax = 0.1;    // mm^2/s
constexpr int kDstarGridPoints = 40;
constexpr int kMaxIterations = 200;
constexpr double kStepTol = 1e-12;
} // namespace ivim_config

} // namespace dwiplan
