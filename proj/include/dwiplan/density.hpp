// Cell-density models: linear density-vs-D fits, cancer fraction, 2d->3d scaling,
// density maps, cell load, Chow test, prediction intervals.
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dwiplan/grid.hpp"

namespace dwiplan {

// rho2d = k2d * D + d2d, with enough fit context for interval math.
struct DensityModel2d {
    double k2d = 0.0;        // slope, cells*s/mm^4
    double d2d = 0.0;        // intercept, cells/mm^2
    double pearson_r = 0.0;
    std::size_t n = 0;
    double residual_se = 0.0; // cells/mm^2
    double sxx = 0.0;         // sum of (x - x_mean)^2
    double x_mean = 0.0;
};

// rho_c2d = kc * rho2d - dc, valid above valid_from.
struct CancerFractionModel {
    double kc = 0.0;         // dimensionless
    double dc = 0.0;         // cells/mm^2
    double valid_from = 0.0; // cells/mm^2
};

// rho3d = slope * D + intercept (D in mm^2/s).
struct DensityModel3d {
    double slope = 0.0;     // cells*s/mm^5, negative for tumor tissue
    double intercept = 0.0; // cells/mm^3

    double zero_crossing_d() const { return slope < 0.0 ? -intercept / slope : 0.0; }
};

// Linear 2d->3d density scaling per cell class.
struct DensityScale {
    double m_c = 96.0;   // 1/mm, cancer
    double m_nc = 115.0; // 1/mm, non-cancer
};

DensityModel2d paper_density_model_2d();
CancerFractionModel paper_cancer_fraction_model();
DensityModel3d paper_density_model_3d();

// Ordinary least squares on (x, y); n >= 2 and x must vary.
DensityModel2d fit_linear(const std::vector<double>& x, const std::vector<double>& y);

double predict_density_2d(const DensityModel2d& model, double d);   // clamped at 0
double cancer_density(const CancerFractionModel& model, double rho_2d); // clamped at 0
double predict_density_3d(const DensityModel3d& model, double d);   // clamped at 0
double scale_2d_to_3d(double rho_2d, double m);

struct DensityMaps {
    ScalarGrid3 total;      // cells/mm^2
    ScalarGrid3 cancer;     // cells/mm^2
    ScalarGrid3 non_cancer; // cells/mm^2
    std::size_t cancer_extrapolated_voxels = 0; // finite voxels below valid_from
};

// Voxel-wise Eq. application over a D map; NaN propagates.
DensityMaps density_maps(const ScalarGrid3& dmap, const DensityModel2d& model2d,
                         const CancerFractionModel& cancer);

// Sum of rho3d * voxel_volume over tumor-labeled voxels with finite values.
double cell_load(const ScalarGrid3& rho3d_map, const LabelGrid3& mask);

struct ChowResult {
    double f_stat = 0.0;
    double p_value = 1.0;
};

// Equality-of-regressions test between two (x, y) groups, k = 2 parameters.
ChowResult chow_test(const std::vector<double>& xa, const std::vector<double>& ya,
                     const std::vector<double>& xb, const std::vector<double>& yb);

// Two-sided prediction / confidence intervals at the given level (e.g. 0.95).
std::pair<double, double> prediction_interval(const DensityModel2d& model, double x, double level);
std::pair<double, double> confidence_interval(const DensityModel2d& model, double x, double level);

std::string density_model_to_json(const DensityModel2d& model);
DensityModel2d density_model_from_json(const std::string& text);

} // namespace dwiplan
