// Synthetic phantoms, virtual-biopsy sampling, and the Monte Carlo comparison
// of guided vs constrained vs random biopsy strategies.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dwiplan/density.hpp"
#include "dwiplan/grid.hpp"
#include "dwiplan/histogram.hpp"
#include "dwiplan/needle.hpp"
#include "dwiplan/partition.hpp"

namespace dwiplan {

struct Phantom {
    ScalarGrid3 dmap;       // mm^2/s; 0 at necrosis, NaN at fat and outside
    LabelGrid3 labels;
    ScalarGrid3 rho_truth;  // cells/mm^3; NaN off tumor
    DensityModel3d model_truth;
    double mu_rho = 0.0;    // mean of rho_truth over tumor voxels
    double sigma_rho = 0.0; // population SD over tumor voxels
    std::uint64_t seed = 0;
};

struct PhantomSpec {
    std::array<int, 3> dims{64, 48, 1};
    std::array<double, 3> spacing_mm{0.6, 0.6, 3.0};
    double rx_mm = 13.0; // tumor semi-axes; diameter stays reachable under
    double ry_mm = 9.5;  // the 22 mm depth cap so guided plans exist
    double d_lo = 0.9e-3; // tumor D range after rescale, mm^2/s
    double d_hi = 3.5e-3;
    int n_bumps = 8;                   // smooth field = sum of seeded bumps
    double necrosis_radius_mm = 0.0;   // 0 disables the blob
    Vec2 necrosis_offset_mm{0.0, 0.0}; // from the tumor center
    double fat_radius_mm = 0.0;
    Vec2 fat_offset_mm{0.0, 0.0};
    double sigma_noise = 6.0e4; // cells/mm^3
    DensityModel3d model = paper_density_model_3d();
    std::uint64_t seed = 1;

    void validate() const;
};

// Per tumor voxel: max(0, slope*D + intercept + eps), eps ~ N(0, sigma^2)
// drawn from a per-voxel stream so worker count cannot change the map. NaN
// everywhere else.
ScalarGrid3 synthesize_density_map(const ScalarGrid3& dmap, const LabelGrid3& labels,
                                   const DensityModel3d& model, double sigma_noise,
                                   std::uint64_t seed);

Phantom generate_phantom(const PhantomSpec& spec);

enum class Strategy { guided, constrained, random };
const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct BiopsySample {
    double d_value = 0.0; // mean D over the tip window
    double rho = 0.0;     // mean rho_truth over the tip window, cells/mm^3
    int intervention_id = -1;
    int path_index = -1;
};

struct StrategyOptions {
    int n_reps = 20000;                // random draws
    std::size_t max_interventions = 0; // constrained cap; 0 = exhaustive
    int workers = 1;
    std::uint64_t seed = 1;
    double target_area_mm2 = 6.41; // guided superpixel size
    TargetMode target_mode = TargetMode::automatic;
    double exclusion_boundary_mm = 2.5;
};

struct StrategyReport {
    Strategy strategy = Strategy::random;
    int n_biopsy = 0;
    std::vector<double> rho_bar_samples; // one per intervention
    std::vector<double> s_samples;       // same length; NaN when n_biopsy = 1
    std::vector<int> access_indices;     // same length
    double mu_rho_ref = 0.0;
    double sigma_rho_ref = 0.0;
    // Guided only: one refit line and load estimate per access point.
    std::vector<std::vector<BiopsySample>> guided_samples;
    std::vector<DensityModel2d> guided_fits; // slope in cells*s/mm^5 here
    std::vector<double> cell_load_estimates;
    std::size_t enumerated = 0; // constrained: total before any cap
};

// guided: per-access best plans from the partition pipeline; constrained:
// exhaustive enumeration (optionally capped by deterministic striding);
// random: opt.n_reps draws with per-draw seeds opt.seed ^ rep.
StrategyReport run_strategy(const Phantom& phantom, Strategy strategy,
                            const NeedleConstraints& c, int n_biopsy,
                            const StrategyOptions& opt);

struct ComparisonRow {
    Strategy strategy = Strategy::random;
    int n_biopsy = 0;
    std::size_t interventions = 0;
    double rho_bar_mean = 0.0;
    double rho_bar_sd = 0.0;
    double hit_fraction = 0.0;      // |rho_bar - mu| <= 0.1 mu
    double modal_s = 0.0;           // NaN when no finite s
    double modal_s_distance = 0.0;  // |modal_s - sigma|
};

struct StrategyComparison {
    double mu_rho_ref = 0.0;
    double sigma_rho_ref = 0.0;
    std::vector<ComparisonRow> rows;          // one per report, input order
    std::vector<double> rho_bar_edges;        // fixed bins: [0, 2 mu] / 64
    std::vector<double> s_edges;              // fixed bins: [0, 4 sigma] / 64
    std::vector<Histogram> rho_bar_hists;     // per row
    std::vector<Histogram> s_hists;
};

// Summary rows plus fixed-edge histograms; all reports must carry the same
// phantom references.
StrategyComparison compare_report(const std::vector<StrategyReport>& reports);

// File interchange between the simulate and report stages. NaN serializes as
// JSON null and parses back to NaN.
std::string strategy_report_to_json(const StrategyReport& report);
StrategyReport strategy_report_from_json(const std::string& text);

// Phantom sidecar: the scalar facts that do not live in the grid files.
std::string phantom_meta_to_json(const Phantom& phantom);
void phantom_meta_from_json(const std::string& text, Phantom& phantom);

} // namespace dwiplan
