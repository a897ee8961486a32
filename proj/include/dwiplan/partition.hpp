// Superpixel / supervoxel partitioning of the D-map, optimal biopsy target
// D-values, and candidate-region selection.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dwiplan/grid.hpp"

namespace dwiplan {

struct RegionStats {
    int id = -1;
    double mean_d = 0.0;  // mm^2/s
    double var_d = 0.0;   // population variance of member D values
    double size = 0.0;    // mm^2 for slice partitions, mm^3 for volume ones
    std::size_t cell_count = 0;
    std::array<double, 3> centroid_mm{0.0, 0.0, 0.0};
    double min_boundary_distance_mm = 0.0; // closest member cell to the outline
    bool excluded = false;
    std::string exclusion_reason;
};

struct SuperpixelPartition {
    GridGeometry geom;
    std::vector<std::int32_t> region_labels; // -1 where not partitioned
    std::vector<RegionStats> regions;        // regions[i].id == i
    bool three_d = false;
    int slice = -1;      // slice partitions only
    std::string warning; // nonempty when a fallback was taken
};

// SLIC-style partition of one slice into regions of about target_area_mm2.
// The domain is every inside cell of the slice with a finite D value.
SuperpixelPartition superpixels_2d(const ScalarGrid3& dmap, const LabelGrid3& mask,
                                   int slice_index, double target_area_mm2);

// Volume analogue with regions of about target_volume_mm3.
SuperpixelPartition supervoxels_3d(const ScalarGrid3& dmap, const LabelGrid3& mask,
                                   double target_volume_mm3);

enum class TargetMode { automatic, symmetric, asymmetric };
enum class TargetFormula { symmetric_eq4, asymmetric_eq5 };

struct OptimalDTargets {
    int n_biopsy = 0;
    std::vector<double> targets; // ascending, mm^2/s
    TargetFormula mode = TargetFormula::symmetric_eq4;
    double d_min = 0.0;    // 2nd percentile
    double d_max = 0.0;    // 98th percentile
    double d_median = 0.0;
};

// Evenly spread target D values over the 2nd..98th percentile span of the
// D distribution; asymmetric distributions get the median-anchored spread.
// Automatic mode switches on |sample skewness| > 0.5.
OptimalDTargets optimal_d_values(const std::vector<double>& d_values, int n_biopsy,
                                 TargetMode mode);

// Same progression arithmetic from precomputed percentiles. In automatic mode
// the caller must supply the sample skewness; other modes ignore it.
OptimalDTargets optimal_d_targets_from_stats(double d_min, double d_max, double d_median,
                                             double mean_d, int n_biopsy, TargetMode mode,
                                             double skewness = 0.0);

struct ExclusionRules {
    double min_boundary_mm = 2.5;
    const LabelGrid3* overlap_mask = nullptr; // necrosis / fat labels checked here
};

struct CandidatePick {
    double target_d = 0.0;
    int region_id = -1;
    double mean_d = 0.0;
    double abs_error = 0.0;
};

struct CandidateSelection {
    std::vector<CandidatePick> picks;        // one per target, target order
    std::vector<RegionStats> regions;        // all regions with exclusion flags filled
    std::size_t excluded_boundary = 0;
    std::size_t excluded_necrosis = 0;
    std::size_t excluded_fat = 0;
};

// Greedy best-fit-first assignment of distinct regions to targets after the
// exclusion rules. Ties break toward the larger boundary distance, then the
// lower region id.
CandidateSelection select_candidates(const SuperpixelPartition& partition,
                                     const OptimalDTargets& targets,
                                     const ExclusionRules& rules);

} // namespace dwiplan
