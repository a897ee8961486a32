// Constrained needle-path geometry: exhaustive intervention enumeration,
// guided search toward candidate regions, random interventions.
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dwiplan/grid.hpp"
#include "dwiplan/partition.hpp"
#include "dwiplan/roi.hpp"

namespace dwiplan {

struct NeedleConstraints {
    double fan_deg = 20.0;          // max pairwise angular separation per intervention
    double max_depth_mm = 22.0;
    double depth_step_mm = 2.5;
    double min_depth_mm = 2.5;
    double access_spacing_mm = 1.0; // boundary resampling step
    double angle_step_deg = 5.0;    // global orientation grid
    double tip_width_mm = 0.5;      // sampling window at the tip
    double tip_length_mm = 2.5;
    bool forbid_necrosis_traversal = false; // shaft may cross necrosis unless set

    std::vector<double> depth_grid() const; // {min, min+step, ...} <= max
    std::vector<double> angle_grid() const; // {0, step, ...} < 360
    void validate() const;
};

struct NeedlePath {
    double angle_deg = 0.0;
    double depth_mm = 0.0;
    ROIRect2 tip_roi{};
    double d_value = std::numeric_limits<double>::quiet_NaN(); // mean D over tip ROI
};

struct Intervention {
    int access_index = -1; // position in the boundary resampling
    Vec2 access_mm{};
    std::vector<NeedlePath> paths; // ascending (angle_deg, depth_mm)
    double score = std::numeric_limits<double>::quiet_NaN(); // guided ranking only

    std::vector<double> biopsy_ds() const;
};

// All admissible single paths from one boundary access point.
struct AccessSite {
    int index = -1;
    Vec2 pos_mm{};
    std::vector<NeedlePath> paths; // ascending (angle_deg, depth_mm)
};

// Sampling rectangle for a path: long axis along the direction, distal edge
// at the tip, extending tip_length_mm back toward the access point. Geometry
// only; no mask checks.
ROIRect2 tip_rect(Vec2 access_mm, double angle_deg, double depth_mm, int slice_index,
                  const NeedleConstraints& c);

// Same rectangle, checked against the mask. The window must fit (depth >=
// tip_length_mm), cover at least one voxel center, and lie fully on tumor
// pixels; otherwise tip_outside.
ROIRect2 tip_roi(const LabelGrid3& mask, int slice_index, Vec2 access_mm, double angle_deg,
                 double depth_mm, const NeedleConstraints& c);

// Access points from the 1-contour resampling with their admissible
// (angle, depth) grids. A path is admissible when its first 0.5 mm stays
// inside the mask, the tip lands on a tumor pixel, and its tip window passes
// the tip_roi checks. Sites with no admissible path are kept (empty). When a
// D-map is supplied (same geometry) each path's d_value is filled.
std::vector<AccessSite> access_sites(const LabelGrid3& mask, int slice_index,
                                     const NeedleConstraints& c,
                                     const ScalarGrid3* dmap = nullptr);

// Visits every n_biopsy-subset of site.paths (as ascending index vectors, in
// lexicographic order) whose angles satisfy the fan constraint. Return false
// from the visitor to stop early.
void for_each_path_set(const AccessSite& site, const NeedleConstraints& c, int n_biopsy,
                       const std::function<bool(const std::vector<int>&)>& visit);

// Every admissible intervention, ordered by access point along the boundary
// and lexicographic path sets within one access. Empty when nothing is
// admissible.
std::vector<Intervention> enumerate_interventions(const LabelGrid3& mask, int slice_index,
                                                  const NeedleConstraints& c, int n_biopsy,
                                                  const ScalarGrid3* dmap = nullptr);

// Interventions whose tip windows cover all candidate regions under some
// path-to-candidate bijection, scored by the total |tip D - target D| of the
// best bijection. Grouped by access point, groups ordered by their best
// score, best first within a group. The partition fixes the slice; its
// geometry must match the D-map and mask. Throws infeasible_plan with
// per-candidate reachability counts when nothing qualifies.
std::vector<Intervention> guided_search(const SuperpixelPartition& partition,
                                        const std::vector<CandidatePick>& candidates,
                                        const ScalarGrid3& dmap, const LabelGrid3& mask,
                                        const NeedleConstraints& c);

// One admissible intervention drawn at random: access point uniform along the
// boundary, fan center uniform over the admissible angles there, paths
// uniform over the admissible pairs inside that fan window. Rejects and
// redraws (up to 1000 attempts) when the window cannot seat n_biopsy distinct
// paths; deterministic for a fixed seed.
Intervention random_intervention(const LabelGrid3& mask, int slice_index,
                                 const NeedleConstraints& c, int n_biopsy,
                                 std::uint64_t rng_seed, const ScalarGrid3* dmap = nullptr);

// Same draw from precomputed sites; repeated-draw loops use this.
Intervention random_intervention(const std::vector<AccessSite>& sites,
                                 const NeedleConstraints& c, int n_biopsy,
                                 std::uint64_t rng_seed);

std::string intervention_to_json(const Intervention& iv);
std::string plan_to_json(const std::vector<Intervention>& plan);

} // namespace dwiplan
