// Pipeline configuration: one JSON document shared by every subcommand.
#pragma once

#include <cstdint>
#include <string>

#include "dwiplan/needle.hpp"

namespace dwiplan {

struct PipelineConfig {
    NeedleConstraints constraints;
    int n_biopsy = 4;
    int upsample = 20;                    // interpolation factor U
    double superpixel_area_mm2 = 6.41;
    double supervoxel_volume_mm3 = 4.23;
    double percentile_lo = 2.0;
    double percentile_hi = 98.0;
    double exclusion_boundary_mm = 2.5;
    double sigma_noise = 6e4;             // cells/mm^3
    std::uint64_t seed = 1;

    void validate() const;
};

std::string config_to_json(const PipelineConfig& cfg);
// Missing fields keep their defaults; unknown fields are rejected.
PipelineConfig config_from_json(const std::string& text);

PipelineConfig load_config(const std::string& path);

// BIOPSY_PLANNER_SEED, when set, wins over the configured seed.
void apply_env_seed(PipelineConfig& cfg);

} // namespace dwiplan
