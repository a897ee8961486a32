#include "dwiplan/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dwiplan/error.hpp"

namespace dwiplan {

namespace {

using ordered = nlohmann::ordered_json;

ordered constraints_json(const NeedleConstraints& c) {
    ordered j;
    j["fan_deg"] = c.fan_deg;
    j["max_depth_mm"] = c.max_depth_mm;
    j["min_depth_mm"] = c.min_depth_mm;
    j["depth_step_mm"] = c.depth_step_mm;
    j["access_spacing_mm"] = c.access_spacing_mm;
    j["angle_step_deg"] = c.angle_step_deg;
    j["tip_width_mm"] = c.tip_width_mm;
    j["tip_length_mm"] = c.tip_length_mm;
    j["forbid_necrosis_traversal"] = c.forbid_necrosis_traversal;
    return j;
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void check_known_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                      const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) ok = true;
        if (!ok) fail(errc::invalid_spec, "config: unknown " + where + " field \"" + it.key() + "\"");
    }
}

} // namespace

void PipelineConfig::validate() const {
    constraints.validate();
    if (n_biopsy < 1) fail(errc::invalid_spec, "config: n_biopsy must be >= 1");
    if (upsample < 1) fail(errc::invalid_spec, "config: upsample factor must be >= 1");
    if (!(superpixel_area_mm2 > 0.0))
        fail(errc::invalid_spec, "config: superpixel_area_mm2 must be positive");
    if (!(supervoxel_volume_mm3 > 0.0))
        fail(errc::invalid_spec, "config: supervoxel_volume_mm3 must be positive");
    if (!(percentile_lo >= 0.0 && percentile_lo < percentile_hi && percentile_hi <= 100.0))
        fail(errc::invalid_spec, "config: need 0 <= percentile_lo < percentile_hi <= 100");
    if (exclusion_boundary_mm < 0.0)
        fail(errc::invalid_spec, "config: exclusion_boundary_mm must be >= 0");
    if (sigma_noise < 0.0) fail(errc::invalid_spec, "config: sigma_noise must be >= 0");
}

std::string config_to_json(const PipelineConfig& cfg) {
    ordered j;
    j["constraints"] = constraints_json(cfg.constraints);
    j["n_biopsy"] = cfg.n_biopsy;
    j["upsample"] = cfg.upsample;
    j["superpixel_area_mm2"] = cfg.superpixel_area_mm2;
    j["supervoxel_volume_mm3"] = cfg.supervoxel_volume_mm3;
    j["percentile_lo"] = cfg.percentile_lo;
    j["percentile_hi"] = cfg.percentile_hi;
    j["exclusion_boundary_mm"] = cfg.exclusion_boundary_mm;
    j["sigma_noise"] = cfg.sigma_noise;
    j["seed"] = cfg.seed;
    return j.dump(2) + "\n";
}

PipelineConfig config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(errc::format_error, std::string("config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) fail(errc::format_error, "config: top level must be a JSON object");
    check_known_keys(j,
                     {"constraints", "n_biopsy", "upsample", "superpixel_area_mm2",
                      "supervoxel_volume_mm3", "percentile_lo", "percentile_hi",
                      "exclusion_boundary_mm", "sigma_noise", "seed"},
                     "top-level");

    PipelineConfig cfg;
    try {
        if (auto it = j.find("constraints"); it != j.end()) {
            const auto& c = *it;
            check_known_keys(c,
                             {"fan_deg", "max_depth_mm", "min_depth_mm", "depth_step_mm",
                              "access_spacing_mm", "angle_step_deg", "tip_width_mm",
                              "tip_length_mm", "forbid_necrosis_traversal"},
                             "constraints");
            take(c, "fan_deg", cfg.constraints.fan_deg);
            take(c, "max_depth_mm", cfg.constraints.max_depth_mm);
            take(c, "min_depth_mm", cfg.constraints.min_depth_mm);
            take(c, "depth_step_mm", cfg.constraints.depth_step_mm);
            take(c, "access_spacing_mm", cfg.constraints.access_spacing_mm);
            take(c, "angle_step_deg", cfg.constraints.angle_step_deg);
            take(c, "tip_width_mm", cfg.constraints.tip_width_mm);
            take(c, "tip_length_mm", cfg.constraints.tip_length_mm);
            take(c, "forbid_necrosis_traversal", cfg.constraints.forbid_necrosis_traversal);
        }
        take(j, "n_biopsy", cfg.n_biopsy);
        take(j, "upsample", cfg.upsample);
        take(j, "superpixel_area_mm2", cfg.superpixel_area_mm2);
        take(j, "supervoxel_volume_mm3", cfg.supervoxel_volume_mm3);
        take(j, "percentile_lo", cfg.percentile_lo);
        take(j, "percentile_hi", cfg.percentile_hi);
        take(j, "exclusion_boundary_mm", cfg.exclusion_boundary_mm);
        take(j, "sigma_noise", cfg.sigma_noise);
        take(j, "seed", cfg.seed);
    } catch (const nlohmann::json::exception& e) {
        fail(errc::format_error, std::string("config: bad field type: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_error, "cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

void apply_env_seed(PipelineConfig& cfg) {
    const char* v = std::getenv("BIOPSY_PLANNER_SEED");
    if (!v || !*v) return;
    char* end = nullptr;
    unsigned long long parsed = std::strtoull(v, &end, 10);
    if (end == v || *end != '\0')
        fail(errc::invalid_spec, std::string("BIOPSY_PLANNER_SEED is not an integer: ") + v);
    cfg.seed = static_cast<std::uint64_t>(parsed);
}

} // namespace dwiplan
