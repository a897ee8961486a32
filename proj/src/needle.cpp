#include "dwiplan/needle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "dwiplan/error.hpp"
#include "dwiplan/mask_geometry.hpp"
#include "dwiplan/rng.hpp"

namespace dwiplan {

namespace {

constexpr double kGridEps = 1e-9;

// Tissue under a world point: the label of the pixel whose center is nearest.
TissueLabel label_at(const LabelGrid3& mask, int slice, Vec2 p) {
    const auto& g = mask.geom;
    int x = static_cast<int>(std::llround((p.x - g.origin_mm[0]) / g.spacing_mm[0]));
    int y = static_cast<int>(std::llround((p.y - g.origin_mm[1]) / g.spacing_mm[1]));
    if (!g.contains(x, y, slice)) return TissueLabel::outside;
    return mask.at(x, y, slice);
}

bool first_half_mm_inside(const LabelGrid3& mask, int slice, Vec2 access, Vec2 u) {
    return label_at(mask, slice, access + 0.25 * u) != TissueLabel::outside &&
           label_at(mask, slice, access + 0.5 * u) != TissueLabel::outside;
}

bool shaft_clear_of_necrosis(const LabelGrid3& mask, int slice, Vec2 access, Vec2 u,
                             double depth) {
    for (double t = 0.0; t <= depth + kGridEps; t += 0.25)
        if (label_at(mask, slice, access + std::min(t, depth) * u) == TissueLabel::necrosis)
            return false;
    return true;
}

// The tip window must sit on tumor tissue only: its corners, its center, and
// every voxel center it covers.
bool tip_window_on_tumor(const LabelGrid3& mask, int slice, const ROIRect2& rect) {
    Vec2 u = rect.direction;
    Vec2 n{-u.y, u.x};
    double hl = 0.5 * rect.length_mm;
    double hw = 0.5 * rect.width_mm;
    const Vec2 probes[5] = {
        rect.center_mm,
        rect.center_mm + hl * u + hw * n,
        rect.center_mm + hl * u - hw * n,
        rect.center_mm - hl * u + hw * n,
        rect.center_mm - hl * u - hw * n,
    };
    for (const Vec2& p : probes)
        if (label_at(mask, slice, p) != TissueLabel::tumor) return false;

    auto cells = roi_cells(mask.geom, rect);
    if (cells.empty()) return false;
    for (auto [x, y] : cells)
        if (mask.at(x, y, slice) != TissueLabel::tumor) return false;
    return true;
}

bool fan_ok(const std::vector<NeedlePath>& paths, const std::vector<int>& chosen,
            double cand_angle, double fan_deg) {
    for (int j : chosen)
        if (angular_separation_deg(paths[j].angle_deg, cand_angle) > fan_deg + kGridEps)
            return false;
    return true;
}

} // namespace

std::vector<double> NeedleConstraints::depth_grid() const {
    std::vector<double> out;
    for (int k = 0;; ++k) {
        double d = min_depth_mm + k * depth_step_mm;
        if (d > max_depth_mm + kGridEps) break;
        out.push_back(d);
    }
    return out;
}

std::vector<double> NeedleConstraints::angle_grid() const {
    std::vector<double> out;
    for (int k = 0;; ++k) {
        double a = k * angle_step_deg;
        if (a >= 360.0 - kGridEps) break;
        out.push_back(a);
    }
    return out;
}

void NeedleConstraints::validate() const {
    if (!(fan_deg > 0.0) || !(max_depth_mm > 0.0) || !(depth_step_mm > 0.0) ||
        !(min_depth_mm > 0.0) || !(access_spacing_mm > 0.0) || !(angle_step_deg > 0.0) ||
        !(tip_width_mm > 0.0) || !(tip_length_mm > 0.0))
        fail(errc::invalid_argument, "needle constraints: all parameters must be positive");
    if (min_depth_mm > max_depth_mm + kGridEps)
        fail(errc::invalid_argument, "needle constraints: min depth exceeds max depth");
}

std::vector<double> Intervention::biopsy_ds() const {
    std::vector<double> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(p.d_value);
    return out;
}

ROIRect2 tip_rect(Vec2 access_mm, double angle_deg, double depth_mm, int slice_index,
                  const NeedleConstraints& c) {
    Vec2 u = unit_from_deg(angle_deg);
    ROIRect2 r;
    r.slice_index = slice_index;
    r.center_mm = access_mm + (depth_mm - 0.5 * c.tip_length_mm) * u;
    r.direction = u;
    r.width_mm = c.tip_width_mm;
    r.length_mm = c.tip_length_mm;
    return r;
}

ROIRect2 tip_roi(const LabelGrid3& mask, int slice_index, Vec2 access_mm, double angle_deg,
                 double depth_mm, const NeedleConstraints& c) {
    c.validate();
    if (depth_mm < c.tip_length_mm - kGridEps)
        fail(errc::tip_outside, "tip_roi: depth too short to seat the sampling window");
    ROIRect2 r = tip_rect(access_mm, angle_deg, depth_mm, slice_index, c);
    if (!tip_window_on_tumor(mask, slice_index, r))
        fail(errc::tip_outside, "tip_roi: sampling window leaves the tumor");
    return r;
}

std::vector<AccessSite> access_sites(const LabelGrid3& mask, int slice_index,
                                     const NeedleConstraints& c, const ScalarGrid3* dmap) {
    c.validate();
    mask.validate();
    if (dmap) {
        require_same_geometry(mask.geom, dmap->geom, "access_sites");
        require_unit(*dmap, UnitTag::d_value_mm2_per_s, "access_sites");
    }
    auto contour = boundary_contour(mask, slice_index, c.access_spacing_mm);
    const auto angles = c.angle_grid();
    const auto depths = c.depth_grid();

    std::vector<AccessSite> sites;
    sites.reserve(contour.points.size());
    for (std::size_t i = 0; i < contour.points.size(); ++i) {
        AccessSite site;
        site.index = static_cast<int>(i);
        site.pos_mm = contour.points[i];
        for (double a : angles) {
            Vec2 u = unit_from_deg(a);
            if (!first_half_mm_inside(mask, slice_index, site.pos_mm, u)) continue;
            for (double d : depths) {
                if (d < c.tip_length_mm - kGridEps) continue;
                Vec2 tip = site.pos_mm + d * u;
                if (label_at(mask, slice_index, tip) != TissueLabel::tumor) continue;
                ROIRect2 rect = tip_rect(site.pos_mm, a, d, slice_index, c);
                if (!tip_window_on_tumor(mask, slice_index, rect)) continue;
                if (c.forbid_necrosis_traversal &&
                    !shaft_clear_of_necrosis(mask, slice_index, site.pos_mm, u, d))
                    continue;
                NeedlePath p;
                p.angle_deg = a;
                p.depth_mm = d;
                p.tip_roi = rect;
                if (dmap) p.d_value = roi_mean_or_nan(*dmap, rect);
                site.paths.push_back(std::move(p));
            }
        }
        sites.push_back(std::move(site));
    }
    return sites;
}

void for_each_path_set(const AccessSite& site, const NeedleConstraints& c, int n_biopsy,
                       const std::function<bool(const std::vector<int>&)>& visit) {
    if (n_biopsy < 1)
        fail(errc::invalid_argument, "for_each_path_set: n_biopsy must be >= 1");
    const int m = static_cast<int>(site.paths.size());
    if (m < n_biopsy) return;

    std::vector<int> chosen;
    chosen.reserve(n_biopsy);
    bool stop = false;
    // Lexicographic descent; the fan check against every already-chosen path
    // keeps wrap-around angle sets exact.
    auto rec = [&](auto&& self, int from) -> void {
        if (stop) return;
        if (static_cast<int>(chosen.size()) == n_biopsy) {
            if (!visit(chosen)) stop = true;
            return;
        }
        int need = n_biopsy - static_cast<int>(chosen.size());
        for (int i = from; i <= m - need && !stop; ++i) {
            if (!fan_ok(site.paths, chosen, site.paths[i].angle_deg, c.fan_deg)) continue;
            chosen.push_back(i);
            self(self, i + 1);
            chosen.pop_back();
        }
    };
    rec(rec, 0);
}

namespace {

Intervention make_intervention(const AccessSite& site, const std::vector<int>& idx) {
    Intervention iv;
    iv.access_index = site.index;
    iv.access_mm = site.pos_mm;
    iv.paths.reserve(idx.size());
    for (int i : idx) iv.paths.push_back(site.paths[i]);
    return iv;
}

} // namespace

std::vector<Intervention> enumerate_interventions(const LabelGrid3& mask, int slice_index,
                                                  const NeedleConstraints& c, int n_biopsy,
                                                  const ScalarGrid3* dmap) {
    if (n_biopsy < 1)
        fail(errc::invalid_argument, "enumerate_interventions: n_biopsy must be >= 1");
    auto sites = access_sites(mask, slice_index, c, dmap);
    std::vector<Intervention> out;
    for (const auto& site : sites)
        for_each_path_set(site, c, n_biopsy, [&](const std::vector<int>& idx) {
            out.push_back(make_intervention(site, idx));
            return true;
        });
    return out;
}

namespace {

// Minimal total |tip D - target| over bijections path -> candidate, honoring
// the reach masks. Returns +inf when no bijection covers every candidate.
double best_assignment(const std::vector<double>& tip_d,
                       const std::vector<std::uint32_t>& reach,
                       const std::vector<double>& targets) {
    const int n = static_cast<int>(targets.size());
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(n, -1);
    std::uint32_t used = 0;
    double acc = 0.0;
    auto rec = [&](auto&& self, int j) -> void {
        if (j == n) {
            best = std::min(best, acc);
            return;
        }
        if (acc >= best) return;
        for (int k = 0; k < n; ++k) {
            if (used & (1u << k)) continue;
            if (!(reach[j] & (1u << k))) continue;
            used |= 1u << k;
            acc += std::fabs(tip_d[j] - targets[k]);
            self(self, j + 1);
            acc -= std::fabs(tip_d[j] - targets[k]);
            used &= ~(1u << k);
        }
    };
    rec(rec, 0);
    return best;
}

} // namespace

std::vector<Intervention> guided_search(const SuperpixelPartition& partition,
                                        const std::vector<CandidatePick>& candidates,
                                        const ScalarGrid3& dmap, const LabelGrid3& mask,
                                        const NeedleConstraints& c) {
    if (candidates.empty())
        fail(errc::invalid_argument, "guided_search: no candidate regions");
    if (candidates.size() > 16)
        fail(errc::invalid_argument, "guided_search: more than 16 candidates unsupported");
    if (partition.three_d)
        fail(errc::invalid_argument, "guided_search: needs a slice partition");
    require_same_geometry(partition.geom, dmap.geom, "guided_search");
    require_same_geometry(partition.geom, mask.geom, "guided_search");
    const int n = static_cast<int>(candidates.size());
    const int slice = partition.slice;

    auto sites = access_sites(mask, slice, c, &dmap);

    std::vector<double> targets(n);
    for (int k = 0; k < n; ++k) targets[k] = candidates[k].target_d;

    std::vector<std::vector<Intervention>> groups;
    std::vector<std::size_t> reach_paths(n, 0);  // admissible paths touching candidate k
    std::vector<std::size_t> reach_sites(n, 0);  // access points with such a path

    for (const auto& site : sites) {
        // Which candidates each path's tip window overlaps, as a bitmask.
        std::vector<std::uint32_t> touch(site.paths.size(), 0);
        std::vector<bool> site_reach(n, false);
        for (std::size_t i = 0; i < site.paths.size(); ++i) {
            if (!std::isfinite(site.paths[i].d_value)) continue;
            auto cells = roi_cells(partition.geom, site.paths[i].tip_roi);
            for (int k = 0; k < n; ++k) {
                const std::int32_t want = candidates[k].region_id;
                for (auto [x, y] : cells) {
                    if (partition.region_labels[partition.geom.index(x, y, slice)] == want) {
                        touch[i] |= 1u << k;
                        site_reach[k] = true;
                        ++reach_paths[k];
                        break;
                    }
                }
            }
        }
        for (int k = 0; k < n; ++k)
            if (site_reach[k]) ++reach_sites[k];

        std::vector<Intervention> here;
        for_each_path_set(site, c, n, [&](const std::vector<int>& idx) {
            std::vector<double> tip_d(n);
            std::vector<std::uint32_t> reach(n);
            for (int j = 0; j < n; ++j) {
                tip_d[j] = site.paths[idx[j]].d_value;
                reach[j] = touch[idx[j]];
            }
            double score = best_assignment(tip_d, reach, targets);
            if (!std::isfinite(score)) return true;
            Intervention iv = make_intervention(site, idx);
            iv.score = score;
            here.push_back(std::move(iv));
            return true;
        });
        if (!here.empty()) {
            std::stable_sort(here.begin(), here.end(),
                             [](const Intervention& a, const Intervention& b) {
                                 return a.score < b.score;
                             });
            groups.push_back(std::move(here));
        }
    }

    if (groups.empty()) {
        std::string msg = "guided_search: no intervention reaches all candidates;";
        for (int k = 0; k < n; ++k) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          " candidate %d (region %d, target %.6g): %zu paths from %zu access "
                          "points;",
                          k, candidates[k].region_id, targets[k], reach_paths[k],
                          reach_sites[k]);
            msg += buf;
        }
        fail(errc::infeasible_plan, msg);
    }

    // Access groups ranked by their best member; boundary order breaks ties.
    std::stable_sort(groups.begin(), groups.end(),
                     [](const std::vector<Intervention>& a, const std::vector<Intervention>& b) {
                         return a.front().score < b.front().score;
                     });
    std::vector<Intervention> out;
    for (auto& g : groups)
        out.insert(out.end(), std::make_move_iterator(g.begin()),
                   std::make_move_iterator(g.end()));
    return out;
}

Intervention random_intervention(const LabelGrid3& mask, int slice_index,
                                 const NeedleConstraints& c, int n_biopsy,
                                 std::uint64_t rng_seed, const ScalarGrid3* dmap) {
    auto sites = access_sites(mask, slice_index, c, dmap);
    return random_intervention(sites, c, n_biopsy, rng_seed);
}

Intervention random_intervention(const std::vector<AccessSite>& sites,
                                 const NeedleConstraints& c, int n_biopsy,
                                 std::uint64_t rng_seed) {
    if (n_biopsy < 1)
        fail(errc::invalid_argument, "random_intervention: n_biopsy must be >= 1");
    if (sites.empty())
        fail(errc::sampling_failed, "random_intervention: no boundary access points");

    Rng rng(rng_seed);
    const double half_fan = 0.5 * c.fan_deg;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const AccessSite& site = sites[rng.uniform_index(sites.size())];
        if (site.paths.empty()) continue;

        std::vector<double> angles;
        for (const auto& p : site.paths)
            if (angles.empty() || angles.back() != p.angle_deg) angles.push_back(p.angle_deg);
        double center = angles[rng.uniform_index(angles.size())];

        std::vector<int> window;
        for (std::size_t i = 0; i < site.paths.size(); ++i)
            if (angular_separation_deg(site.paths[i].angle_deg, center) <= half_fan + kGridEps)
                window.push_back(static_cast<int>(i));
        if (static_cast<int>(window.size()) < n_biopsy) continue;

        std::vector<int> idx;
        bool dup = false;
        for (int j = 0; j < n_biopsy; ++j) {
            int pick = window[rng.uniform_index(window.size())];
            if (std::find(idx.begin(), idx.end(), pick) != idx.end()) {
                dup = true;
                break;
            }
            idx.push_back(pick);
        }
        if (dup) continue;
        std::sort(idx.begin(), idx.end());
        return make_intervention(site, idx);
    }
    fail(errc::sampling_failed, "random_intervention: 1000 attempts exhausted");
}

namespace {

nlohmann::json path_json(const NeedlePath& p) {
    nlohmann::json j;
    j["angle_deg"] = p.angle_deg;
    j["depth_mm"] = p.depth_mm;
    j["d_value"] = p.d_value;
    j["tip_roi"] = {{"slice_index", p.tip_roi.slice_index},
                    {"center_mm", {p.tip_roi.center_mm.x, p.tip_roi.center_mm.y}},
                    {"direction", {p.tip_roi.direction.x, p.tip_roi.direction.y}},
                    {"width_mm", p.tip_roi.width_mm},
                    {"length_mm", p.tip_roi.length_mm}};
    return j;
}

nlohmann::json iv_json(const Intervention& iv) {
    nlohmann::json j;
    j["access_index"] = iv.access_index;
    j["access_mm"] = {iv.access_mm.x, iv.access_mm.y};
    j["score"] = iv.score;
    j["paths"] = nlohmann::json::array();
    for (const auto& p : iv.paths) j["paths"].push_back(path_json(p));
    return j;
}

} // namespace

std::string intervention_to_json(const Intervention& iv) { return iv_json(iv).dump(); }

std::string plan_to_json(const std::vector<Intervention>& plan) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& iv : plan) arr.push_back(iv_json(iv));
    return arr.dump();
}

} // namespace dwiplan
