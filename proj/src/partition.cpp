// SLIC-style partitioning and biopsy target selection.
#include "dwiplan/partition.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

#include "dwiplan/error.hpp"
#include "dwiplan/mask_geometry.hpp"
#include "dwiplan/stats.hpp"

namespace dwiplan {

namespace {

constexpr double kCompactness = 10.0;
constexpr int kIterations = 10;

struct Cell {
    std::size_t grid_idx = 0;
    int ix = 0, iy = 0, iz = 0;
    double x = 0.0, y = 0.0, z = 0.0; // center, mm
    double d = 0.0;
};

struct Cluster {
    double x = 0.0, y = 0.0, z = 0.0, d = 0.0;
};

struct SlicSetup {
    std::vector<Cell> cells;
    std::vector<std::int32_t> cell_of_voxel; // -1 where not in the domain
    double cell_size = 0.0;                  // mm^2 or mm^3
    double domain_size = 0.0;
};

SlicSetup collect_domain(const ScalarGrid3& dmap, const LabelGrid3& mask, bool three_d,
                         int slice) {
    dmap.geom.validate();
    require_same_geometry(dmap.geom, mask.geom, "superpixels");
    require_unit(dmap, UnitTag::d_value_mm2_per_s, "superpixels");
    const auto& g = dmap.geom;
    if (!three_d && (slice < 0 || slice >= g.dims[2]))
        fail(errc::invalid_argument, "superpixels_2d: slice index out of range");

    SlicSetup s;
    s.cell_of_voxel.assign(g.voxel_count(), -1);
    s.cell_size = three_d ? g.voxel_volume_mm3() : g.pixel_area_mm2();
    const int z0 = three_d ? 0 : slice;
    const int z1 = three_d ? g.dims[2] : slice + 1;
    for (int z = z0; z < z1; ++z)
        for (int y = 0; y < g.dims[1]; ++y)
            for (int x = 0; x < g.dims[0]; ++x) {
                const std::size_t idx = g.index(x, y, z);
                if (!mask.is_inside(x, y, z)) continue;
                if (!std::isfinite(dmap.values[idx])) continue;
                Cell c;
                c.grid_idx = idx;
                c.ix = x;
                c.iy = y;
                c.iz = z;
                c.x = g.center_mm(0, x);
                c.y = g.center_mm(1, y);
                c.z = g.center_mm(2, z);
                c.d = dmap.values[idx];
                s.cell_of_voxel[idx] = static_cast<std::int32_t>(s.cells.size());
                s.cells.push_back(c);
            }
    if (s.cells.empty())
        fail(three_d ? errc::empty_mask : errc::empty_slice,
             "superpixels: no usable cells in the domain");
    s.domain_size = static_cast<double>(s.cells.size()) * s.cell_size;
    return s;
}

double spatial_sq(const Cell& a, const Cluster& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

// Lattice seeds snapped to the domain, then adjusted to exactly K by
// farthest-point thinning or filling. Fully deterministic.
std::vector<Cluster> seed_clusters(const SlicSetup& s, const GridGeometry& g, int k, double S) {
    std::vector<std::size_t> seed_cells;
    {
        double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
        for (const Cell& c : s.cells) {
            const double p[3] = {c.x, c.y, c.z};
            for (int a = 0; a < 3; ++a) {
                lo[a] = std::min(lo[a], p[a]);
                hi[a] = std::max(hi[a], p[a]);
            }
        }
        const auto nearest = nearest_valid_voxel(
            [&] {
                std::vector<char> v(g.voxel_count(), 0);
                for (const Cell& c : s.cells) v[c.grid_idx] = 1;
                return v;
            }(),
            g);
        std::set<std::size_t> used;
        auto steps = [&](int a) {
            return std::max(1, static_cast<int>(std::floor((hi[a] - lo[a]) / S)) + 1);
        };
        const int sx = steps(0), sy = steps(1), sz = steps(2);
        for (int kz = 0; kz < sz; ++kz)
            for (int ky = 0; ky < sy; ++ky)
                for (int kx = 0; kx < sx; ++kx) {
                    const double px = lo[0] + (kx + 0.5) * (hi[0] - lo[0] + 1e-12) / sx;
                    const double py = lo[1] + (ky + 0.5) * (hi[1] - lo[1] + 1e-12) / sy;
                    const double pz = lo[2] + (kz + 0.5) * (hi[2] - lo[2] + 1e-12) / sz;
                    int vx = static_cast<int>(std::lround((px - g.origin_mm[0]) / g.spacing_mm[0]));
                    int vy = static_cast<int>(std::lround((py - g.origin_mm[1]) / g.spacing_mm[1]));
                    int vz = static_cast<int>(std::lround((pz - g.origin_mm[2]) / g.spacing_mm[2]));
                    vx = std::clamp(vx, 0, g.dims[0] - 1);
                    vy = std::clamp(vy, 0, g.dims[1] - 1);
                    vz = std::clamp(vz, 0, g.dims[2] - 1);
                    const auto src = nearest[g.index(vx, vy, vz)];
                    if (src < 0) continue;
                    const auto cell = s.cell_of_voxel[static_cast<std::size_t>(src)];
                    if (cell >= 0 && used.insert(static_cast<std::size_t>(cell)).second)
                        seed_cells.push_back(static_cast<std::size_t>(cell));
                }
    }

    auto sq = [&](std::size_t a, std::size_t b) {
        const Cell &ca = s.cells[a], &cb = s.cells[b];
        const double dx = ca.x - cb.x, dy = ca.y - cb.y, dz = ca.z - cb.z;
        return dx * dx + dy * dy + dz * dz;
    };

    if (static_cast<int>(seed_cells.size()) > k) {
        // keep K seeds spread as far apart as possible, starting near the centroid
        double cx = 0, cy = 0, cz = 0;
        for (const Cell& c : s.cells) {
            cx += c.x;
            cy += c.y;
            cz += c.z;
        }
        cx /= s.cells.size();
        cy /= s.cells.size();
        cz /= s.cells.size();
        std::size_t first = seed_cells[0];
        double best = 1e300;
        for (std::size_t sc : seed_cells) {
            const Cell& c = s.cells[sc];
            const double d2 = (c.x - cx) * (c.x - cx) + (c.y - cy) * (c.y - cy) +
                              (c.z - cz) * (c.z - cz);
            if (d2 < best || (d2 == best && sc < first)) {
                best = d2;
                first = sc;
            }
        }
        std::vector<std::size_t> kept{first};
        std::vector<double> min_d2(seed_cells.size(), 1e300);
        while (static_cast<int>(kept.size()) < k) {
            std::size_t pick = 0;
            double pick_d2 = -1.0;
            for (std::size_t i = 0; i < seed_cells.size(); ++i) {
                min_d2[i] = std::min(min_d2[i], sq(seed_cells[i], kept.back()));
                const bool taken =
                    std::find(kept.begin(), kept.end(), seed_cells[i]) != kept.end();
                if (taken) continue;
                if (min_d2[i] > pick_d2 ||
                    (min_d2[i] == pick_d2 && seed_cells[i] < seed_cells[pick])) {
                    pick_d2 = min_d2[i];
                    pick = i;
                }
            }
            kept.push_back(seed_cells[pick]);
        }
        seed_cells = kept;
    } else if (static_cast<int>(seed_cells.size()) < k) {
        std::vector<double> min_d2(s.cells.size(), 1e300);
        for (std::size_t i = 0; i < s.cells.size(); ++i)
            for (std::size_t sc : seed_cells) min_d2[i] = std::min(min_d2[i], sq(i, sc));
        std::set<std::size_t> used(seed_cells.begin(), seed_cells.end());
        while (static_cast<int>(seed_cells.size()) < k) {
            std::size_t pick = 0;
            double pick_d2 = -1.0;
            for (std::size_t i = 0; i < s.cells.size(); ++i) {
                if (used.count(i)) continue;
                if (min_d2[i] > pick_d2 || (min_d2[i] == pick_d2 && i < pick)) {
                    pick_d2 = min_d2[i];
                    pick = i;
                }
            }
            seed_cells.push_back(pick);
            used.insert(pick);
            for (std::size_t i = 0; i < s.cells.size(); ++i)
                min_d2[i] = std::min(min_d2[i], sq(i, pick));
        }
    }

    std::sort(seed_cells.begin(), seed_cells.end());
    std::vector<Cluster> out;
    out.reserve(seed_cells.size());
    for (std::size_t sc : seed_cells) {
        const Cell& c = s.cells[sc];
        out.push_back(Cluster{c.x, c.y, c.z, c.d});
    }
    return out;
}

// Local k-means assignment in (wd*D, x/S, y/S, z/S) feature space.
void run_iterations(const SlicSetup& s, const GridGeometry& g, std::vector<Cluster>& clusters,
                    double S, double wd, std::vector<std::int32_t>& label) {
    const double inv_s2 = 1.0 / (S * S);
    std::vector<double> best(s.cells.size());
    for (int it = 0; it < kIterations; ++it) {
        std::fill(label.begin(), label.end(), -1);
        std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
        for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
            const Cluster& cl = clusters[ci];
            int rlo[3], rhi[3];
            for (int a = 0; a < 3; ++a) {
                const double center = a == 0 ? cl.x : (a == 1 ? cl.y : cl.z);
                rlo[a] = static_cast<int>(
                    std::floor((center - 2.0 * S - g.origin_mm[a]) / g.spacing_mm[a]));
                rhi[a] = static_cast<int>(
                    std::ceil((center + 2.0 * S - g.origin_mm[a]) / g.spacing_mm[a]));
                rlo[a] = std::clamp(rlo[a], 0, g.dims[a] - 1);
                rhi[a] = std::clamp(rhi[a], 0, g.dims[a] - 1);
            }
            for (int z = rlo[2]; z <= rhi[2]; ++z)
                for (int y = rlo[1]; y <= rhi[1]; ++y)
                    for (int x = rlo[0]; x <= rhi[0]; ++x) {
                        const std::int32_t cell = s.cell_of_voxel[g.index(x, y, z)];
                        if (cell < 0) continue;
                        const Cell& c = s.cells[static_cast<std::size_t>(cell)];
                        const double fd = wd * (c.d - cl.d);
                        const double dist = fd * fd + spatial_sq(c, cl) * inv_s2;
                        if (dist < best[cell]) {
                            best[cell] = dist;
                            label[cell] = static_cast<std::int32_t>(ci);
                        }
                    }
        }
        // any cell missed by every window gets a full scan
        for (std::size_t i = 0; i < s.cells.size(); ++i) {
            if (label[i] >= 0) continue;
            const Cell& c = s.cells[i];
            double b = std::numeric_limits<double>::infinity();
            for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
                const double fd = wd * (c.d - clusters[ci].d);
                const double dist = fd * fd + spatial_sq(c, clusters[ci]) * inv_s2;
                if (dist < b) {
                    b = dist;
                    label[i] = static_cast<std::int32_t>(ci);
                }
            }
        }
        std::vector<double> sx(clusters.size(), 0.0), sy(clusters.size(), 0.0),
            sz(clusters.size(), 0.0), sd(clusters.size(), 0.0);
        std::vector<std::size_t> cnt(clusters.size(), 0);
        for (std::size_t i = 0; i < s.cells.size(); ++i) {
            const auto l = static_cast<std::size_t>(label[i]);
            sx[l] += s.cells[i].x;
            sy[l] += s.cells[i].y;
            sz[l] += s.cells[i].z;
            sd[l] += s.cells[i].d;
            ++cnt[l];
        }
        for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
            if (cnt[ci] == 0) continue;
            clusters[ci] = Cluster{sx[ci] / cnt[ci], sy[ci] / cnt[ci], sz[ci] / cnt[ci],
                                   sd[ci] / cnt[ci]};
        }
    }
}

// Keep each label's largest connected component; everything else merges into
// the settled neighbor with the closest mean D (border length, then label id,
// break ties) so fragments do not smear across tissue contrasts.
void enforce_connectivity(const SlicSetup& s, const GridGeometry& g, bool three_d,
                          std::vector<std::int32_t>& label) {
    const int dx[6] = {1, -1, 0, 0, 0, 0};
    const int dy[6] = {0, 0, 1, -1, 0, 0};
    const int dz[6] = {0, 0, 0, 0, 1, -1};
    const int n_neigh = three_d ? 6 : 4;

    auto neighbor_cell = [&](const Cell& c, int k) -> std::int32_t {
        const int x = c.ix + dx[k], y = c.iy + dy[k], z = c.iz + dz[k];
        if (x < 0 || y < 0 || z < 0 || x >= g.dims[0] || y >= g.dims[1] || z >= g.dims[2])
            return -1;
        return s.cell_of_voxel[g.index(x, y, z)];
    };

    // component ids per cell
    std::vector<std::int32_t> comp(s.cells.size(), -1);
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < s.cells.size(); ++i) {
        if (comp[i] >= 0) continue;
        const std::int32_t id = static_cast<std::int32_t>(members.size());
        members.emplace_back();
        std::deque<std::size_t> q{i};
        comp[i] = id;
        while (!q.empty()) {
            const std::size_t cur = q.front();
            q.pop_front();
            members[id].push_back(cur);
            for (int k = 0; k < n_neigh; ++k) {
                const std::int32_t nb = neighbor_cell(s.cells[cur], k);
                if (nb < 0 || comp[nb] >= 0 || label[nb] != label[cur]) continue;
                comp[nb] = id;
                q.push_back(static_cast<std::size_t>(nb));
            }
        }
    }

    // largest component per label is settled
    std::vector<std::int32_t> keeper;
    for (std::size_t ci = 0; ci < members.size(); ++ci) {
        const std::int32_t l = label[members[ci][0]];
        if (static_cast<std::size_t>(l) >= keeper.size()) keeper.resize(l + 1, -1);
        if (keeper[l] < 0 || members[ci].size() > members[keeper[l]].size())
            keeper[l] = static_cast<std::int32_t>(ci);
    }
    std::vector<char> settled(members.size(), 0);
    for (std::int32_t k : keeper)
        if (k >= 0) settled[k] = 1;

    std::vector<double> d_sum(members.size(), 0.0);
    for (std::size_t ci = 0; ci < members.size(); ++ci)
        for (std::size_t cell : members[ci]) d_sum[ci] += s.cells[cell].d;
    auto comp_mean = [&](std::size_t ci) {
        return d_sum[ci] / static_cast<double>(members[ci].size());
    };

    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t ci = 0; ci < members.size(); ++ci) {
            if (settled[ci] || members[ci].empty()) continue;
            // settled neighbors with shared border counts
            std::vector<std::pair<std::int32_t, int>> border; // target comp, count
            for (std::size_t cell : members[ci])
                for (int k = 0; k < n_neigh; ++k) {
                    const std::int32_t nb = neighbor_cell(s.cells[cell], k);
                    if (nb < 0 || comp[nb] == static_cast<std::int32_t>(ci)) continue;
                    if (!settled[comp[nb]]) continue;
                    bool found = false;
                    for (auto& b : border)
                        if (b.first == comp[nb]) {
                            ++b.second;
                            found = true;
                        }
                    if (!found) border.emplace_back(comp[nb], 1);
                }
            if (border.empty()) continue;
            const double own_mean = comp_mean(ci);
            std::int32_t tgt = border[0].first;
            double tgt_gap = std::fabs(comp_mean(static_cast<std::size_t>(tgt)) - own_mean);
            int cnt = border[0].second;
            for (const auto& b : border) {
                const double gap = std::fabs(comp_mean(static_cast<std::size_t>(b.first)) - own_mean);
                if (gap < tgt_gap || (gap == tgt_gap && b.second > cnt) ||
                    (gap == tgt_gap && b.second == cnt &&
                     label[members[b.first][0]] < label[members[tgt][0]])) {
                    tgt = b.first;
                    tgt_gap = gap;
                    cnt = b.second;
                }
            }
            const std::int32_t new_label = label[members[tgt][0]];
            for (std::size_t cell : members[ci]) {
                label[cell] = new_label;
                comp[cell] = tgt;
            }
            d_sum[static_cast<std::size_t>(tgt)] += d_sum[ci];
            auto& tm = members[tgt];
            tm.insert(tm.end(), members[ci].begin(), members[ci].end());
            members[ci].clear();
            changed = true;
        }
    }
    // isolated leftovers (domain islands no settled label reaches) stay as
    // their own regions; give them fresh labels so ids stay one-per-component
    std::int32_t next_label = 0;
    for (std::size_t i = 0; i < s.cells.size(); ++i) next_label = std::max(next_label, label[i] + 1);
    for (std::size_t ci = 0; ci < members.size(); ++ci) {
        if (settled[ci] || members[ci].empty()) continue;
        for (std::size_t cell : members[ci]) label[cell] = next_label;
        ++next_label;
    }
}

SuperpixelPartition build_partition(const ScalarGrid3& dmap, const LabelGrid3& mask,
                                    bool three_d, int slice, double target_size) {
    if (!(target_size > 0.0)) fail(errc::invalid_argument, "superpixels: target size must be > 0");
    SlicSetup s = collect_domain(dmap, mask, three_d, slice);
    const auto& g = dmap.geom;

    SuperpixelPartition out;
    out.geom = g;
    out.three_d = three_d;
    out.slice = three_d ? -1 : slice;
    out.region_labels.assign(g.voxel_count(), -1);

    int k = static_cast<int>(std::lround(s.domain_size / target_size));
    if (s.domain_size < target_size || k <= 1) {
        k = 1;
        out.warning = "domain smaller than one superpixel; single-region partition";
    }
    k = std::min<int>(k, static_cast<int>(s.cells.size()));

    std::vector<std::int32_t> label(s.cells.size(), 0);
    if (k > 1) {
        const double S = three_d ? std::cbrt(s.domain_size / k) : std::sqrt(s.domain_size / k);
        std::vector<double> ds(s.cells.size());
        for (std::size_t i = 0; i < s.cells.size(); ++i) ds[i] = s.cells[i].d;
        const auto [dlo, dhi] = std::minmax_element(ds.begin(), ds.end());
        // exactly-constant maps degrade to plain spatial k-means (a computed
        // sd can be a rounding residue, which would blow the weight up)
        const double sd = (*dlo < *dhi && s.cells.size() > 1) ? sample_stats(ds).sd : 0.0;
        const double wd = sd > 0.0 ? kCompactness / sd : 0.0;
        auto clusters = seed_clusters(s, g, k, S);
        run_iterations(s, g, clusters, S, wd, label);
        enforce_connectivity(s, g, three_d, label);
    }

    // renumber by first appearance in cell order (raster scan of the domain)
    std::vector<std::int32_t> remap(s.cells.size() + 1, -1);
    std::int32_t next = 0;
    for (std::size_t i = 0; i < s.cells.size(); ++i) {
        if (remap[label[i]] < 0) remap[label[i]] = next++;
        label[i] = remap[label[i]];
    }

    // boundary distances over the inside mask
    std::vector<double> bdist;
    DistanceField2 bd2;
    if (three_d)
        bdist = boundary_distance_3d(mask);
    else
        bd2 = distance_to_boundary(mask, slice);

    out.regions.resize(next);
    std::vector<std::vector<double>> dvals(next);
    std::vector<std::vector<double>> px(next), py(next), pz(next);
    for (std::size_t i = 0; i < s.cells.size(); ++i) {
        const Cell& c = s.cells[i];
        const std::int32_t l = label[i];
        out.region_labels[c.grid_idx] = l;
        dvals[l].push_back(c.d);
        px[l].push_back(c.x);
        py[l].push_back(c.y);
        pz[l].push_back(c.z);
        const double bd = three_d ? bdist[c.grid_idx] : bd2.at(c.ix, c.iy);
        RegionStats& r = out.regions[l];
        if (r.cell_count == 0 || bd < r.min_boundary_distance_mm)
            r.min_boundary_distance_mm = bd;
        ++r.cell_count;
    }
    for (std::int32_t l = 0; l < next; ++l) {
        RegionStats& r = out.regions[l];
        r.id = l;
        const double n = static_cast<double>(r.cell_count);
        r.mean_d = pairwise_sum(dvals[l]) / n;
        std::vector<double> sq(dvals[l].size());
        for (std::size_t i = 0; i < sq.size(); ++i) {
            const double dv = dvals[l][i] - r.mean_d;
            sq[i] = dv * dv;
        }
        r.var_d = pairwise_sum(sq) / n;
        r.size = n * s.cell_size;
        r.centroid_mm = {pairwise_sum(px[l]) / n, pairwise_sum(py[l]) / n,
                         pairwise_sum(pz[l]) / n};
    }
    return out;
}

} // namespace

SuperpixelPartition superpixels_2d(const ScalarGrid3& dmap, const LabelGrid3& mask,
                                   int slice_index, double target_area_mm2) {
    return build_partition(dmap, mask, false, slice_index, target_area_mm2);
}

SuperpixelPartition supervoxels_3d(const ScalarGrid3& dmap, const LabelGrid3& mask,
                                   double target_volume_mm3) {
    return build_partition(dmap, mask, true, -1, target_volume_mm3);
}

namespace {

OptimalDTargets make_targets(double d_min, double d_max, double d_median, double mean_d,
                             int n, TargetFormula formula) {
    OptimalDTargets out;
    out.n_biopsy = n;
    out.mode = formula;
    out.d_min = d_min;
    out.d_max = d_max;
    out.d_median = d_median;
    out.targets.resize(static_cast<std::size_t>(n));

    const double lo = d_median - d_min;
    const double hi = d_max - d_median;
    // the symmetric-median case delegates to the even spread so both formulas
    // agree bit for bit
    const bool symmetric_numbers = lo == hi || d_median == 0.5 * (d_min + d_max);

    if (n == 1) {
        out.targets[0] = formula == TargetFormula::symmetric_eq4 ? mean_d : d_median;
        return out;
    }
    double start = d_min;
    double step = (d_max - d_min) / static_cast<double>(n - 1);
    if (formula == TargetFormula::asymmetric_eq5 && !symmetric_numbers) {
        const double r = std::min(lo, hi);
        start = d_median - r;
        step = 2.0 * r / static_cast<double>(n - 1);
    }
    for (int j = 0; j < n; ++j) {
        double t = start + static_cast<double>(j) * step;
        out.targets[static_cast<std::size_t>(j)] = std::clamp(t, d_min, d_max);
    }
    return out;
}

} // namespace

OptimalDTargets optimal_d_targets_from_stats(double d_min, double d_max, double d_median,
                                             double mean_d, int n_biopsy, TargetMode mode,
                                             double skewness) {
    if (n_biopsy < 1) fail(errc::invalid_argument, "n_biopsy must be >= 1");
    if (!(d_min <= d_median && d_median <= d_max))
        fail(errc::invalid_argument, "require d_min <= d_median <= d_max");
    TargetFormula formula = TargetFormula::symmetric_eq4;
    if (mode == TargetMode::asymmetric ||
        (mode == TargetMode::automatic && std::fabs(skewness) > 0.5))
        formula = TargetFormula::asymmetric_eq5;
    return make_targets(d_min, d_max, d_median, mean_d, n_biopsy, formula);
}

OptimalDTargets optimal_d_values(const std::vector<double>& d_values, int n_biopsy,
                                 TargetMode mode) {
    if (n_biopsy < 1) fail(errc::invalid_argument, "n_biopsy must be >= 1");
    const auto v = finite_values(d_values);
    if (v.size() < 50)
        fail(errc::insufficient_data, "optimal_d_values needs >= 50 values for percentiles");
    const auto q = quantiles_type7(v, {0.02, 0.5, 0.98});
    const double mean = pairwise_sum(v) / static_cast<double>(v.size());
    const double g1 = sample_skewness(v);
    return optimal_d_targets_from_stats(q[0], q[2], q[1], mean, n_biopsy, mode, g1);
}

CandidateSelection select_candidates(const SuperpixelPartition& partition,
                                     const OptimalDTargets& targets,
                                     const ExclusionRules& rules) {
    if (targets.targets.empty()) fail(errc::invalid_argument, "select_candidates: no targets");
    CandidateSelection sel;
    sel.regions = partition.regions;

    // overlap labels per region from the exclusion mask, by world position
    std::vector<char> hits_necrosis(sel.regions.size(), 0);
    std::vector<char> hits_fat(sel.regions.size(), 0);
    if (rules.overlap_mask != nullptr) {
        const LabelGrid3& em = *rules.overlap_mask;
        const bool same = em.geom == partition.geom;
        const auto& g = partition.geom;
        for (int z = 0; z < g.dims[2]; ++z)
            for (int y = 0; y < g.dims[1]; ++y)
                for (int x = 0; x < g.dims[0]; ++x) {
                    const std::int32_t l = partition.region_labels[g.index(x, y, z)];
                    if (l < 0) continue;
                    std::uint8_t lab;
                    if (same) {
                        lab = em.labels[g.index(x, y, z)];
                    } else {
                        int ex = static_cast<int>(std::lround(
                            (g.center_mm(0, x) - em.geom.origin_mm[0]) / em.geom.spacing_mm[0]));
                        int ey = static_cast<int>(std::lround(
                            (g.center_mm(1, y) - em.geom.origin_mm[1]) / em.geom.spacing_mm[1]));
                        int ez = static_cast<int>(std::lround(
                            (g.center_mm(2, z) - em.geom.origin_mm[2]) / em.geom.spacing_mm[2]));
                        if (ex < 0 || ey < 0 || ez < 0 || ex >= em.geom.dims[0] ||
                            ey >= em.geom.dims[1] || ez >= em.geom.dims[2])
                            continue;
                        lab = em.labels[em.geom.index(ex, ey, ez)];
                    }
                    if (lab == static_cast<std::uint8_t>(TissueLabel::necrosis)) hits_necrosis[l] = 1;
                    if (lab == static_cast<std::uint8_t>(TissueLabel::fat)) hits_fat[l] = 1;
                }
    }

    std::vector<int> eligible;
    for (auto& r : sel.regions) {
        std::string reason;
        if (r.min_boundary_distance_mm < rules.min_boundary_mm) {
            reason = "boundary";
            ++sel.excluded_boundary;
        }
        if (hits_necrosis[static_cast<std::size_t>(r.id)]) {
            reason += reason.empty() ? "necrosis" : ",necrosis";
            ++sel.excluded_necrosis;
        }
        if (hits_fat[static_cast<std::size_t>(r.id)]) {
            reason += reason.empty() ? "fat" : ",fat";
            ++sel.excluded_fat;
        }
        r.excluded = !reason.empty();
        r.exclusion_reason = reason;
        if (!r.excluded) eligible.push_back(r.id);
    }

    const std::size_t n = targets.targets.size();
    if (eligible.size() < n)
        fail(errc::infeasible_selection,
             "select_candidates: " + std::to_string(eligible.size()) + " eligible regions for " +
                 std::to_string(n) + " targets (excluded: boundary " +
                 std::to_string(sel.excluded_boundary) + ", necrosis " +
                 std::to_string(sel.excluded_necrosis) + ", fat " +
                 std::to_string(sel.excluded_fat) + ")");

    // global best-fit-first: the closest (target, region) pair wins each round
    std::vector<char> target_done(n, 0);
    std::vector<char> region_used(sel.regions.size(), 0);
    sel.picks.resize(n);
    for (std::size_t round = 0; round < n; ++round) {
        double best_err = std::numeric_limits<double>::infinity();
        double best_bd = -1.0;
        int best_region = -1;
        std::size_t best_target = 0;
        for (std::size_t t = 0; t < n; ++t) {
            if (target_done[t]) continue;
            for (int id : eligible) {
                if (region_used[static_cast<std::size_t>(id)]) continue;
                const RegionStats& r = sel.regions[static_cast<std::size_t>(id)];
                const double err = std::fabs(r.mean_d - targets.targets[t]);
                const bool better =
                    err < best_err ||
                    (err == best_err && (r.min_boundary_distance_mm > best_bd ||
                                         (r.min_boundary_distance_mm == best_bd &&
                                          (best_region < 0 || id < best_region))));
                if (better) {
                    best_err = err;
                    best_bd = r.min_boundary_distance_mm;
                    best_region = id;
                    best_target = t;
                }
            }
        }
        target_done[best_target] = 1;
        region_used[static_cast<std::size_t>(best_region)] = 1;
        CandidatePick& p = sel.picks[best_target];
        p.target_d = targets.targets[best_target];
        p.region_id = best_region;
        p.mean_d = sel.regions[static_cast<std::size_t>(best_region)].mean_d;
        p.abs_error = best_err;
    }
    return sel;
}

} // namespace dwiplan
