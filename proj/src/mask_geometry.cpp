// Exact distance transform (lower-envelope parabolas) and marching-squares
// boundary extraction for tumor masks.

#include "dwiplan/mask_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>

#include "dwiplan/error.hpp"

namespace dwiplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1d squared-distance transform with source tracking:
// g[j] = min_i f[i] + (w*(j-i))^2, gsrc[j] = src of the argmin.
void dt1d(const std::vector<double>& f, const std::vector<std::int64_t>& src, double w,
          std::vector<double>& g, std::vector<std::int64_t>& gsrc) {
    const int n = static_cast<int>(f.size());
    const double w2 = w * w;
    static thread_local std::vector<int> v;
    static thread_local std::vector<double> z;
    v.assign(static_cast<std::size_t>(n), 0);
    z.assign(static_cast<std::size_t>(n) + 1, 0.0);

    int k = -1;
    for (int i = 0; i < n; ++i) {
        if (f[i] == kInf) continue;
        double s;
        while (k >= 0) {
            int vi = v[k];
            s = ((f[i] + w2 * i * i) - (f[vi] + w2 * vi * vi)) / (2.0 * w2 * (i - vi));
            if (s <= z[k]) { --k; continue; }
            break;
        }
        if (k < 0) {
            k = 0;
            v[0] = i;
            z[0] = -kInf;
            z[1] = kInf;
        } else {
            ++k;
            v[k] = i;
            z[k] = s;
            z[k + 1] = kInf;
        }
    }

    if (k < 0) { // no finite entry in this line
        std::fill(g.begin(), g.end(), kInf);
        std::fill(gsrc.begin(), gsrc.end(), -1);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < static_cast<double>(q)) ++j;
        int vi = v[j];
        double d = w * (q - vi);
        g[q] = f[vi] + d * d;
        gsrc[q] = src[vi];
    }
}

struct FeatureTransform {
    std::vector<double> sqdist;
    std::vector<std::int64_t> source;
};

// Separable passes over an arbitrary 3d lattice; seeds are voxels with
// sqdist 0 and source = own index.
FeatureTransform feature_transform(const std::vector<char>& seed, const GridGeometry& geom) {
    FeatureTransform ft;
    ft.sqdist.assign(geom.voxel_count(), kInf);
    ft.source.assign(geom.voxel_count(), -1);
    for (std::size_t i = 0; i < seed.size(); ++i) {
        if (seed[i]) {
            ft.sqdist[i] = 0.0;
            ft.source[i] = static_cast<std::int64_t>(i);
        }
    }

    auto run_axis = [&](int axis) {
        const int n = geom.dims[axis];
        if (n == 1) return;
        const double w = geom.spacing_mm[axis];
        std::vector<double> f(n), g(n);
        std::vector<std::int64_t> s(n), gs(n);
        int nu = geom.dims[(axis + 1) % 3];
        int nv = geom.dims[(axis + 2) % 3];
        for (int b = 0; b < nu * nv; ++b) {
            int u = b % nu, vIdx = b / nu;
            int c[3];
            c[(axis + 1) % 3] = u;
            c[(axis + 2) % 3] = vIdx;
            for (int i = 0; i < n; ++i) {
                c[axis] = i;
                std::size_t idx = geom.index(c[0], c[1], c[2]);
                f[i] = ft.sqdist[idx];
                s[i] = ft.source[idx];
            }
            dt1d(f, s, w, g, gs);
            for (int i = 0; i < n; ++i) {
                c[axis] = i;
                std::size_t idx = geom.index(c[0], c[1], c[2]);
                ft.sqdist[idx] = g[i];
                ft.source[idx] = gs[i];
            }
        }
    };
    run_axis(0);
    run_axis(1);
    run_axis(2);
    return ft;
}

} // namespace

std::vector<std::int64_t> nearest_valid_voxel(const std::vector<char>& valid,
                                              const GridGeometry& geom) {
    if (valid.size() != geom.voxel_count())
        fail(errc::invalid_argument, "nearest_valid_voxel: mask size mismatch");
    return feature_transform(valid, geom).source;
}

DistanceField2 distance_to_boundary(const LabelGrid3& mask, int slice_index) {
    mask.validate();
    if (slice_index < 0 || slice_index >= mask.geom.dims[2])
        fail(errc::invalid_argument, "distance_to_boundary: slice index out of range");
    const int nx = mask.geom.dims[0], ny = mask.geom.dims[1];

    // Work on a one-pixel outside ring so the image border acts as background.
    GridGeometry pad;
    pad.dims = {nx + 2, ny + 2, 1};
    pad.spacing_mm = {mask.geom.spacing_mm[0], mask.geom.spacing_mm[1], 1.0};
    std::vector<char> outside(pad.voxel_count(), 1);
    bool any_inside = false;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            if (mask.is_inside(x, y, slice_index)) {
                outside[pad.index(x + 1, y + 1, 0)] = 0;
                any_inside = true;
            }
    if (!any_inside)
        fail(errc::empty_slice, "distance_to_boundary: slice has no inside pixels");

    FeatureTransform ft = feature_transform(outside, pad);

    DistanceField2 out;
    out.nx = nx;
    out.ny = ny;
    out.d.resize(static_cast<std::size_t>(nx) * ny);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            out.d[static_cast<std::size_t>(y) * nx + x] =
                std::sqrt(ft.sqdist[pad.index(x + 1, y + 1, 0)]);
    return out;
}

std::vector<double> boundary_distance_3d(const LabelGrid3& mask) {
    mask.validate();
    const int nx = mask.geom.dims[0], ny = mask.geom.dims[1], nz = mask.geom.dims[2];

    GridGeometry pad;
    pad.dims = {nx + 2, ny + 2, nz + 2};
    pad.spacing_mm = mask.geom.spacing_mm;
    std::vector<char> outside(pad.voxel_count(), 1);
    bool any_inside = false;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                if (mask.is_inside(x, y, z)) {
                    outside[pad.index(x + 1, y + 1, z + 1)] = 0;
                    any_inside = true;
                }
    if (!any_inside) fail(errc::empty_mask, "boundary_distance_3d: mask has no inside voxels");

    FeatureTransform ft = feature_transform(outside, pad);

    std::vector<double> out(mask.geom.voxel_count());
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                out[mask.geom.index(x, y, z)] =
                    std::sqrt(ft.sqdist[pad.index(x + 1, y + 1, z + 1)]);
    return out;
}

namespace {

// Marching squares on the padded binary indicator. Segment endpoints are edge
// midpoints stored in half-index units (exact integer keys); orientation keeps
// the inside on the left in y-up index coordinates, i.e. outer loops run
// clockwise when y points down (display convention).
struct SegKey {
    int x2;
    int y2;
    bool operator<(const SegKey& o) const { return x2 != o.x2 ? x2 < o.x2 : y2 < o.y2; }
    bool operator==(const SegKey& o) const { return x2 == o.x2 && y2 == o.y2; }
};

struct Loop {
    std::vector<Vec2> pts; // index coordinates
    double signed_area = 0.0;
};

std::vector<Loop> trace_loops(const LabelGrid3& mask, int slice) {
    const int nx = mask.geom.dims[0], ny = mask.geom.dims[1];
    auto inside = [&](int x, int y) -> int {
        if (x < 0 || x >= nx || y < 0 || y >= ny) return 0;
        return mask.is_inside(x, y, slice) ? 1 : 0;
    };

    std::map<SegKey, SegKey> next; // directed: start -> end
    auto emit = [&](int sx2, int sy2, int ex2, int ey2) {
        next[{sx2, sy2}] = {ex2, ey2};
    };

    for (int j = -1; j < ny; ++j) {
        for (int i = -1; i < nx; ++i) {
            int m = inside(i, j) | (inside(i + 1, j) << 1) | (inside(i, j + 1) << 2) |
                    (inside(i + 1, j + 1) << 3);
            // Edge midpoints in half units: S=(2i+1,2j) N=(2i+1,2j+2)
            //                               W=(2i,2j+1) E=(2i+2,2j+1)
            const int S[2] = {2 * i + 1, 2 * j};
            const int N[2] = {2 * i + 1, 2 * j + 2};
            const int W[2] = {2 * i, 2 * j + 1};
            const int E[2] = {2 * i + 2, 2 * j + 1};
            switch (m) {
            case 1:  emit(S[0], S[1], W[0], W[1]); break;
            case 2:  emit(E[0], E[1], S[0], S[1]); break;
            case 3:  emit(E[0], E[1], W[0], W[1]); break;
            case 4:  emit(W[0], W[1], N[0], N[1]); break;
            case 5:  emit(S[0], S[1], N[0], N[1]); break;
            case 6:  emit(E[0], E[1], S[0], S[1]);
                     emit(W[0], W[1], N[0], N[1]); break; // diagonal: keep split
            case 7:  emit(E[0], E[1], N[0], N[1]); break;
            case 8:  emit(N[0], N[1], E[0], E[1]); break;
            case 9:  emit(S[0], S[1], W[0], W[1]);
                     emit(N[0], N[1], E[0], E[1]); break; // diagonal: keep split
            case 10: emit(N[0], N[1], S[0], S[1]); break;
            case 11: emit(N[0], N[1], W[0], W[1]); break;
            case 12: emit(W[0], W[1], E[0], E[1]); break;
            case 13: emit(S[0], S[1], E[0], E[1]); break;
            case 14: emit(W[0], W[1], S[0], S[1]); break;
            default: break;
            }
        }
    }

    std::vector<Loop> loops;
    while (!next.empty()) {
        auto it = next.begin();
        SegKey start = it->first;
        Loop loop;
        SegKey cur = start;
        do {
            auto jt = next.find(cur);
            if (jt == next.end())
                fail(errc::invalid_argument, "boundary_contour: open contour (corrupt mask)");
            loop.pts.push_back({0.5 * cur.x2, 0.5 * cur.y2});
            SegKey nxt = jt->second;
            next.erase(jt);
            cur = nxt;
        } while (!(cur == start));
        double a = 0.0;
        for (std::size_t k = 0; k < loop.pts.size(); ++k) {
            const Vec2& p = loop.pts[k];
            const Vec2& q = loop.pts[(k + 1) % loop.pts.size()];
            a += cross(p, q);
        }
        loop.signed_area = 0.5 * a;
        loops.push_back(std::move(loop));
    }
    return loops;
}

} // namespace

BoundaryContour boundary_contour(const LabelGrid3& mask, int slice_index, double spacing_mm) {
    mask.validate();
    if (slice_index < 0 || slice_index >= mask.geom.dims[2])
        fail(errc::invalid_argument, "boundary_contour: slice index out of range");
    if (!(spacing_mm > 0.0))
        fail(errc::invalid_argument, "boundary_contour: spacing must be positive");

    std::vector<Loop> loops = trace_loops(mask, slice_index);
    if (loops.empty())
        fail(errc::empty_slice, "boundary_contour: slice has no inside pixels");

    // Outer loops have positive area in y-up index coordinates; keep the biggest.
    std::size_t best = 0;
    int outer_count = 0;
    for (std::size_t i = 0; i < loops.size(); ++i) {
        if (loops[i].signed_area > 0.0) ++outer_count;
        if (std::fabs(loops[i].signed_area) > std::fabs(loops[best].signed_area)) best = i;
    }

    const double sx = mask.geom.spacing_mm[0], sy = mask.geom.spacing_mm[1];
    const double ox = mask.geom.origin_mm[0], oy = mask.geom.origin_mm[1];
    std::vector<Vec2> poly;
    poly.reserve(loops[best].pts.size());
    for (const Vec2& p : loops[best].pts)
        poly.push_back({ox + sx * p.x, oy + sy * p.y});

    // Uniform arc-length resampling of the closed polyline.
    const std::size_t m = poly.size();
    std::vector<double> seg_len(m);
    double perim = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        seg_len[k] = norm(poly[(k + 1) % m] - poly[k]);
        perim += seg_len[k];
    }
    if (!(perim > 0.0))
        fail(errc::empty_slice, "boundary_contour: degenerate contour");
    const auto npts = static_cast<std::size_t>(std::max<long long>(3, std::llround(perim / spacing_mm)));
    const double step = perim / static_cast<double>(npts);

    std::vector<Vec2> pts(npts);
    std::size_t seg = 0;
    double seg_start = 0.0;
    for (std::size_t k = 0; k < npts; ++k) {
        double target = step * static_cast<double>(k);
        while (seg_start + seg_len[seg] < target && seg + 1 < m) {
            seg_start += seg_len[seg];
            ++seg;
        }
        double f = seg_len[seg] > 0.0 ? (target - seg_start) / seg_len[seg] : 0.0;
        Vec2 a = poly[seg], b = poly[(seg + 1) % m];
        pts[k] = a + f * (b - a);
    }

    // "9 o'clock" start: minimal x among points within half a pixel of the
    // centroid row (fallback: nearest row distance, then minimal x).
    double cx = 0.0, cy = 0.0;
    std::size_t n_inside = 0;
    for (int y = 0; y < mask.geom.dims[1]; ++y)
        for (int x = 0; x < mask.geom.dims[0]; ++x)
            if (mask.is_inside(x, y, slice_index)) {
                cx += ox + sx * x;
                cy += oy + sy * y;
                ++n_inside;
            }
    cx /= static_cast<double>(n_inside);
    cy /= static_cast<double>(n_inside);

    std::size_t start = npts;
    for (std::size_t k = 0; k < npts; ++k) {
        if (std::fabs(pts[k].y - cy) > 0.5 * sy) continue;
        if (start == npts || pts[k].x < pts[start].x) start = k;
    }
    if (start == npts) {
        start = 0;
        for (std::size_t k = 1; k < npts; ++k) {
            double dk = std::fabs(pts[k].y - cy), ds = std::fabs(pts[start].y - cy);
            if (dk < ds || (dk == ds && pts[k].x < pts[start].x)) start = k;
        }
    }
    std::rotate(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(start), pts.end());

    BoundaryContour out;
    out.points = std::move(pts);
    out.multiple_components = outer_count > 1;
    out.perimeter_mm = perim; // arc length of the traced outline
    return out;
}

} // namespace dwiplan
