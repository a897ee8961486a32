#include "dwiplan/resample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dwiplan/error.hpp"
#include "dwiplan/mask_geometry.hpp"

namespace dwiplan {

namespace {

// 4-point Lagrange basis on nodes {-1,0,1,2} evaluated at t in [0,1].
inline void cubic_weights(double t, double w[4]) {
    w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
    w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
    w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
}

struct AxisPlan {
    int n_out = 0;
    std::vector<int> idx;    // 4 clamped source indices per output sample
    std::vector<double> wgt; // 4 weights per output sample
};

AxisPlan plan_axis(int n_in, int u) {
    AxisPlan p;
    p.n_out = n_in * u;
    p.idx.resize(static_cast<std::size_t>(p.n_out) * 4);
    p.wgt.resize(static_cast<std::size_t>(p.n_out) * 4);
    for (int o = 0; o < p.n_out; ++o) {
        double x = (o + 0.5) / static_cast<double>(u) - 0.5;
        double fl = std::floor(x);
        int i1 = static_cast<int>(fl);
        double t = x - fl;
        double w[4];
        cubic_weights(t, w);
        for (int k = 0; k < 4; ++k) {
            int src = std::clamp(i1 - 1 + k, 0, n_in - 1);
            p.idx[static_cast<std::size_t>(o) * 4 + k] = src;
            p.wgt[static_cast<std::size_t>(o) * 4 + k] = w[k];
        }
    }
    return p;
}

// One separable pass. Axis extents before the pass are (nx, ny, nz); the pass
// axis is expanded according to `plan`.
std::vector<double> pass_x(const std::vector<double>& in, int nx, int ny, int nz,
                           const AxisPlan& p) {
    std::vector<double> out(static_cast<std::size_t>(p.n_out) * ny * nz);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y) {
            const double* row = in.data() + (static_cast<std::size_t>(z) * ny + y) * nx;
            double* orow = out.data() + (static_cast<std::size_t>(z) * ny + y) * p.n_out;
            for (int o = 0; o < p.n_out; ++o) {
                const int* ix = p.idx.data() + static_cast<std::size_t>(o) * 4;
                const double* w = p.wgt.data() + static_cast<std::size_t>(o) * 4;
                orow[o] = w[0] * row[ix[0]] + w[1] * row[ix[1]] + w[2] * row[ix[2]] +
                          w[3] * row[ix[3]];
            }
        }
    return out;
}

std::vector<double> pass_y(const std::vector<double>& in, int nx, int ny, int nz,
                           const AxisPlan& p) {
    std::vector<double> out(static_cast<std::size_t>(nx) * p.n_out * nz);
    for (int z = 0; z < nz; ++z) {
        const double* plane = in.data() + static_cast<std::size_t>(z) * ny * nx;
        double* oplane = out.data() + static_cast<std::size_t>(z) * p.n_out * nx;
        for (int o = 0; o < p.n_out; ++o) {
            const int* ix = p.idx.data() + static_cast<std::size_t>(o) * 4;
            const double* w = p.wgt.data() + static_cast<std::size_t>(o) * 4;
            const double* r0 = plane + static_cast<std::size_t>(ix[0]) * nx;
            const double* r1 = plane + static_cast<std::size_t>(ix[1]) * nx;
            const double* r2 = plane + static_cast<std::size_t>(ix[2]) * nx;
            const double* r3 = plane + static_cast<std::size_t>(ix[3]) * nx;
            double* orow = oplane + static_cast<std::size_t>(o) * nx;
            for (int x = 0; x < nx; ++x)
                orow[x] = w[0] * r0[x] + w[1] * r1[x] + w[2] * r2[x] + w[3] * r3[x];
        }
    }
    return out;
}

std::vector<double> pass_z(const std::vector<double>& in, int nx, int ny, const AxisPlan& p) {
    std::vector<double> out(static_cast<std::size_t>(nx) * ny * p.n_out);
    const std::size_t plane = static_cast<std::size_t>(nx) * ny;
    for (int o = 0; o < p.n_out; ++o) {
        const int* ix = p.idx.data() + static_cast<std::size_t>(o) * 4;
        const double* w = p.wgt.data() + static_cast<std::size_t>(o) * 4;
        const double* p0 = in.data() + static_cast<std::size_t>(ix[0]) * plane;
        const double* p1 = in.data() + static_cast<std::size_t>(ix[1]) * plane;
        const double* p2 = in.data() + static_cast<std::size_t>(ix[2]) * plane;
        const double* p3 = in.data() + static_cast<std::size_t>(ix[3]) * plane;
        double* op = out.data() + static_cast<std::size_t>(o) * plane;
        for (std::size_t i = 0; i < plane; ++i)
            op[i] = w[0] * p0[i] + w[1] * p1[i] + w[2] * p2[i] + w[3] * p3[i];
    }
    return out;
}

// Index mapping shared by value and label grids.
inline int nn_source(int o, int u, int n_in) {
    double x = (o + 0.5) / static_cast<double>(u) - 0.5;
    int i = static_cast<int>(std::lround(x));
    return std::clamp(i, 0, n_in - 1);
}

GridGeometry upsampled_geometry(const GridGeometry& g, int u) {
    GridGeometry out = g;
    for (int a = 0; a < 3; ++a) {
        if (g.dims[a] == 1) continue;
        out.dims[a] = g.dims[a] * u;
        out.spacing_mm[a] = g.spacing_mm[a] / u;
        // keep the field of view: first output center sits half an output
        // voxel inside the first input voxel's extent
        out.origin_mm[a] = g.origin_mm[a] - 0.5 * g.spacing_mm[a] + 0.5 * out.spacing_mm[a];
    }
    return out;
}

} // namespace

ScalarGrid3 resample_bicubic(const ScalarGrid3& grid, const LabelGrid3& mask, int upsample_factor,
                             bool exclude_necrosis_sources) {
    grid.validate();
    mask.validate();
    require_same_geometry(grid.geom, mask.geom, "resample_bicubic");
    if (upsample_factor < 1)
        fail(errc::invalid_argument, "resample_bicubic: upsample factor must be >= 1");
    if (upsample_factor == 1)
        return grid;

    const int nx = grid.geom.dims[0], ny = grid.geom.dims[1], nz = grid.geom.dims[2];
    const int u = upsample_factor;

    // Valid voxels carry a value; optionally demote necrosis voxels to holes.
    std::vector<char> valid(grid.values.size());
    std::vector<char> source_ok(grid.values.size());
    std::size_t n_sources = 0;
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        valid[i] = std::isfinite(grid.values[i]) ? 1 : 0;
        char ok = valid[i];
        if (exclude_necrosis_sources &&
            mask.labels[i] == static_cast<std::uint8_t>(TissueLabel::necrosis))
            ok = 0;
        source_ok[i] = ok;
        n_sources += ok;
    }
    if (n_sources == 0)
        fail(errc::empty_mask, "resample_bicubic: no source voxels in mask");

    // Replicate the outermost source ring into the holes so the cubic stencils
    // never read NaN; the fill uses the nearest source voxel.
    std::vector<double> filled(grid.values.size());
    std::vector<std::int64_t> nearest = nearest_valid_voxel(source_ok, grid.geom);
    for (std::size_t i = 0; i < filled.size(); ++i)
        filled[i] = grid.values[static_cast<std::size_t>(nearest[i])];

    AxisPlan px_ = plan_axis(nx, nx > 1 ? u : 1);
    AxisPlan py_ = plan_axis(ny, ny > 1 ? u : 1);
    AxisPlan pz_ = plan_axis(nz, nz > 1 ? u : 1);

    std::vector<double> buf = std::move(filled);
    int cx = nx, cy = ny, cz = nz;
    if (nx > 1) { buf = pass_x(buf, cx, cy, cz, px_); cx = px_.n_out; }
    if (ny > 1) { buf = pass_y(buf, cx, cy, cz, py_); cy = py_.n_out; }
    if (nz > 1) { buf = pass_z(buf, cx, cy, pz_); cz = pz_.n_out; }

    ScalarGrid3 out;
    out.geom = upsampled_geometry(grid.geom, u);
    out.unit = grid.unit;
    out.values = std::move(buf);

    // NaN outside the upsampled valid region (nearest-neighbour membership).
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int z = 0; z < cz; ++z) {
        int sz = nz > 1 ? nn_source(z, u, nz) : 0;
        for (int y = 0; y < cy; ++y) {
            int sy = ny > 1 ? nn_source(y, u, ny) : 0;
            for (int x = 0; x < cx; ++x) {
                int sx = nx > 1 ? nn_source(x, u, nx) : 0;
                if (!valid[grid.geom.index(sx, sy, sz)])
                    out.values[out.geom.index(x, y, z)] = nan;
            }
        }
    }
    return out;
}

LabelGrid3 upsample_labels_nn(const LabelGrid3& mask, int upsample_factor) {
    mask.validate();
    if (upsample_factor < 1)
        fail(errc::invalid_argument, "upsample_labels_nn: upsample factor must be >= 1");
    if (upsample_factor == 1)
        return mask;
    const int u = upsample_factor;
    LabelGrid3 out;
    out.geom = upsampled_geometry(mask.geom, u);
    out.labels.resize(out.geom.voxel_count());
    const int nx = mask.geom.dims[0], ny = mask.geom.dims[1], nz = mask.geom.dims[2];
    for (int z = 0; z < out.geom.dims[2]; ++z) {
        int sz = nz > 1 ? nn_source(z, u, nz) : 0;
        for (int y = 0; y < out.geom.dims[1]; ++y) {
            int sy = ny > 1 ? nn_source(y, u, ny) : 0;
            for (int x = 0; x < out.geom.dims[0]; ++x) {
                int sx = nx > 1 ? nn_source(x, u, nx) : 0;
                out.labels[out.geom.index(x, y, z)] = mask.labels[mask.geom.index(sx, sy, sz)];
            }
        }
    }
    return out;
}

} // namespace dwiplan
