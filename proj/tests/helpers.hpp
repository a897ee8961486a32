#pragma once

// Small builders shared by the test suites.

#include <cmath>
#include <functional>
#include <limits>

#include "dwiplan/grid.hpp"

namespace testutil {

inline dwiplan::GridGeometry geom(int nx, int ny, int nz, double sx = 1.0, double sy = 1.0,
                                  double sz = 1.0, double ox = 0.0, double oy = 0.0,
                                  double oz = 0.0) {
    dwiplan::GridGeometry g;
    g.dims = {nx, ny, nz};
    g.spacing_mm = {sx, sy, sz};
    g.origin_mm = {ox, oy, oz};
    return g;
}

inline dwiplan::LabelGrid3 all_tumor(const dwiplan::GridGeometry& g) {
    return dwiplan::LabelGrid3(g, dwiplan::TissueLabel::tumor);
}

// Scalar grid from f(ix, iy, iz) over index space.
inline dwiplan::ScalarGrid3 field(const dwiplan::GridGeometry& g,
                                  const std::function<double(int, int, int)>& f,
                                  dwiplan::UnitTag unit = dwiplan::UnitTag::d_value_mm2_per_s) {
    dwiplan::ScalarGrid3 s(g, unit);
    for (int z = 0; z < g.dims[2]; ++z)
        for (int y = 0; y < g.dims[1]; ++y)
            for (int x = 0; x < g.dims[0]; ++x)
                s.at(x, y, z) = f(x, y, z);
    return s;
}

// Elliptical tumor mask on a single slice centered in the grid.
inline dwiplan::LabelGrid3 ellipse_mask(const dwiplan::GridGeometry& g, double rx_mm,
                                        double ry_mm) {
    dwiplan::LabelGrid3 m(g, dwiplan::TissueLabel::outside);
    double cx = g.origin_mm[0] + 0.5 * g.spacing_mm[0] * (g.dims[0] - 1);
    double cy = g.origin_mm[1] + 0.5 * g.spacing_mm[1] * (g.dims[1] - 1);
    for (int z = 0; z < g.dims[2]; ++z)
        for (int y = 0; y < g.dims[1]; ++y)
            for (int x = 0; x < g.dims[0]; ++x) {
                double dx = (g.origin_mm[0] + g.spacing_mm[0] * x - cx) / rx_mm;
                double dy = (g.origin_mm[1] + g.spacing_mm[1] * y - cy) / ry_mm;
                if (dx * dx + dy * dy <= 1.0)
                    m.set(x, y, z, dwiplan::TissueLabel::tumor);
            }
    return m;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace testutil
