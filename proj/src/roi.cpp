#include "dwiplan/roi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dwiplan/error.hpp"
#include "dwiplan/stats.hpp"

namespace dwiplan {

void ROIRect2::validate() const {
    if (!(width_mm > 0.0) || !(length_mm > 0.0))
        fail(errc::invalid_argument, "roi: width and length must be positive");
    if (std::fabs(norm(direction) - 1.0) > 1e-9)
        fail(errc::invalid_argument, "roi: direction must be a unit vector");
}

bool ROIRect2::contains(Vec2 p) const {
    Vec2 r = p - center_mm;
    return std::fabs(dot(r, direction)) <= 0.5 * length_mm &&
           std::fabs(cross(direction, r)) <= 0.5 * width_mm;
}

std::vector<std::pair<int, int>> roi_cells(const GridGeometry& geom, const ROIRect2& roi) {
    roi.validate();
    if (roi.slice_index < 0 || roi.slice_index >= geom.dims[2])
        fail(errc::invalid_argument, "roi: slice index out of range");

    // Conservative index bounding box around the rotated rectangle.
    double half = 0.5 * std::hypot(roi.length_mm, roi.width_mm);
    int x0 = static_cast<int>(std::floor((roi.center_mm.x - half - geom.origin_mm[0]) / geom.spacing_mm[0]));
    int x1 = static_cast<int>(std::ceil((roi.center_mm.x + half - geom.origin_mm[0]) / geom.spacing_mm[0]));
    int y0 = static_cast<int>(std::floor((roi.center_mm.y - half - geom.origin_mm[1]) / geom.spacing_mm[1]));
    int y1 = static_cast<int>(std::ceil((roi.center_mm.y + half - geom.origin_mm[1]) / geom.spacing_mm[1]));
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, geom.dims[0] - 1);
    y1 = std::min(y1, geom.dims[1] - 1);

    std::vector<std::pair<int, int>> cells;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (roi.contains(geom.center2_mm(x, y)))
                cells.emplace_back(x, y);
    return cells;
}

double roi_mean_or_nan(const ScalarGrid3& grid, const ROIRect2& roi) {
    auto cells = roi_cells(grid.geom, roi);
    std::vector<double> vals;
    vals.reserve(cells.size());
    for (auto [x, y] : cells) {
        double v = grid.at(x, y, roi.slice_index);
        if (std::isfinite(v)) vals.push_back(v);
    }
    if (vals.empty())
        return std::numeric_limits<double>::quiet_NaN();
    return pairwise_sum(vals) / static_cast<double>(vals.size());
}

double roi_mean_d(const ScalarGrid3& grid, const ROIRect2& roi) {
    grid.validate();
    double m = roi_mean_or_nan(grid, roi);
    if (!std::isfinite(m))
        fail(errc::empty_roi, "roi_mean_d: no valued voxel center inside the rectangle");
    return m;
}

} // namespace dwiplan
