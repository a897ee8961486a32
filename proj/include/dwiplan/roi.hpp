#pragma once

#include <utility>
#include <vector>

#include "dwiplan/geometry.hpp"
#include "dwiplan/grid.hpp"

namespace dwiplan {

// Oriented in-plane rectangle on one slice: long axis along `direction`
// (unit), extents length_mm along it and width_mm across.
struct ROIRect2 {
    int slice_index = 0;
    Vec2 center_mm{};
    Vec2 direction{1.0, 0.0};
    double width_mm = 0.0;
    double length_mm = 0.0;

    void validate() const;
    bool contains(Vec2 p) const; // boundary inclusive
};

// Indices (x, y) of voxel centers inside the rectangle on its slice.
std::vector<std::pair<int, int>> roi_cells(const GridGeometry& geom, const ROIRect2& roi);

// Mean of the finite grid values whose voxel centers fall inside the
// rectangle. Errors when no center is inside or all covered cells are NaN.
double roi_mean_d(const ScalarGrid3& grid, const ROIRect2& roi);

// Same, but NaN instead of an error; needle evaluation loops use this.
double roi_mean_or_nan(const ScalarGrid3& grid, const ROIRect2& roi);

} // namespace dwiplan
