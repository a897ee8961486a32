#pragma once

#include <vector>

#include "dwiplan/geometry.hpp"
#include "dwiplan/grid.hpp"

namespace dwiplan {

// Per-pixel distances on one slice; row-major x fastest, millimetres.
struct DistanceField2 {
    int nx = 0;
    int ny = 0;
    std::vector<double> d;

    double at(int x, int y) const { return d[static_cast<std::size_t>(y) * nx + x]; }
};

// Exact Euclidean distance from every inside pixel (any non-outside label) of
// the slice to the nearest outside pixel center, honoring anisotropic in-plane
// spacing. Pixels beyond the image border count as outside, so a mask filling
// the whole slice gets distances to the border. Outside pixels hold 0.
DistanceField2 distance_to_boundary(const LabelGrid3& mask, int slice_index);

// 3d analogue over the whole volume: distance from every inside voxel center
// to the nearest outside voxel center; voxels beyond the volume border count
// as outside. Non-inside voxels hold 0. Result is congruent with the mask.
std::vector<double> boundary_distance_3d(const LabelGrid3& mask);

// Closed outline of the inside region on one slice.
struct BoundaryContour {
    std::vector<Vec2> points;       // world mm, closed implicitly (last -> first)
    double perimeter_mm = 0.0;      // arc length of the traced outline
    bool multiple_components = false; // true when smaller islands were dropped
};

// Marching-squares 0.5-level contour of the inside indicator, resampled to
// (approximately) uniform arc length `spacing_mm`. Orientation is clockwise in
// image coordinates (y down) and the first point is the "9 o'clock" one: the
// minimal-x contour point among those within half a pixel of the centroid row.
// When the mask has several components only the largest boundary is returned
// and `multiple_components` is set.
BoundaryContour boundary_contour(const LabelGrid3& mask, int slice_index, double spacing_mm);

// Nearest-valid-source feature transform used for edge fills; exposed for tests.
// Returns for every voxel the linear index of the nearest voxel where
// `valid` is true (anisotropic Euclidean, center-to-center), or -1 when no
// voxel is valid.
std::vector<std::int64_t> nearest_valid_voxel(const std::vector<char>& valid,
                                              const GridGeometry& geom);

} // namespace dwiplan
