#pragma once

#include "dwiplan/grid.hpp"

namespace dwiplan {

// Separable piecewise-cubic upsampling of a masked map.
//
// Each axis with more than one sample gets dims*u output samples at spacing/u;
// the overall field of view is preserved (output center x_out maps to input
// coordinate (x_out + 0.5)/u - 0.5). Singleton axes are passed through
// unchanged: there is nothing between two centers when an axis has only one.
//
// The per-interval cubic is the 4-point Lagrange interpolant, so any per-axis
// cubic polynomial field is reproduced exactly away from the boundary and
// u = 1 returns a bitwise copy. Outside the outermost valid samples the edge
// values are replicated (index clamping / nearest-valid fill), and output
// voxels whose nearest input voxel carries no value stay NaN.
//
// `exclude_necrosis_sources` treats necrosis-labeled voxels as holes and fills
// them from the surrounding vital tissue; by default their stored value
// participates like any other sample.
ScalarGrid3 resample_bicubic(const ScalarGrid3& grid, const LabelGrid3& mask, int upsample_factor,
                             bool exclude_necrosis_sources = false);

// Nearest-neighbour label upsampling with the same index mapping, so label and
// value grids stay aligned after interpolation.
LabelGrid3 upsample_labels_nn(const LabelGrid3& mask, int upsample_factor);

} // namespace dwiplan
