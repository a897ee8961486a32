// Grid file round-trip: one JSON header line, then raw little-endian voxels.
#pragma once

#include <string>

#include "dwiplan/grid.hpp"

namespace dwiplan {

// Writes dtype f32 (values narrowed from the internal doubles).
void save_grid(const ScalarGrid3& grid, const std::string& path);
// Writes dtype u8.
void save_grid(const LabelGrid3& grid, const std::string& path);

ScalarGrid3 load_scalar_grid(const std::string& path);
LabelGrid3 load_label_grid(const std::string& path);

} // namespace dwiplan
