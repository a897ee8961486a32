#include "dwiplan/grid.hpp"

namespace dwiplan {

const char* unit_tag_name(UnitTag u) {
    switch (u) {
    case UnitTag::d_value_mm2_per_s:        return "d_value_mm2_per_s";
    case UnitTag::density_2d_cells_per_mm2: return "density_2d_cells_per_mm2";
    case UnitTag::density_3d_cells_per_mm3: return "density_3d_cells_per_mm3";
    case UnitTag::dimensionless:            return "dimensionless";
    }
    return "dimensionless";
}

UnitTag unit_tag_from_name(const std::string& name) {
    if (name == "d_value_mm2_per_s")        return UnitTag::d_value_mm2_per_s;
    if (name == "density_2d_cells_per_mm2") return UnitTag::density_2d_cells_per_mm2;
    if (name == "density_3d_cells_per_mm3") return UnitTag::density_3d_cells_per_mm3;
    if (name == "dimensionless")            return UnitTag::dimensionless;
    fail(errc::format_error, "unknown unit tag '" + name + "'");
}

void GridGeometry::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1)
            fail(errc::invalid_argument, "grid dims must be positive");
        if (!(spacing_mm[a] > 0.0))
            fail(errc::invalid_argument, "grid spacing must be positive");
    }
}

ScalarGrid3::ScalarGrid3(GridGeometry g, UnitTag u, double fill)
    : geom(g), unit(u), values(g.voxel_count(), fill) {
    geom.validate();
}

void ScalarGrid3::validate() const {
    geom.validate();
    if (values.size() != geom.voxel_count())
        fail(errc::invalid_argument, "scalar grid value count does not match dims");
}

LabelGrid3::LabelGrid3(GridGeometry g, TissueLabel fill)
    : geom(g), labels(g.voxel_count(), static_cast<std::uint8_t>(fill)) {
    geom.validate();
}

void LabelGrid3::validate() const {
    geom.validate();
    if (labels.size() != geom.voxel_count())
        fail(errc::invalid_argument, "label grid value count does not match dims");
    for (std::uint8_t v : labels)
        if (v > 3)
            fail(errc::format_error, "label grid holds value outside the tissue enum");
}

} // namespace dwiplan
