#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include "dwiplan/error.hpp"
#include "dwiplan/geometry.hpp"

namespace dwiplan {

// Physical unit carried by a scalar map. Sums and comparisons across maps
// with different tags are refused by the operations that care.
enum class UnitTag {
    d_value_mm2_per_s,
    density_2d_cells_per_mm2,
    density_3d_cells_per_mm3,
    dimensionless,
};

const char* unit_tag_name(UnitTag u);
UnitTag unit_tag_from_name(const std::string& name);

enum class TissueLabel : std::uint8_t {
    outside = 0,
    tumor = 1,
    necrosis = 2,
    fat = 3,
};

// Regular axis-aligned voxel lattice. origin_mm is the world position of the
// CENTER of voxel (0,0,0); voxel (i,j,k) is centered at origin + index*spacing.
struct GridGeometry {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
    std::array<double, 3> origin_mm{0.0, 0.0, 0.0};

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    // Row-major with x fastest.
    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims[1]) * z);
    }
    bool contains(int x, int y, int z) const {
        return x >= 0 && x < dims[0] && y >= 0 && y < dims[1] && z >= 0 && z < dims[2];
    }
    double center_mm(int axis, int i) const { return origin_mm[axis] + spacing_mm[axis] * i; }
    Vec2 center2_mm(int x, int y) const {
        return {origin_mm[0] + spacing_mm[0] * x, origin_mm[1] + spacing_mm[1] * y};
    }
    double voxel_volume_mm3() const { return spacing_mm[0] * spacing_mm[1] * spacing_mm[2]; }
    double pixel_area_mm2() const { return spacing_mm[0] * spacing_mm[1]; }

    void validate() const;
    bool operator==(const GridGeometry& o) const {
        return dims == o.dims && spacing_mm == o.spacing_mm && origin_mm == o.origin_mm;
    }
};

struct ScalarGrid3 {
    GridGeometry geom;
    UnitTag unit = UnitTag::dimensionless;
    std::vector<double> values; // NaN = no value at this voxel

    ScalarGrid3() = default;
    ScalarGrid3(GridGeometry g, UnitTag u, double fill = 0.0);

    double& at(int x, int y, int z) { return values[geom.index(x, y, z)]; }
    double at(int x, int y, int z) const { return values[geom.index(x, y, z)]; }

    void validate() const;
};

struct LabelGrid3 {
    GridGeometry geom;
    std::vector<std::uint8_t> labels;

    LabelGrid3() = default;
    LabelGrid3(GridGeometry g, TissueLabel fill = TissueLabel::outside);

    TissueLabel at(int x, int y, int z) const {
        return static_cast<TissueLabel>(labels[geom.index(x, y, z)]);
    }
    void set(int x, int y, int z, TissueLabel l) {
        labels[geom.index(x, y, z)] = static_cast<std::uint8_t>(l);
    }
    bool is_inside(int x, int y, int z) const { return at(x, y, z) != TissueLabel::outside; }

    void validate() const;
};

inline void require_same_geometry(const GridGeometry& a, const GridGeometry& b,
                                  const char* what) {
    if (!(a == b))
        fail(errc::geometry_mismatch, std::string(what) + ": grids have different geometry");
}

inline void require_unit(const ScalarGrid3& g, UnitTag expect, const char* what) {
    if (g.unit != expect)
        fail(errc::unit_error, std::string(what) + ": expected unit " +
                                   unit_tag_name(expect) + ", got " + unit_tag_name(g.unit));
}

} // namespace dwiplan
