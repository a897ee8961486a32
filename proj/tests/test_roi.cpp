#include "doctest.h"

#include <cmath>
#include <set>

#include "dwiplan/error.hpp"
#include "dwiplan/roi.hpp"
#include "dwiplan/rng.hpp"
#include "helpers.hpp"

using namespace dwiplan;
using testutil::field;
using testutil::geom;

TEST_CASE("roi_cells: axis-aligned rectangle, enumerated by hand") {
    auto g = geom(10, 10, 1);
    ROIRect2 roi;
    roi.slice_index = 0;
    roi.center_mm = {4.5, 4.5};
    roi.direction = {1.0, 0.0};
    roi.length_mm = 5.0; // |dx| <= 2.5 -> x in {2..7}
    roi.width_mm = 3.0;  // |dy| <= 1.5 -> y in {3..6}
    auto cells = roi_cells(g, roi);
    CHECK(cells.size() == 24);
    std::set<std::pair<int, int>> got(cells.begin(), cells.end());
    for (int y = 3; y <= 6; ++y)
        for (int x = 2; x <= 7; ++x) CHECK(got.count({x, y}) == 1);
}

TEST_CASE("roi_cells: boundary centers are included") {
    auto g = geom(5, 5, 1);
    ROIRect2 roi{0, {2.0, 2.0}, {1.0, 0.0}, 2.0, 2.0};
    auto cells = roi_cells(g, roi);
    CHECK(cells.size() == 9); // |dx|<=1, |dy|<=1
}

TEST_CASE("roi_cells: rotated rectangle matches a corner-based point test") {
    auto g = geom(20, 20, 1, 0.5, 0.5, 6.0);
    Rng rng(88);
    for (int rep = 0; rep < 12; ++rep) {
        ROIRect2 roi;
        roi.slice_index = 0;
        roi.center_mm = {rng.uniform(2.0, 8.0), rng.uniform(2.0, 8.0)};
        double ang = rng.uniform(0.0, 360.0);
        roi.direction = unit_from_deg(ang);
        roi.length_mm = rng.uniform(0.8, 4.0);
        roi.width_mm = rng.uniform(0.3, 2.0);

        // independent containment: corner polygon + cross-product side test
        Vec2 u = roi.direction, v{-u.y, u.x};
        Vec2 hl = 0.5 * roi.length_mm * u, hw = 0.5 * roi.width_mm * v;
        Vec2 c[4] = {roi.center_mm + hl + hw, roi.center_mm + hl - hw,
                     roi.center_mm - hl - hw, roi.center_mm - hl + hw};
        auto inside_poly = [&](Vec2 p) {
            double s0 = cross(c[1] - c[0], p - c[0]);
            double s1 = cross(c[2] - c[1], p - c[1]);
            double s2 = cross(c[3] - c[2], p - c[2]);
            double s3 = cross(c[0] - c[3], p - c[3]);
            double eps = 1e-9;
            return (s0 <= eps && s1 <= eps && s2 <= eps && s3 <= eps) ||
                   (s0 >= -eps && s1 >= -eps && s2 >= -eps && s3 >= -eps);
        };

        auto cells = roi_cells(g, roi);
        std::set<std::pair<int, int>> got(cells.begin(), cells.end());
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 20; ++x) {
                bool want = inside_poly(g.center2_mm(x, y));
                // skip centers razor-close to the edge; both answers are fine
                Vec2 r = g.center2_mm(x, y) - roi.center_mm;
                double da = std::fabs(std::fabs(dot(r, u)) - 0.5 * roi.length_mm);
                double db = std::fabs(std::fabs(cross(u, r)) - 0.5 * roi.width_mm);
                if (da < 1e-7 || db < 1e-7) continue;
                CHECK(got.count({x, y}) == static_cast<std::size_t>(want));
            }
    }
}

TEST_CASE("roi_mean_d: averages finite values only") {
    auto g = geom(10, 10, 1);
    auto grid = field(g, [](int x, int y, int) { return 10.0 * y + x; });
    grid.at(3, 4, 0) = testutil::kNaN;
    ROIRect2 roi{0, {3.0, 4.0}, {1.0, 0.0}, 1.0, 3.0}; // x in {2,3,4}, y = 4
    // cells (2,4) (3,4) (4,4); NaN dropped -> mean of 42, 44
    CHECK(roi_mean_d(grid, roi) == doctest::Approx(43.0).epsilon(1e-14));
}

TEST_CASE("roi_mean_d: error cases") {
    auto g = geom(10, 10, 1);
    auto grid = field(g, [](int x, int y, int) { return 10.0 * y + x; });
    // rectangle in the gap between centers
    ROIRect2 tiny{0, {0.5, 0.5}, {1.0, 0.0}, 0.2, 0.2};
    CHECK_THROWS_AS(roi_mean_d(grid, tiny), Error);
    // all-NaN coverage
    auto nan_grid = field(g, [](int, int, int) { return testutil::kNaN; });
    ROIRect2 roi{0, {5.0, 5.0}, {1.0, 0.0}, 2.0, 2.0};
    CHECK_THROWS_AS(roi_mean_d(nan_grid, roi), Error);
    CHECK(std::isnan(roi_mean_or_nan(nan_grid, roi)));
    // bad direction / extents
    ROIRect2 bad{0, {5.0, 5.0}, {2.0, 0.0}, 1.0, 1.0};
    CHECK_THROWS_AS(roi_mean_d(grid, bad), Error);
    ROIRect2 bad2{0, {5.0, 5.0}, {1.0, 0.0}, -1.0, 1.0};
    CHECK_THROWS_AS(roi_mean_d(grid, bad2), Error);
    ROIRect2 bad3{9, {5.0, 5.0}, {1.0, 0.0}, 1.0, 1.0};
    CHECK_THROWS_AS(roi_mean_d(grid, bad3), Error);
}
