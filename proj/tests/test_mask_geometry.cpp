#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "dwiplan/error.hpp"
#include "dwiplan/mask_geometry.hpp"
#include "dwiplan/rng.hpp"
#include "helpers.hpp"

using namespace dwiplan;
using testutil::geom;

namespace {

// O(n^2) reference: distance from each inside pixel center to the nearest
// outside pixel center, with a virtual outside ring beyond the border.
std::vector<double> brute_distance(const LabelGrid3& mask, int slice) {
    const int nx = mask.geom.dims[0], ny = mask.geom.dims[1];
    const double sx = mask.geom.spacing_mm[0], sy = mask.geom.spacing_mm[1];
    std::vector<double> out(static_cast<std::size_t>(nx) * ny, 0.0);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            if (!mask.is_inside(x, y, slice)) continue;
            double best = std::numeric_limits<double>::infinity();
            for (int oy = -1; oy <= ny; ++oy)
                for (int ox = -1; ox <= nx; ++ox) {
                    bool outside = ox < 0 || ox >= nx || oy < 0 || oy >= ny ||
                                   !mask.is_inside(ox, oy, slice);
                    if (!outside) continue;
                    double dx = (x - ox) * sx, dy = (y - oy) * sy;
                    best = std::min(best, std::hypot(dx, dy));
                }
            out[static_cast<std::size_t>(y) * nx + x] = best;
        }
    return out;
}

} // namespace

TEST_CASE("distance_to_boundary: single pixel and full slice") {
    auto g = geom(7, 5, 1, 1.0, 1.0, 6.0);
    LabelGrid3 one(g, TissueLabel::outside);
    one.set(3, 2, 0, TissueLabel::tumor);
    auto d = distance_to_boundary(one, 0);
    CHECK(d.at(3, 2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.at(0, 0) == 0.0); // outside pixels carry 0

    LabelGrid3 full(g, TissueLabel::tumor);
    auto df = distance_to_boundary(full, 0);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x) {
            double want = std::min({double(x + 1), double(7 - x), double(y + 1), double(5 - y)});
            CHECK(df.at(x, y) == doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("distance_to_boundary: random anisotropic masks match the brute force") {
    Rng rng(55);
    for (int rep = 0; rep < 6; ++rep) {
        auto g = geom(20, 14, 1, 2.1, 1.3, 6.0);
        LabelGrid3 mask(g, TissueLabel::outside);
        bool any = false;
        for (int y = 0; y < 14; ++y)
            for (int x = 0; x < 20; ++x)
                if (rng.uniform() < 0.55) {
                    // necrosis/fat count as inside tissue for the outline
                    auto l = rng.uniform() < 0.15 ? TissueLabel::necrosis : TissueLabel::tumor;
                    mask.set(x, y, 0, l);
                    any = true;
                }
        if (!any) continue;
        auto got = distance_to_boundary(mask, 0);
        auto want = brute_distance(mask, 0);
        for (std::size_t i = 0; i < want.size(); ++i)
            CHECK(got.d[i] == doctest::Approx(want[i]).epsilon(1e-9));
    }
}

TEST_CASE("distance_to_boundary: errors") {
    auto g = geom(4, 4, 2);
    LabelGrid3 empty(g, TissueLabel::outside);
    CHECK_THROWS_AS(distance_to_boundary(empty, 0), Error);
    LabelGrid3 ok(g, TissueLabel::tumor);
    CHECK_THROWS_AS(distance_to_boundary(ok, 5), Error);
}

TEST_CASE("nearest_valid_voxel: brute-force agreement on a small 3d grid") {
    auto g = geom(6, 5, 4, 2.0, 1.0, 3.0);
    Rng rng(66);
    std::vector<char> valid(g.voxel_count(), 0);
    for (auto& v : valid) v = rng.uniform() < 0.2 ? 1 : 0;
    valid[0] = 1; // ensure at least one source
    auto src = nearest_valid_voxel(valid, g);
    for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 6; ++x) {
                double best = std::numeric_limits<double>::infinity();
                for (int zz = 0; zz < 4; ++zz)
                    for (int yy = 0; yy < 5; ++yy)
                        for (int xx = 0; xx < 6; ++xx) {
                            if (!valid[g.index(xx, yy, zz)]) continue;
                            double dx = (x - xx) * 2.0, dy = double(y - yy), dz = (z - zz) * 3.0;
                            best = std::min(best, dx * dx + dy * dy + dz * dz);
                        }
                auto s = src[g.index(x, y, z)];
                REQUIRE(s >= 0);
                // recover the source coordinates from the linear index
                int sx = static_cast<int>(s % 6), sy = static_cast<int>((s / 6) % 5),
                    sz = static_cast<int>(s / 30);
                CHECK(valid[static_cast<std::size_t>(s)] == 1);
                double dx = (x - sx) * 2.0, dy = double(y - sy), dz = (z - sz) * 3.0;
                CHECK(dx * dx + dy * dy + dz * dz == doctest::Approx(best).epsilon(1e-9));
            }
}

TEST_CASE("boundary_contour: circular mask") {
    auto g = geom(26, 26, 1, 1.0, 1.0, 6.0);
    auto mask = testutil::ellipse_mask(g, 10.0, 10.0);
    auto c = boundary_contour(mask, 0, 1.0);

    // ~63 points: ideal circumference 62.8 mm; the 8-direction polygon of the
    // pixelated disc inflates the perimeter by at most sec(22.5 deg) ~ 1.08.
    CHECK(c.points.size() >= 62);
    CHECK(c.points.size() <= 68);
    CHECK(!c.multiple_components);

    double cx = g.origin_mm[0] + 0.5 * (g.dims[0] - 1);
    double cy = g.origin_mm[1] + 0.5 * (g.dims[1] - 1);
    for (const auto& p : c.points) {
        double r = std::hypot(p.x - cx, p.y - cy);
        CHECK(std::fabs(r - 10.0) <= 0.75); // half-pixel pixelation bound (diagonal)
    }

    // near-uniform spacing
    const std::size_t n = c.points.size();
    double nominal = c.perimeter_mm / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        double dlen = norm(c.points[(k + 1) % n] - c.points[k]);
        CHECK(dlen >= 0.75 * nominal);
        CHECK(dlen <= 1.25 * nominal);
    }

    // starts at 9 o'clock: on the centroid row, at minimal x, then heads
    // display-clockwise (toward 12 o'clock, i.e. decreasing y)
    CHECK(std::fabs(c.points[0].y - cy) <= 0.5);
    CHECK(c.points[0].x < cx - 9.0);
    CHECK(c.points[1].y < c.points[0].y);
}

TEST_CASE("boundary_contour: square mask arc length") {
    auto g = geom(14, 14, 1);
    LabelGrid3 mask(g, TissueLabel::outside);
    for (int y = 2; y < 12; ++y)
        for (int x = 2; x < 12; ++x) mask.set(x, y, 0, TissueLabel::tumor);
    auto c = boundary_contour(mask, 0, 1.0);

    // 10x10 pixels at 0.5 level: four straight sides of 9 plus four corner
    // cuts of sqrt(0.5): perimeter 36 + 4*sqrt(0.5) = 38.83 -> 39 points.
    CHECK(c.perimeter_mm == doctest::Approx(36.0 + 4.0 * std::sqrt(0.5)).epsilon(1e-6));
    CHECK(c.points.size() == 39);

    // all points within half a pixel (diagonal) of the ideal square boundary
    for (const auto& p : c.points) {
        double dx = std::max({1.5 - p.x, p.x - 11.5, 0.0});
        double dy = std::max({1.5 - p.y, p.y - 11.5, 0.0});
        double outside = std::hypot(dx, dy);
        double inside_margin =
            std::min({p.x - 1.5, 11.5 - p.x, p.y - 1.5, 11.5 - p.y});
        double dist = outside > 0.0 ? outside : std::max(0.0, inside_margin);
        CHECK(dist <= 0.71);
    }
}

TEST_CASE("boundary_contour: multiple components keeps the largest and warns") {
    auto g = geom(30, 12, 1);
    LabelGrid3 mask(g, TissueLabel::outside);
    for (int y = 3; y < 9; ++y)
        for (int x = 2; x < 12; ++x) mask.set(x, y, 0, TissueLabel::tumor); // big blob
    mask.set(20, 6, 0, TissueLabel::tumor);                                  // island
    auto c = boundary_contour(mask, 0, 1.0);
    CHECK(c.multiple_components);
    for (const auto& p : c.points) CHECK(p.x < 15.0); // island boundary dropped
}

TEST_CASE("boundary_contour: loops close on random masks") {
    Rng rng(77);
    for (int rep = 0; rep < 8; ++rep) {
        auto g = geom(16, 12, 1);
        LabelGrid3 mask(g, TissueLabel::outside);
        int count = 0;
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 16; ++x)
                if (rng.uniform() < 0.5) {
                    mask.set(x, y, 0, TissueLabel::tumor);
                    ++count;
                }
        if (count == 0) continue;
        auto c = boundary_contour(mask, 0, 0.7); // just checks tracing integrity
        CHECK(c.points.size() >= 3);
        CHECK(c.perimeter_mm > 0.0);
    }
}
