// Grid file round-trips and the failure modes of malformed files.
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>

#include "dwiplan/error.hpp"
#include "dwiplan/gridio.hpp"
#include "helpers.hpp"

using namespace dwiplan;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    auto dir = fs::temp_directory_path() / "dwiplan_gridio_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string le_float_bytes(std::initializer_list<float> vals) {
    std::string out;
    for (float v : vals) {
        char buf[4];
        std::memcpy(buf, &v, 4);
        out.append(buf, 4);
    }
    return out;
}

} // namespace

TEST_CASE("scalar grid round-trips exactly at f32 precision") {
    auto g = testutil::geom(5, 4, 3, 0.6, 0.7, 3.0, -1.5, 2.0, 0.0);
    ScalarGrid3 grid(g, UnitTag::d_value_mm2_per_s, 0.0);
    for (std::size_t i = 0; i < grid.values.size(); ++i)
        grid.values[i] = 0.25 * static_cast<double>(i) - 4.0; // exact in f32
    grid.values[7] = testutil::kNaN;

    auto path = temp_file("roundtrip.grid");
    save_grid(grid, path.string());
    auto back = load_scalar_grid(path.string());

    CHECK(back.geom == g);
    CHECK(back.unit == UnitTag::d_value_mm2_per_s);
    REQUIRE(back.values.size() == grid.values.size());
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        if (i == 7)
            CHECK(std::isnan(back.values[i]));
        else
            CHECK(back.values[i] == grid.values[i]);
    }
}

TEST_CASE("save narrows to f32 and save-load-save is byte stable") {
    auto g = testutil::geom(3, 2, 1);
    ScalarGrid3 grid(g, UnitTag::density_3d_cells_per_mm3, 0.0);
    grid.values = {0.1, 1.0 / 3.0, 1.125e6, -2.5e8, 0.0, 7.0};

    auto path = temp_file("narrow.grid");
    save_grid(grid, path.string());
    auto once = load_scalar_grid(path.string());
    for (std::size_t i = 0; i < grid.values.size(); ++i)
        CHECK(once.values[i] == static_cast<double>(static_cast<float>(grid.values[i])));

    auto path2 = temp_file("narrow2.grid");
    save_grid(once, path2.string());
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("label grid round-trips all tissue classes") {
    auto g = testutil::geom(2, 2, 1);
    LabelGrid3 mask(g);
    mask.labels = {0, 1, 2, 3};

    auto path = temp_file("labels.grid");
    save_grid(mask, path.string());
    auto back = load_label_grid(path.string());
    CHECK(back.geom == g);
    CHECK(back.labels == mask.labels);
}

TEST_CASE("a hand-written file parses to the documented layout") {
    std::string header = R"({"dims":[2,1,1],"spacing_mm":[1.0,1.0,1.0],)"
                         R"("origin_mm":[0.0,0.0,0.0],"dtype":"f32","unit":"dimensionless"})";
    auto path = temp_file("handwritten.grid");
    spit(path, header + "\n" + le_float_bytes({1.0f, 2.0f}));

    auto grid = load_scalar_grid(path.string());
    CHECK(grid.geom.dims[0] == 2);
    CHECK(grid.geom.dims[1] == 1);
    CHECK(grid.unit == UnitTag::dimensionless);
    CHECK(grid.values == std::vector<double>{1.0, 2.0});
}

TEST_CASE("truncated body reports expected and actual byte counts") {
    std::string header = R"({"dims":[2,1,1],"spacing_mm":[1.0,1.0,1.0],)"
                         R"("origin_mm":[0.0,0.0,0.0],"dtype":"f32","unit":"dimensionless"})";
    auto path = temp_file("truncated.grid");
    spit(path, header + "\n" + le_float_bytes({1.0f}));

    try {
        load_scalar_grid(path.string());
        FAIL("expected a format error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::format_error);
        CHECK(std::string(e.what()).find("expected 8 bytes, got 4") != std::string::npos);
    }
}

TEST_CASE("trailing bytes after the body are rejected") {
    std::string header = R"({"dims":[2,1,1],"spacing_mm":[1.0,1.0,1.0],)"
                         R"("origin_mm":[0.0,0.0,0.0],"dtype":"f32","unit":"dimensionless"})";
    auto path = temp_file("trailing.grid");
    spit(path, header + "\n" + le_float_bytes({1.0f, 2.0f}) + "x");
    CHECK_THROWS_WITH_AS(load_scalar_grid(path.string()),
                         doctest::Contains("trailing bytes"), Error);
}

TEST_CASE("malformed header JSON names a byte offset") {
    auto path = temp_file("badjson.grid");
    spit(path, "{\"dims\":[2,\n" + le_float_bytes({1.0f, 2.0f}));
    try {
        load_scalar_grid(path.string());
        FAIL("expected a format error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::format_error);
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
}

TEST_CASE("bad header fields are rejected") {
    auto body = le_float_bytes({1.0f, 2.0f});
    auto with_header = [&](const std::string& hdr) {
        auto path = temp_file("field.grid");
        spit(path, hdr + "\n" + body);
        return path.string();
    };
    auto base = [](const std::string& dtype, const std::string& unit, const std::string& dims) {
        return "{\"dims\":" + dims + ",\"spacing_mm\":[1.0,1.0,1.0]," +
               R"("origin_mm":[0.0,0.0,0.0],"dtype":")" + dtype + R"(","unit":")" + unit + "\"}";
    };

    SUBCASE("unknown dtype") {
        CHECK_THROWS_WITH_AS(load_scalar_grid(with_header(base("f64", "dimensionless", "[2,1,1]"))),
                             doctest::Contains("dtype"), Error);
    }
    SUBCASE("unknown unit tag") {
        CHECK_THROWS_WITH_AS(load_scalar_grid(with_header(base("f32", "furlongs", "[2,1,1]"))),
                             doctest::Contains("unknown unit tag"), Error);
    }
    SUBCASE("non-positive dims") {
        CHECK_THROWS_AS(load_scalar_grid(with_header(base("f32", "dimensionless", "[0,1,1]"))),
                        Error);
    }
    SUBCASE("missing field") {
        auto path = temp_file("field.grid");
        spit(path, R"({"dims":[2,1,1],"dtype":"f32","unit":"dimensionless"})" "\n" + body);
        CHECK_THROWS_AS(load_scalar_grid(path.string()), Error);
    }
    SUBCASE("scalar loader refuses a label file") {
        auto g = testutil::geom(2, 1, 1);
        LabelGrid3 mask(g);
        mask.labels = {1, 1};
        auto path = temp_file("dtype_mismatch.grid");
        save_grid(mask, path.string());
        CHECK_THROWS_WITH_AS(load_scalar_grid(path.string()), doctest::Contains("dtype"), Error);
    }
    SUBCASE("label loader refuses a scalar file") {
        auto g = testutil::geom(2, 1, 1);
        ScalarGrid3 grid(g, UnitTag::dimensionless, 1.0);
        auto path = temp_file("dtype_mismatch2.grid");
        save_grid(grid, path.string());
        CHECK_THROWS_WITH_AS(load_label_grid(path.string()), doctest::Contains("dtype"), Error);
    }
}

TEST_CASE("label values outside the tissue classes are rejected") {
    std::string header = R"({"dims":[2,1,1],"spacing_mm":[1.0,1.0,1.0],)"
                         R"("origin_mm":[0.0,0.0,0.0],"dtype":"u8","unit":"dimensionless"})";
    auto path = temp_file("badlabel.grid");
    spit(path, header + "\n" + std::string("\x01\x07", 2));
    CHECK_THROWS_AS(load_label_grid(path.string()), Error);
}

TEST_CASE("empty and missing files fail cleanly") {
    auto path = temp_file("empty.grid");
    spit(path, "");
    CHECK_THROWS_AS(load_scalar_grid(path.string()), Error);
    CHECK_THROWS_AS(load_scalar_grid((temp_file("nope.grid").string() + ".missing")), Error);
}
