#include "dwiplan/gridio.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "dwiplan/error.hpp"
#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "grid files are little-endian; big-endian hosts need byte swaps");

namespace dwiplan {

namespace {

struct Header {
    GridGeometry geom;
    std::string dtype;
    std::string unit;
    std::size_t body_offset = 0;
};

nlohmann::ordered_json header_json(const GridGeometry& g, const char* dtype, const char* unit) {
    nlohmann::ordered_json j;
    j["dims"] = g.dims;
    j["spacing_mm"] = g.spacing_mm;
    j["origin_mm"] = g.origin_mm;
    j["dtype"] = dtype;
    j["unit"] = unit;
    return j;
}

void write_file(const std::string& path, const nlohmann::ordered_json& header,
                const void* body, std::size_t body_bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(errc::io_error, "cannot open for writing: " + path);
    std::string line = header.dump();
    line += '\n';
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.write(static_cast<const char*>(body), static_cast<std::streamsize>(body_bytes));
    out.flush();
    if (!out) fail(errc::io_error, "write failed: " + path);
}

Header read_header(std::ifstream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line))
        fail(errc::format_error, path + ": missing header line (byte offset 0)");
    Header h;
    h.body_offset = line.size() + 1;

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        fail(errc::format_error,
             path + ": malformed header JSON (byte offset " + std::to_string(e.byte - 1) + ")");
    }
    try {
        auto dims = j.at("dims");
        auto spacing = j.at("spacing_mm");
        auto origin = j.at("origin_mm");
        if (!dims.is_array() || dims.size() != 3 || !spacing.is_array() || spacing.size() != 3 ||
            !origin.is_array() || origin.size() != 3)
            fail(errc::format_error, path + ": header dims/spacing_mm/origin_mm must be 3-vectors");
        for (int a = 0; a < 3; ++a) {
            h.geom.dims[a] = dims[a].get<int>();
            h.geom.spacing_mm[a] = spacing[a].get<double>();
            h.geom.origin_mm[a] = origin[a].get<double>();
        }
        h.dtype = j.at("dtype").get<std::string>();
        h.unit = j.at("unit").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(errc::format_error, path + ": bad header field: " + e.what());
    }
    if (h.geom.dims[0] < 1 || h.geom.dims[1] < 1 || h.geom.dims[2] < 1)
        fail(errc::format_error, path + ": header dims must be positive");
    for (double s : h.geom.spacing_mm)
        if (!(s > 0.0)) fail(errc::format_error, path + ": header spacing must be positive");
    if (h.dtype != "f32" && h.dtype != "u8")
        fail(errc::format_error, path + ": unknown dtype \"" + h.dtype + "\"");
    return h;
}

std::vector<char> read_body(std::ifstream& in, const Header& h, std::size_t elem_size,
                            const std::string& path) {
    const std::size_t expected = h.geom.voxel_count() * elem_size;
    std::vector<char> body(expected);
    in.read(body.data(), static_cast<std::streamsize>(expected));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != expected)
        fail(errc::format_error, path + ": truncated body, expected " + std::to_string(expected) +
                                     " bytes, got " + std::to_string(got) + " (byte offset " +
                                     std::to_string(h.body_offset) + ")");
    in.peek();
    if (!in.eof())
        fail(errc::format_error, path + ": trailing bytes after the " + std::to_string(expected) +
                                     "-byte body (byte offset " +
                                     std::to_string(h.body_offset + expected) + ")");
    return body;
}

} // namespace

void save_grid(const ScalarGrid3& grid, const std::string& path) {
    grid.validate();
    std::vector<float> body(grid.values.size());
    for (std::size_t i = 0; i < body.size(); ++i) body[i] = static_cast<float>(grid.values[i]);
    write_file(path, header_json(grid.geom, "f32", unit_tag_name(grid.unit)), body.data(),
               body.size() * sizeof(float));
}

void save_grid(const LabelGrid3& grid, const std::string& path) {
    grid.validate();
    write_file(path, header_json(grid.geom, "u8", "dimensionless"), grid.labels.data(),
               grid.labels.size());
}

ScalarGrid3 load_scalar_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open: " + path);
    Header h = read_header(in, path);
    if (h.dtype != "f32")
        fail(errc::format_error, path + ": expected dtype f32, found " + h.dtype);
    UnitTag unit;
    try {
        unit = unit_tag_from_name(h.unit);
    } catch (const Error&) {
        fail(errc::format_error, path + ": unknown unit tag \"" + h.unit + "\" (byte offset 0)");
    }
    auto body = read_body(in, h, sizeof(float), path);

    ScalarGrid3 grid(h.geom, unit);
    const auto* f = reinterpret_cast<const float*>(body.data());
    for (std::size_t i = 0; i < grid.values.size(); ++i) grid.values[i] = static_cast<double>(f[i]);
    return grid;
}

LabelGrid3 load_label_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open: " + path);
    Header h = read_header(in, path);
    if (h.dtype != "u8")
        fail(errc::format_error, path + ": expected dtype u8, found " + h.dtype);
    auto body = read_body(in, h, 1, path);

    LabelGrid3 grid(h.geom, TissueLabel::outside);
    for (std::size_t i = 0; i < grid.labels.size(); ++i) {
        auto v = static_cast<std::uint8_t>(body[i]);
        if (v > static_cast<std::uint8_t>(TissueLabel::fat))
            fail(errc::format_error, path + ": label value " + std::to_string(int(v)) +
                                         " out of range at voxel " + std::to_string(i));
        grid.labels[i] = v;
    }
    return grid;
}

} // namespace dwiplan
