// Deterministic SVG 1.1 histogram panels for the report stage.
#pragma once

#include <string>
#include <vector>

#include "dwiplan/histogram.hpp"

namespace dwiplan {

struct ReferenceLine {
    double x = 0.0;
    std::string label;
};

// Standalone SVG document: axes, tick labels, one rect per nonzero bin
// (class="bar"), and dashed vertical reference lines. Identical inputs give
// identical bytes.
std::string histogram_svg(const Histogram& hist, const std::string& title,
                          const std::string& x_label,
                          const std::vector<ReferenceLine>& reference_lines);

void emit_histogram_svg(const Histogram& hist, const std::vector<ReferenceLine>& reference_lines,
                        const std::string& path, const std::string& title = "",
                        const std::string& x_label = "");

} // namespace dwiplan
