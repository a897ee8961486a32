#include "dwiplan/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dwiplan/error.hpp"

namespace dwiplan {

namespace {

constexpr double kWidth = 640.0, kHeight = 400.0;
constexpr double kLeft = 64.0, kRight = 20.0, kTop = 40.0, kBottom = 48.0;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default:  out += c;
        }
    }
    return out;
}

} // namespace

std::string histogram_svg(const Histogram& hist, const std::string& title,
                          const std::string& x_label,
                          const std::vector<ReferenceLine>& reference_lines) {
    const bool has_bins = hist.bin_edges.size() >= 2;
    const double x0 = has_bins ? hist.bin_edges.front() : 0.0;
    const double x1 = has_bins && hist.bin_edges.back() > x0 ? hist.bin_edges.back() : x0 + 1.0;
    double ymax = 0.0;
    for (double c : hist.counts) ymax = std::max(ymax, c);
    if (ymax <= 0.0) ymax = 1.0;

    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + pw * (x - x0) / (x1 - x0); };
    auto sy = [&](double y) { return kTop + ph * (1.0 - y / ymax); };

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fmt(kWidth)
        << "\" height=\"" << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << " "
        << fmt(kHeight) << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(kHeight)
        << "\" fill=\"white\"/>\n";

    if (!title.empty())
        out << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"24\" font-family=\"sans-serif\""
            << " font-size=\"15\" text-anchor=\"middle\">" << escape(title) << "</text>\n";

    for (std::size_t i = 0; has_bins && i < hist.counts.size(); ++i) {
        if (!(hist.counts[i] > 0.0)) continue;
        double bx = sx(hist.bin_edges[i]);
        double bw = sx(hist.bin_edges[i + 1]) - bx;
        double by = sy(hist.counts[i]);
        out << "<rect class=\"bar\" x=\"" << fmt(bx) << "\" y=\"" << fmt(by) << "\" width=\""
            << fmt(bw) << "\" height=\"" << fmt(kTop + ph - by)
            << "\" fill=\"#4a78a8\" stroke=\"none\"/>\n";
    }

    for (const auto& ref : reference_lines) {
        if (!(ref.x >= x0 && ref.x <= x1)) continue;
        double rx = sx(ref.x);
        out << "<line x1=\"" << fmt(rx) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(rx)
            << "\" y2=\"" << fmt(kTop + ph)
            << "\" stroke=\"#b03030\" stroke-width=\"1.5\" stroke-dasharray=\"5 3\"/>\n";
        if (!ref.label.empty())
            out << "<text x=\"" << fmt(rx + 4) << "\" y=\"" << fmt(kTop + 14)
                << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#b03030\">"
                << escape(ref.label) << "</text>\n";
    }

    // Frame and ticks go last so bars never cover them.
    out << "<path d=\"M " << fmt(kLeft) << " " << fmt(kTop) << " L " << fmt(kLeft) << " "
        << fmt(kTop + ph) << " L " << fmt(kLeft + pw) << " " << fmt(kTop + ph)
        << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        double xv = x0 + (x1 - x0) * t / 4.0;
        double yv = ymax * t / 4.0;
        out << "<line x1=\"" << fmt(sx(xv)) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\""
            << fmt(sx(xv)) << "\" y2=\"" << fmt(kTop + ph + 5)
            << "\" stroke=\"black\" stroke-width=\"1\"/>\n"
            << "<text x=\"" << fmt(sx(xv)) << "\" y=\"" << fmt(kTop + ph + 20)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
            << fmt(xv) << "</text>\n"
            << "<line x1=\"" << fmt(kLeft - 5) << "\" y1=\"" << fmt(sy(yv)) << "\" x2=\""
            << fmt(kLeft) << "\" y2=\"" << fmt(sy(yv))
            << "\" stroke=\"black\" stroke-width=\"1\"/>\n"
            << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(sy(yv) + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt(yv)
            << "</text>\n";
    }
    if (!x_label.empty())
        out << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 10)
            << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
            << escape(x_label) << "</text>\n";
    out << "<text x=\"14\" y=\"" << fmt(kTop - 8)
        << "\" font-family=\"sans-serif\" font-size=\"12\">count</text>\n";
    out << "</svg>\n";
    return out.str();
}

void emit_histogram_svg(const Histogram& hist, const std::vector<ReferenceLine>& reference_lines,
                        const std::string& path, const std::string& title,
                        const std::string& x_label) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(errc::io_error, "cannot open for writing: " + path);
    auto doc = histogram_svg(hist, title, x_label, reference_lines);
    out.write(doc.data(), static_cast<std::streamsize>(doc.size()));
    out.flush();
    if (!out) fail(errc::io_error, "write failed: " + path);
}

} // namespace dwiplan
