#pragma once

// Static SVG scatter/line plots, written with fixed-precision coordinates so
// identical inputs render byte-identical files.

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace lawline::svg {

struct Series {
    std::string name;
    std::vector<std::array<double, 2>> points;
    bool as_line = false;  // scatter otherwise
};

namespace detail {

inline std::string num(double v, const char* fmt = "%.2f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

inline double nice_step(double range) {
    if (!(range > 0)) return 1.0;
    const double raw = range / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    double step = 10.0;
    if (frac <= 1.0) step = 1.0;
    else if (frac <= 2.0) step = 2.0;
    else if (frac <= 5.0) step = 5.0;
    return step * mag;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

} // namespace detail

inline const std::array<const char*, 8> kPalette = {"#4878a8", "#e08214", "#2e8b57", "#c44e52",
                                                    "#8172b2", "#8c613c", "#d670c1", "#7f7f7f"};

inline std::string render_plot(const std::string& title, const std::string& x_label,
                               const std::string& y_label, const std::vector<Series>& series,
                               int width = 760, int height = 520) {
    const double ml = 70, mr = 20, mt = 42, mb = 52;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
    bool first = true;
    for (const auto& s : series) {
        for (const auto& p : s.points) {
            if (first) {
                x_lo = x_hi = p[0];
                y_lo = y_hi = p[1];
                first = false;
            }
            x_lo = std::min(x_lo, p[0]);
            x_hi = std::max(x_hi, p[0]);
            y_lo = std::min(y_lo, p[1]);
            y_hi = std::max(y_hi, p[1]);
        }
    }
    if (x_hi - x_lo < 1e-12) { x_lo -= 0.5; x_hi += 0.5; }
    if (y_hi - y_lo < 1e-12) { y_lo -= 0.5; y_hi += 0.5; }
    const double x_pad = 0.04 * (x_hi - x_lo), y_pad = 0.06 * (y_hi - y_lo);
    x_lo -= x_pad; x_hi += x_pad; y_lo -= y_pad; y_hi += y_pad;

    const auto sx = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
    const auto sy = [&](double y) { return mt + ph - (y - y_lo) / (y_hi - y_lo) * ph; };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
           " " + std::to_string(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + detail::num(width / 2.0) +
           "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">" +
           detail::escape(title) + "</text>\n";

    // axes box and ticks
    out += "<rect x=\"" + detail::num(ml) + "\" y=\"" + detail::num(mt) + "\" width=\"" +
           detail::num(pw) + "\" height=\"" + detail::num(ph) +
           "\" fill=\"none\" stroke=\"#333333\"/>\n";
    const double x_step = detail::nice_step(x_hi - x_lo);
    for (double t = std::ceil(x_lo / x_step) * x_step; t <= x_hi + 1e-9 * x_step; t += x_step) {
        out += "<line x1=\"" + detail::num(sx(t)) + "\" y1=\"" + detail::num(mt + ph) + "\" x2=\"" +
               detail::num(sx(t)) + "\" y2=\"" + detail::num(mt + ph + 5) +
               "\" stroke=\"#333333\"/>\n";
        out += "<text x=\"" + detail::num(sx(t)) + "\" y=\"" + detail::num(mt + ph + 18) +
               "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" +
               detail::num(t, "%g") + "</text>\n";
    }
    const double y_step = detail::nice_step(y_hi - y_lo);
    for (double t = std::ceil(y_lo / y_step) * y_step; t <= y_hi + 1e-9 * y_step; t += y_step) {
        out += "<line x1=\"" + detail::num(ml - 5) + "\" y1=\"" + detail::num(sy(t)) + "\" x2=\"" +
               detail::num(ml) + "\" y2=\"" + detail::num(sy(t)) + "\" stroke=\"#333333\"/>\n";
        out += "<text x=\"" + detail::num(ml - 8) + "\" y=\"" + detail::num(sy(t) + 4) +
               "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" +
               detail::num(t, "%g") + "</text>\n";
    }
    out += "<text x=\"" + detail::num(ml + pw / 2) + "\" y=\"" + detail::num(height - 12.0) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" +
           detail::escape(x_label) + "</text>\n";
    out += "<text x=\"16\" y=\"" + detail::num(mt + ph / 2) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
           detail::num(mt + ph / 2) + ")\">" + detail::escape(y_label) + "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* color = kPalette[i % kPalette.size()];
        if (s.as_line) {
            std::string pts;
            for (const auto& p : s.points) {
                if (!pts.empty()) pts += ' ';
                pts += detail::num(sx(p[0])) + "," + detail::num(sy(p[1]));
            }
            out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
                   "\" stroke-width=\"1.8\"/>\n";
        } else {
            for (const auto& p : s.points)
                out += "<circle cx=\"" + detail::num(sx(p[0])) + "\" cy=\"" + detail::num(sy(p[1])) +
                       "\" r=\"2.4\" fill=\"" + color + "\" fill-opacity=\"0.55\"/>\n";
        }
    }

    // legend
    double ly = mt + 14;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % kPalette.size()];
        out += "<rect x=\"" + detail::num(ml + 10) + "\" y=\"" + detail::num(ly - 9) +
               "\" width=\"10\" height=\"10\" fill=\"" + std::string(color) + "\"/>\n";
        out += "<text x=\"" + detail::num(ml + 25) + "\" y=\"" + detail::num(ly) +
               "\" font-family=\"sans-serif\" font-size=\"11\">" + detail::escape(series[i].name) +
               "</text>\n";
        ly += 15;
    }

    out += "</svg>\n";
    return out;
}

} // namespace lawline::svg
