#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "foilgen/error.hpp"
#include "foilgen/geometry.hpp"
#include "foilgen/text.hpp"

namespace foilgen::svg {

enum class SeriesKind { Line, Scatter };

struct Series {
    std::string label;
    std::vector<Point> points;
    SeriesKind kind = SeriesKind::Line;
};

struct Plot {
    int width = 640;
    int height = 480;
    std::string title;
    std::string x_label;
    std::string y_label;
    bool equal_aspect = false;  // airfoil outlines
    std::vector<Series> series;
};

inline std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default:
                // Control characters are not allowed in XML 1.0 text.
                if (static_cast<unsigned char>(c) >= 0x20 || c == '\n' || c == '\t') out += c;
        }
    }
    return out;
}

/// Round tick positions covering [lo, hi], roughly `target` of them.
inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
    if (!(hi > lo)) return {lo};
    const double raw = (hi - lo) / std::max(1, target);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    const double step = (r < 1.5 ? 1.0 : r < 3.0 ? 2.0 : r < 7.0 ? 5.0 : 10.0) * mag;
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step)
        ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    return ticks;
}

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors[i % 10];
}

inline std::string render(const Plot& p) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : p.series)
        for (const auto& q : s.points) {
            if (!std::isfinite(q.x) || !std::isfinite(q.y)) continue;
            x0 = std::min(x0, q.x);
            x1 = std::max(x1, q.x);
            y0 = std::min(y0, q.y);
            y1 = std::max(y1, q.y);
        }
    if (!std::isfinite(x0)) {
        x0 = y0 = 0.0;
        x1 = y1 = 1.0;
    }
    if (x1 - x0 < 1e-12) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if (y1 - y0 < 1e-12) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    const double padx = 0.05 * (x1 - x0), pady = 0.05 * (y1 - y0);
    x0 -= padx;
    x1 += padx;
    y0 -= pady;
    y1 += pady;

    const double left = 70, right = 20 + (p.series.size() > 1 ? 120 : 0), top = 40, bottom = 50;
    const double pw = p.width - left - right, ph = p.height - top - bottom;
    double sx = pw / (x1 - x0), sy = ph / (y1 - y0);
    if (p.equal_aspect) {
        const double s = std::min(sx, sy);
        const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
        sx = sy = s;
        x0 = cx - 0.5 * pw / s;
        x1 = cx + 0.5 * pw / s;
        y0 = cy - 0.5 * ph / s;
        y1 = cy + 0.5 * ph / s;
    }
    auto X = [&](double x) { return left + (x - x0) * sx; };
    auto Y = [&](double y) { return top + ph - (y - y0) * sy; };
    auto f = [](double v) { return text::format_fixed(v, 2); };

    std::string o;
    o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(p.width) + "\" height=\"" +
         std::to_string(p.height) + "\" viewBox=\"0 0 " + std::to_string(p.width) + " " + std::to_string(p.height) + "\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!p.title.empty())
        o += "<text x=\"" + f(p.width / 2.0) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
             escape(p.title) + "</text>\n";
    o += "<rect x=\"" + f(left) + "\" y=\"" + f(top) + "\" width=\"" + f(pw) + "\" height=\"" + f(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    o += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (double t : nice_ticks(x0, x1)) {
        o += "<line x1=\"" + f(X(t)) + "\" y1=\"" + f(top + ph) + "\" x2=\"" + f(X(t)) + "\" y2=\"" + f(top + ph + 5) +
             "\" stroke=\"black\"/>";
        o += "<text x=\"" + f(X(t)) + "\" y=\"" + f(top + ph + 18) + "\" text-anchor=\"middle\">" + escape(text::format_double(t)) + "</text>\n";
    }
    for (double t : nice_ticks(y0, y1)) {
        o += "<line x1=\"" + f(left - 5) + "\" y1=\"" + f(Y(t)) + "\" x2=\"" + f(left) + "\" y2=\"" + f(Y(t)) +
             "\" stroke=\"black\"/>";
        o += "<text x=\"" + f(left - 8) + "\" y=\"" + f(Y(t) + 4) + "\" text-anchor=\"end\">" + escape(text::format_double(t)) + "</text>\n";
    }
    if (!p.x_label.empty())
        o += "<text x=\"" + f(left + pw / 2) + "\" y=\"" + f(p.height - 10.0) + "\" text-anchor=\"middle\">" + escape(p.x_label) + "</text>\n";
    if (!p.y_label.empty())
        o += "<text transform=\"translate(16," + f(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" + escape(p.y_label) + "</text>\n";
    o += "</g>\n";

    o += "<clipPath id=\"plot\"><rect x=\"" + f(left) + "\" y=\"" + f(top) + "\" width=\"" + f(pw) + "\" height=\"" + f(ph) + "\"/></clipPath>\n";
    o += "<g clip-path=\"url(#plot)\">\n";
    for (std::size_t i = 0; i < p.series.size(); ++i) {
        const auto& s = p.series[i];
        if (s.kind == SeriesKind::Line) {
            std::string pts;
            for (const auto& q : s.points) {
                if (!std::isfinite(q.x) || !std::isfinite(q.y)) continue;
                if (!pts.empty()) pts += ' ';
                pts += f(X(q.x)) + "," + f(Y(q.y));
            }
            o += "<polyline fill=\"none\" stroke=\"" + std::string(palette(i)) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        } else {
            for (const auto& q : s.points) {
                if (!std::isfinite(q.x) || !std::isfinite(q.y)) continue;
                o += "<circle cx=\"" + f(X(q.x)) + "\" cy=\"" + f(Y(q.y)) + "\" r=\"2.5\" fill=\"" + palette(i) + "\"/>\n";
            }
        }
    }
    o += "</g>\n";
    if (p.series.size() > 1) {
        o += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
        for (std::size_t i = 0; i < p.series.size(); ++i) {
            const double ly = top + 10 + 16.0 * static_cast<double>(i);
            const double lx = left + pw + 10;
            o += "<rect x=\"" + f(lx) + "\" y=\"" + f(ly - 8) + "\" width=\"10\" height=\"10\" fill=\"" + palette(i) + "\"/>";
            o += "<text x=\"" + f(lx + 14) + "\" y=\"" + f(ly + 1) + "\">" + escape(p.series[i].label) + "</text>\n";
        }
        o += "</g>\n";
    }
    o += "</svg>\n";
    return o;
}

inline void write(const Plot& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path);
    out << render(p);
    if (!out) throw Error(Errc::IoFailure, "write failed for " + path);
}

/// Closed outline series for an airfoil.
inline Series outline(const RawAirfoil& a, std::string label = {}) {
    return {label.empty() ? a.name : std::move(label), a.points, SeriesKind::Line};
}

}  // namespace foilgen::svg
