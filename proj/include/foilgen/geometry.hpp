#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "foilgen/error.hpp"
#include "foilgen/text.hpp"

namespace foilgen {

inline constexpr std::size_t kSurfacePoints = 100;
inline constexpr std::size_t kAirfoilDim = 2 * kSurfacePoints;

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Airfoil outline as a single loop TE -> upper -> LE -> lower -> TE.
struct RawAirfoil {
    std::string name;
    std::vector<Point> points;
};

enum class DatFormat { Selig, Lednicer };

namespace detail {

enum class LineKind { Blank, Coordinate, Text, Broken };

struct ClassifiedLine {
    LineKind kind = LineKind::Blank;
    Point p;
};

inline ClassifiedLine classify(std::string_view line) {
    auto toks = text::tokens(line);
    if (toks.empty()) return {};
    auto first = text::parse_double(toks[0]);
    if (!first) return {LineKind::Text, {}};
    if (toks.size() != 2) return {LineKind::Broken, {}};
    auto second = text::parse_double(toks[1]);
    if (!second) return {LineKind::Broken, {}};
    return {LineKind::Coordinate, {*first, *second}};
}

inline double signed_area(std::span<const Point> pts) {
    double a = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        const auto& q = pts[(i + 1) % pts.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

}  // namespace detail

/// Parses a Selig or Lednicer coordinate file. Free-text notes after the
/// coordinate block are ignored; any non-numeric token inside it is an error.
inline RawAirfoil parse_dat(std::string_view content) {
    auto all = text::lines(content);
    std::size_t idx = 0;
    while (idx < all.size() && text::trim(all[idx]).empty()) ++idx;
    if (idx >= all.size()) throw Error(Errc::MalformedFile, "empty file");

    RawAirfoil out;
    out.name = std::string(text::trim(all[idx]));
    ++idx;
    while (idx < all.size() && text::trim(all[idx]).empty()) ++idx;
    if (idx >= all.size()) throw Error(Errc::MalformedFile, "no coordinate lines");

    auto head = detail::classify(all[idx]);
    if (head.kind == detail::LineKind::Text || head.kind == detail::LineKind::Broken) {
        auto toks = text::tokens(all[idx]);
        bool numeric = std::all_of(toks.begin(), toks.end(),
                                   [](auto t) { return text::parse_double(t).has_value(); });
        if (numeric) throw Error(Errc::AmbiguousFormat, "line 2 holds " + std::to_string(toks.size()) + " values");
        throw Error(Errc::MalformedFile, "non-numeric token on line 2");
    }

    DatFormat format = DatFormat::Selig;
    std::size_t n_upper = 0;
    std::size_t n_lower = 0;
    if (head.p.x > 1.0 && head.p.y > 1.0) {
        if (head.p.x != std::floor(head.p.x) || head.p.y != std::floor(head.p.y))
            throw Error(Errc::AmbiguousFormat, "line 2 values exceed 1 but are not point counts");
        format = DatFormat::Lednicer;
        n_upper = static_cast<std::size_t>(head.p.x);
        n_lower = static_cast<std::size_t>(head.p.y);
        ++idx;
    }

    std::vector<Point> pts;
    bool trailing = false;
    for (; idx < all.size(); ++idx) {
        auto c = detail::classify(all[idx]);
        switch (c.kind) {
            case detail::LineKind::Blank: break;
            case detail::LineKind::Coordinate:
                if (trailing)
                    throw Error(Errc::MalformedFile, "non-numeric line inside coordinate block at line " +
                                                         std::to_string(idx + 1));
                if (!std::isfinite(c.p.x) || !std::isfinite(c.p.y))
                    throw Error(Errc::MalformedFile, "non-finite coordinate at line " + std::to_string(idx + 1));
                pts.push_back(c.p);
                break;
            case detail::LineKind::Text:
                if (pts.empty())
                    throw Error(Errc::MalformedFile, "non-numeric token at line " + std::to_string(idx + 1));
                trailing = true;
                break;
            case detail::LineKind::Broken:
                throw Error(Errc::MalformedFile, "bad coordinate line " + std::to_string(idx + 1) + ": '" +
                                                     std::string(text::trim(all[idx])) + "'");
        }
    }

    if (format == DatFormat::Lednicer) {
        if (pts.size() != n_upper + n_lower)
            throw Error(Errc::MalformedFile, "Lednicer header announces " + std::to_string(n_upper + n_lower) +
                                                 " points, found " + std::to_string(pts.size()));
        std::vector<Point> loop;
        loop.reserve(pts.size());
        for (std::size_t i = n_upper; i-- > 0;) loop.push_back(pts[i]);
        for (std::size_t i = n_upper; i < pts.size(); ++i) loop.push_back(pts[i]);
        pts = std::move(loop);
    }

    if (pts.size() < 6) throw Error(Errc::MalformedFile, "fewer than 6 points");
    // Canonical TE->upper->LE->lower->TE is counter-clockwise.
    if (detail::signed_area(pts) < 0.0) std::reverse(pts.begin(), pts.end());
    out.points = std::move(pts);
    return out;
}

inline RawAirfoil read_dat_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_dat(ss.str());
}

/// Shifts and scales so the outline spans x in [0, 1]; y is scaled by the same chord.
inline RawAirfoil rescale_chord(RawAirfoil airfoil) {
    if (airfoil.points.empty()) throw Error(Errc::MalformedFile, "no points");
    auto [lo, hi] = std::minmax_element(airfoil.points.begin(), airfoil.points.end(),
                                        [](const Point& a, const Point& b) { return a.x < b.x; });
    const double x0 = lo->x;
    const double chord = hi->x - x0;
    if (!(chord > 0.0)) throw Error(Errc::DegenerateSurface, "zero chord");
    for (auto& p : airfoil.points) {
        p.x = (p.x - x0) / chord;
        p.y = p.y / chord;
    }
    // Pin the extremes exactly against rounding in the division.
    for (auto& p : airfoil.points) {
        if (p.x < 0.0) p.x = 0.0;
        if (p.x > 1.0) p.x = 1.0;
    }
    return airfoil;
}

struct CosineGrid {
    std::vector<double> xs;
    std::size_t size() const { return xs.size(); }
};

/// Half-cosine spacing (1 - cos(pi j / (m-1))) / 2, clustered at both ends.
inline CosineGrid cosine_grid(std::size_t m = kSurfacePoints) {
    if (m < 2) throw Error(Errc::InvalidCount, "grid needs at least 2 points");
    CosineGrid g;
    g.xs.resize(m);
    const double denom = static_cast<double>(m - 1);
    for (std::size_t j = 0; j < m; ++j) {
        if (2 * j + 1 == m) {
            g.xs[j] = 0.5;
            continue;
        }
        // Evaluate from the nearer end and mirror, so xs[j] + xs[m-1-j] == 1.
        const std::size_t k = std::min(j, m - 1 - j);
        const double t = std::numbers::pi * static_cast<double>(k) / denom;
        const double s = std::sin(0.5 * t);
        const double near = s * s;  // (1 - cos t) / 2
        g.xs[j] = (k == j) ? near : 1.0 - near;
    }
    g.xs.front() = 0.0;
    g.xs.back() = 1.0;
    return g;
}

/// Natural cubic spline through strictly increasing knots.
class CubicSpline {
public:
    CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        m_.assign(n, 0.0);
        if (n < 3) return;
        std::vector<double> a(n, 0.0), b(n, 1.0), c(n, 0.0), r(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1];
            const double h1 = x_[i + 1] - x_[i];
            a[i] = h0;
            b[i] = 2.0 * (h0 + h1);
            c[i] = h1;
            r[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
        }
        // Thomas algorithm; rows 0 and n-1 pin the second derivative to zero.
        for (std::size_t i = 1; i < n; ++i) {
            const double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            r[i] -= w * r[i - 1];
        }
        m_[n - 1] = r[n - 1] / b[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) m_[i] = (r[i] - c[i] * m_[i + 1]) / b[i];
    }

    double operator()(double x) const {
        const std::size_t n = x_.size();
        if (x <= x_.front()) return y_.front() + slope(0, true) * (x - x_.front());
        if (x >= x_.back()) return y_.back() + slope(n - 2, false) * (x - x_.back());
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        if (x == x_[i]) return y_[i];
        const double h = x_[i + 1] - x_[i];
        const double t0 = x_[i + 1] - x;
        const double t1 = x - x_[i];
        return (m_[i] * t0 * t0 * t0 + m_[i + 1] * t1 * t1 * t1) / (6.0 * h) +
               (y_[i] / h - m_[i] * h / 6.0) * t0 + (y_[i + 1] / h - m_[i + 1] * h / 6.0) * t1;
    }

private:
    // First derivative at the left (at_left) or right end of interval i.
    double slope(std::size_t i, bool at_left) const {
        const double h = x_[i + 1] - x_[i];
        const double d = (y_[i + 1] - y_[i]) / h;
        if (at_left) return d - h * (2.0 * m_[i] + m_[i + 1]) / 6.0;
        return d + h * (m_[i] + 2.0 * m_[i + 1]) / 6.0;
    }

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> m_;
};

struct Surfaces {
    std::vector<double> upper;
    std::vector<double> lower;
};

namespace detail {

// Stations closer than this (chord units) are treated as duplicates.
inline constexpr double kDuplicateTolerance = 1e-6;

inline std::vector<double> fit_surface(std::vector<Point> pts, const CosineGrid& grid, const char* which) {
    std::stable_sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < pts.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < pts.size() && pts[j].x - pts[i].x <= kDuplicateTolerance) sum += pts[j++].y;
        xs.push_back(pts[i].x);
        ys.push_back(sum / static_cast<double>(j - i));
        i = j;
    }
    if (xs.size() < 3)
        throw Error(Errc::DegenerateSurface,
                    std::string(which) + " surface has " + std::to_string(xs.size()) + " distinct x stations");
    CubicSpline spline(std::move(xs), std::move(ys));
    std::vector<double> out(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) out[j] = spline(grid.xs[j]);
    return out;
}

}  // namespace detail

/// Splits the loop at the leading edge (minimum x) and evaluates a spline of
/// each surface on the grid. Endpoint values come from the raw LE/TE points.
inline Surfaces resample(const RawAirfoil& airfoil, const CosineGrid& grid) {
    const auto& p = airfoil.points;
    if (p.size() < 3) throw Error(Errc::DegenerateSurface, "too few points");
    double xmin = p[0].x;
    for (const auto& q : p) xmin = std::min(xmin, q.x);
    std::size_t le_first = 0;
    while (p[le_first].x != xmin) ++le_first;
    std::size_t le_last = le_first;
    while (le_last + 1 < p.size() && p[le_last + 1].x == xmin) ++le_last;

    std::vector<Point> upper(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(le_first) + 1);
    std::vector<Point> lower(p.begin() + static_cast<std::ptrdiff_t>(le_last), p.end());

    Surfaces s;
    s.upper = detail::fit_surface(upper, grid, "upper");
    s.lower = detail::fit_surface(lower, grid, "lower");
    s.upper.front() = p[le_first].y;
    s.upper.back() = p.front().y;
    s.lower.front() = p[le_last].y;
    s.lower.back() = p.back().y;
    return s;
}

/// Upper LE->TE followed by lower LE->TE.
inline Eigen::VectorXd flatten(const Surfaces& s) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(s.upper.size() + s.lower.size()));
    Eigen::Index k = 0;
    for (double y : s.upper) v[k++] = y;
    for (double y : s.lower) v[k++] = y;
    return v;
}

inline Surfaces split(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const auto m = v.size() / 2;
    Surfaces s;
    s.upper.assign(v.data(), v.data() + m);
    s.lower.assign(v.data() + m, v.data() + 2 * m);
    return s;
}

struct NormalizedDataset {
    Eigen::MatrixXd rows;  // one airfoil per row
    double scale = 1.0;
};

/// Scales every value by one global coefficient so the largest |y| becomes 1.
inline NormalizedDataset normalize_dataset(const Eigen::Ref<const Eigen::MatrixXd>& rows) {
    if (rows.rows() == 0) throw Error(Errc::EmptyDataset, "no airfoils to normalize");
    if (!rows.allFinite()) throw Error(Errc::MalformedFile, "non-finite values in dataset");
    const double peak = rows.cwiseAbs().maxCoeff();
    if (peak == 0.0) throw Error(Errc::AllZero, "all values are zero");
    NormalizedDataset out;
    out.rows = rows / peak;  // division keeps the peak entry at exactly +-1
    out.scale = 1.0 / peak;
    return out;
}

/// Least-squares polynomial weights for a window of `window` samples,
/// evaluated at sample `position` (0-based) within that window.
inline std::vector<double> savgol_weights(int window, int order, int position) {
    const int half = window / 2;
    Eigen::MatrixXd a(window, order + 1);
    for (int i = 0; i < window; ++i) {
        double t = 1.0;
        for (int j = 0; j <= order; ++j) {
            a(i, j) = t;
            t *= static_cast<double>(i - half);
        }
    }
    Eigen::RowVectorXd basis(order + 1);
    double t = 1.0;
    for (int j = 0; j <= order; ++j) {
        basis[j] = t;
        t *= static_cast<double>(position - half);
    }
    Eigen::MatrixXd pinv = (a.transpose() * a).ldlt().solve(a.transpose());
    Eigen::RowVectorXd w = basis * pinv;
    return {w.data(), w.data() + w.size()};
}

/// Savitzky-Golay smoothing; the first and last half-window are evaluated
/// from the polynomial fitted on the first/last full window.
inline std::vector<double> savgol_smooth(std::span<const double> y, int window = 7, int order = 2) {
    const auto n = static_cast<int>(y.size());
    if (window <= 0 || window % 2 == 0 || window <= order || window > n || order < 0)
        throw Error(Errc::BadWindow, "window " + std::to_string(window) + " invalid for order " +
                                         std::to_string(order) + " and length " + std::to_string(n));
    const int half = window / 2;
    std::vector<std::vector<double>> weights(static_cast<std::size_t>(window));
    for (int pos = 0; pos < window; ++pos) weights[static_cast<std::size_t>(pos)] = savgol_weights(window, order, pos);

    std::vector<double> out(y.size());
    auto apply = [&](int start, int pos) {
        const auto& w = weights[static_cast<std::size_t>(pos)];
        double acc = 0.0;
        for (int k = 0; k < window; ++k) acc += w[static_cast<std::size_t>(k)] * y[static_cast<std::size_t>(start + k)];
        return acc;
    };
    for (int i = 0; i < n; ++i) {
        if (i < half)
            out[static_cast<std::size_t>(i)] = apply(0, i);
        else if (i >= n - half)
            out[static_cast<std::size_t>(i)] = apply(n - window, i - (n - window));
        else
            out[static_cast<std::size_t>(i)] = apply(i - half, half);
    }
    return out;
}

/// Smooths each surface of a flattened airfoil independently.
inline Eigen::VectorXd smooth_airfoil(const Eigen::Ref<const Eigen::VectorXd>& v, int window = 7, int order = 2) {
    auto s = split(v);
    s.upper = savgol_smooth(s.upper, window, order);
    s.lower = savgol_smooth(s.lower, window, order);
    return flatten(s);
}

/// Rebuilds a TE->upper->LE->lower->TE loop from a normalized vector.
inline RawAirfoil to_airfoil(std::string name, const Eigen::Ref<const Eigen::VectorXd>& normalized, double scale,
                             const CosineGrid& grid) {
    const auto m = static_cast<Eigen::Index>(grid.size());
    if (normalized.size() != 2 * m)
        throw Error(Errc::ShapeMismatch, "expected " + std::to_string(2 * m) + " values, got " +
                                             std::to_string(normalized.size()));
    RawAirfoil a;
    a.name = std::move(name);
    for (Eigen::Index j = m; j-- > 0;) a.points.push_back({grid.xs[static_cast<std::size_t>(j)], normalized[j] / scale});
    for (Eigen::Index j = 0; j < m; ++j) {
        Point q{grid.xs[static_cast<std::size_t>(j)], normalized[m + j] / scale};
        if (j == 0 && q == a.points.back()) continue;
        a.points.push_back(q);
    }
    return a;
}

/// Selig-format text with round-trip precision.
inline std::string write_selig(const RawAirfoil& a) {
    std::string out = a.name.empty() ? std::string("airfoil") : a.name;
    out += '\n';
    for (const auto& p : a.points) {
        out += text::format_double(p.x);
        out += ' ';
        out += text::format_double(p.y);
        out += '\n';
    }
    return out;
}

/// Maximum thickness over chord, from linear interpolation of both surfaces.
inline double thickness_ratio(const RawAirfoil& a) {
    const auto& p = a.points;
    if (p.size() < 3) throw Error(Errc::DegenerateSurface, "too few points");
    std::size_t le = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i].x < p[le].x) le = i;
    std::vector<Point> up(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(le) + 1);
    std::vector<Point> lo(p.begin() + static_cast<std::ptrdiff_t>(le), p.end());
    auto by_x = [](const Point& l, const Point& r) { return l.x < r.x; };
    std::stable_sort(up.begin(), up.end(), by_x);
    std::stable_sort(lo.begin(), lo.end(), by_x);
    auto interp = [](const std::vector<Point>& s, double x) {
        if (x <= s.front().x) return s.front().y;
        if (x >= s.back().x) return s.back().y;
        auto it = std::upper_bound(s.begin(), s.end(), x, [](double v, const Point& q) { return v < q.x; });
        const auto& b = *it;
        const auto& a0 = *(it - 1);
        if (b.x == a0.x) return b.y;
        return a0.y + (b.y - a0.y) * (x - a0.x) / (b.x - a0.x);
    };
    const double x0 = p[le].x;
    double x1 = x0;
    for (const auto& q : p) x1 = std::max(x1, q.x);
    const double chord = x1 - x0;
    if (!(chord > 0.0)) throw Error(Errc::DegenerateSurface, "zero chord");
    double t = 0.0;
    constexpr int kStations = 400;
    for (int i = 0; i <= kStations; ++i) {
        const double x = x0 + chord * static_cast<double>(i) / kStations;
        t = std::max(t, interp(up, x) - interp(lo, x));
    }
    return t / chord;
}

}  // namespace foilgen
