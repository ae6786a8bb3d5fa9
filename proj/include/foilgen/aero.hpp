#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "foilgen/error.hpp"
#include "foilgen/geometry.hpp"
#include "foilgen/text.hpp"

namespace foilgen {

struct FlowConditions {
    double reynolds = 2e6;
    double mach = 0.02;
    double alpha = 0.0;  // degrees

    void validate() const {
        if (!(reynolds > 0.0)) throw Error(Errc::ConfigInvalid, "reynolds must be positive");
        if (!(mach >= 0.0 && mach < 0.3)) throw Error(Errc::ConfigInvalid, "mach must lie in [0, 0.3)");
        if (!(alpha >= -20.0 && alpha <= 20.0)) throw Error(Errc::ConfigInvalid, "alpha must lie in [-20, 20] degrees");
    }
};

enum class AeroSource { Xfoil, Panel, Surrogate };

inline const char* aero_source_name(AeroSource s) {
    switch (s) {
        case AeroSource::Xfoil: return "xfoil";
        case AeroSource::Panel: return "panel";
        case AeroSource::Surrogate: return "surrogate";
    }
    return "?";
}

struct AeroResult {
    double cl = 0.0;
    double cd = 0.0;
    bool converged = false;
    AeroSource source = AeroSource::Panel;
};

struct FitnessTargets {
    double cl_target = 0.6;
    double cd_target = 0.006;
};

inline constexpr double kUnconvergedFitness = -1e6;

inline void validate_targets(const FitnessTargets& t) {
    if (!(t.cl_target > 0.0) || !(t.cd_target > 0.0))
        throw Error(Errc::NonPositiveTarget, "fitness targets must be strictly positive");
}

/// -((cl - cl_t) / cl_t)^2 - ((cd - cd_t) / cd_t)^2
inline double fitness(double cl, double cd, const FitnessTargets& t) {
    validate_targets(t);
    const double a = (cl - t.cl_target) / t.cl_target;
    const double b = (cd - t.cd_target) / t.cd_target;
    return -a * a - b * b;
}

inline double fitness(const AeroResult& r, const FitnessTargets& t) {
    validate_targets(t);
    if (!r.converged || !std::isfinite(r.cl) || !std::isfinite(r.cd)) return kUnconvergedFitness;
    return fitness(r.cl, r.cd, t);
}

/// Two-sided turbulent flat-plate friction with a thickness form factor.
inline double skin_friction_drag(double reynolds, double thickness_over_chord) {
    if (!(reynolds > 0.0)) throw Error(Errc::ConfigInvalid, "reynolds must be positive");
    const double cf = 0.074 * std::pow(reynolds, -0.2);
    return 2.0 * cf * (1.0 + 2.0 * thickness_over_chord);
}

// ---------------------------------------------------------------------------
// Linear-strength vortex panel method.

namespace detail {

inline bool segments_cross(const Point& a, const Point& b, const Point& c, const Point& d) {
    auto orient = [](const Point& p, const Point& q, const Point& r) {
        return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    };
    const double d1 = orient(c, d, a);
    const double d2 = orient(c, d, b);
    const double d3 = orient(a, b, c);
    const double d4 = orient(a, b, d);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

/// Closed clockwise node list starting and ending at the trailing edge,
/// lower surface first.
inline std::vector<Point> panel_nodes(const RawAirfoil& airfoil) {
    const auto& in = airfoil.points;
    if (in.size() < 4) throw Error(Errc::DegenerateGeometry, "too few points for a panel model");
    for (const auto& p : in)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(Errc::DegenerateGeometry, "non-finite coordinate");

    // Input runs TE -> upper -> LE -> lower -> TE; reverse it and close the TE.
    std::vector<Point> pts(in.rbegin(), in.rend());
    const Point te{0.5 * (pts.front().x + pts.back().x), 0.5 * (pts.front().y + pts.back().y)};
    pts.front() = te;
    pts.back() = te;
    std::vector<Point> nodes;
    nodes.reserve(pts.size());
    for (const auto& p : pts)
        if (nodes.empty() || !(p == nodes.back())) nodes.push_back(p);
    if (!(nodes.back() == te)) nodes.push_back(te);
    if (nodes.size() < 4) throw Error(Errc::DegenerateGeometry, "too few distinct points");

    double xmin = nodes.front().x, xmax = nodes.front().x;
    for (const auto& p : nodes) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
    }
    const double chord = xmax - xmin;
    if (!(chord > 0.0)) throw Error(Errc::DegenerateGeometry, "zero chord");
    const std::size_t m = nodes.size() - 1;
    for (std::size_t j = 0; j < m; ++j)
        if (std::hypot(nodes[j + 1].x - nodes[j].x, nodes[j + 1].y - nodes[j].y) <= 1e-12 * chord)
            throw Error(Errc::DegenerateGeometry, "zero-length panel " + std::to_string(j));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 2; j < m; ++j) {
            if (i == 0 && j == m - 1) continue;  // share the trailing-edge node
            if (segments_cross(nodes[i], nodes[i + 1], nodes[j], nodes[j + 1]))
                throw Error(Errc::DegenerateGeometry, "contour intersects itself (panels " + std::to_string(i) +
                                                           " and " + std::to_string(j) + ")");
        }
    return nodes;
}

}  // namespace detail

struct PanelSolution {
    double cl = 0.0;
    Eigen::VectorXd gamma;  // nodal strengths over 2 pi V
    double chord = 0.0;
};

/// Inviscid lift from a linear-strength vortex distribution with the Kutta
/// condition gamma_TE,lower + gamma_TE,upper = 0.
inline PanelSolution solve_panels(const RawAirfoil& airfoil, double alpha_deg) {
    const auto nodes = detail::panel_nodes(airfoil);
    const auto m = static_cast<Eigen::Index>(nodes.size() - 1);
    const double alpha = alpha_deg * std::numbers::pi / 180.0;

    Eigen::VectorXd xc(m), yc(m), theta(m), s(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto& a = nodes[static_cast<std::size_t>(j)];
        const auto& b = nodes[static_cast<std::size_t>(j + 1)];
        xc[j] = 0.5 * (a.x + b.x);
        yc[j] = 0.5 * (a.y + b.y);
        theta[j] = std::atan2(b.y - a.y, b.x - a.x);
        s[j] = std::hypot(b.x - a.x, b.y - a.y);
    }

    Eigen::MatrixXd an = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::VectorXd rhs(m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
        rhs[i] = std::sin(theta[i] - alpha);
        for (Eigen::Index j = 0; j < m; ++j) {
            double cn1, cn2;
            if (i == j) {
                cn1 = -1.0;
                cn2 = 1.0;
            } else {
                const auto& nj = nodes[static_cast<std::size_t>(j)];
                const double dx = xc[i] - nj.x;
                const double dy = yc[i] - nj.y;
                const double cj = std::cos(theta[j]), sj = std::sin(theta[j]);
                const double A = -dx * cj - dy * sj;
                const double B = dx * dx + dy * dy;
                const double C = std::sin(theta[i] - theta[j]);
                const double D = std::cos(theta[i] - theta[j]);
                const double E = dx * sj - dy * cj;
                const double F = std::log1p(s[j] * (s[j] + 2.0 * A) / B);
                const double G = std::atan2(E * s[j], B + A * s[j]);
                const double t2 = theta[i] - 2.0 * theta[j];
                const double Q = dx * std::cos(t2) - dy * std::sin(t2);
                cn2 = D + 0.5 * Q * F / s[j] - (A * C + D * E) * G / s[j];
                cn1 = 0.5 * D * F + C * G - cn2;
            }
            an(i, j) += cn1;
            an(i, j + 1) += cn2;
        }
    }
    an(m, 0) = 1.0;
    an(m, m) = 1.0;
    rhs[m] = 0.0;

    PanelSolution sol;
    sol.gamma = an.partialPivLu().solve(rhs);
    double xmin = nodes.front().x, xmax = nodes.front().x;
    for (const auto& p : nodes) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
    }
    sol.chord = xmax - xmin;
    double circ = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) circ += (sol.gamma[j] + sol.gamma[j + 1]) * s[j];
    sol.cl = 2.0 * std::numbers::pi * circ / sol.chord;
    if (!std::isfinite(sol.cl)) throw Error(Errc::DegenerateGeometry, "panel system is singular");
    return sol;
}

/// Panel lift plus empirical friction drag. Always converged when it returns.
inline AeroResult eval_panel(const RawAirfoil& airfoil, const FlowConditions& cond) {
    cond.validate();
    const auto sol = solve_panels(airfoil, cond.alpha);
    AeroResult r;
    r.cl = sol.cl;
    r.cd = skin_friction_drag(cond.reynolds, thickness_ratio(airfoil));
    r.converged = true;
    r.source = AeroSource::Panel;
    return r;
}

// ---------------------------------------------------------------------------
// XFoil subprocess adapter.

struct XfoilOptions {
    std::string executable;  // empty: $FOILGEN_XFOIL, then "xfoil" on PATH
    std::string temp_root;   // empty: $FOILGEN_TMPDIR, then the system temp directory
    double timeout_s = 10.0;
    int iterations = 200;
    int panels = 160;
};

struct PolarRow {
    double alpha = 0.0;
    double cl = 0.0;
    double cd = 0.0;
};

/// Reads an XFoil polar dump. Columns are located from the dashed rule under
/// the header; an empty table means no point converged.
inline std::vector<PolarRow> parse_polar(std::string_view content) {
    const auto all = text::lines(content);
    std::size_t rule = all.size();
    for (std::size_t i = 1; i < all.size(); ++i) {
        auto t = text::trim(all[i]);
        if (!t.empty() && t.find_first_not_of("- ") == std::string_view::npos && t.find("--") != std::string_view::npos) {
            rule = i;
            break;
        }
    }
    if (rule == all.size()) throw Error(Errc::ParseFailure, "polar has no column rule");

    struct Span {
        std::size_t begin, end;
    };
    std::vector<Span> spans;
    const auto rl = all[rule];
    for (std::size_t i = 0; i < rl.size();) {
        if (rl[i] != '-') {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < rl.size() && rl[j] == '-') ++j;
        spans.push_back({i, j});
        i = j;
    }
    auto header = text::tokens(all[rule - 1]);
    if (header.size() != spans.size()) throw Error(Errc::ParseFailure, "polar header does not match its column rule");
    auto col = [&](std::string_view name) {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return k;
        throw Error(Errc::ParseFailure, "polar lacks column " + std::string(name));
    };
    const auto ca = col("alpha"), cl = col("CL"), cd = col("CD");

    // Fields are right-aligned under the rule; a field may start one column
    // before its dashes (sign), so each cell runs from the previous rule's end.
    auto cell = [&](std::string_view line, std::size_t k) {
        const std::size_t b = k == 0 ? 0 : spans[k - 1].end;
        const std::size_t e = std::min(line.size(), spans[k].end);
        if (b >= e) return std::string_view();
        return text::trim(line.substr(b, e - b));
    };
    std::vector<PolarRow> rows;
    for (std::size_t i = rule + 1; i < all.size(); ++i) {
        if (text::trim(all[i]).empty()) continue;
        auto a = text::parse_double(cell(all[i], ca));
        auto l = text::parse_double(cell(all[i], cl));
        auto d = text::parse_double(cell(all[i], cd));
        if (!a || !l || !d) throw Error(Errc::ParseFailure, "malformed polar row " + std::to_string(i + 1));
        rows.push_back({*a, *l, *d});
    }
    return rows;
}

namespace detail {

inline std::string find_on_path(const std::string& name) {
    if (name.find('/') != std::string::npos) return ::access(name.c_str(), X_OK) == 0 ? name : std::string();
    const char* path = std::getenv("PATH");
    if (!path) return {};
    std::string_view rest(path);
    while (true) {
        auto colon = rest.find(':');
        std::string dir(rest.substr(0, colon));
        if (dir.empty()) dir = ".";
        auto candidate = dir + "/" + name;
        if (::access(candidate.c_str(), X_OK) == 0) return candidate;
        if (colon == std::string_view::npos) return {};
        rest.remove_prefix(colon + 1);
    }
}

class TempDir {
public:
    explicit TempDir(const std::string& root) {
        std::string base = root;
        if (base.empty()) {
            const char* env = std::getenv("FOILGEN_TMPDIR");
            base = env && *env ? env : std::filesystem::temp_directory_path().string();
        }
        std::string templ = base + "/foilgen-XXXXXX";
        std::vector<char> buf(templ.begin(), templ.end());
        buf.push_back('\0');
        if (!::mkdtemp(buf.data())) throw Error(Errc::IoFailure, "cannot create temporary directory under " + base);
        path_ = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// Runs `exe` in `cwd` with `input` on stdin; output is discarded. Returns
/// false if the process had to be killed at the deadline.
inline bool run_with_timeout(const std::string& exe, const std::string& cwd, const std::string& input, double timeout_s) {
    int fds[2];
    if (::pipe(fds) != 0) throw Error(Errc::IoFailure, "pipe failed");
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(fds[0]);
        ::close(fds[1]);
        throw Error(Errc::IoFailure, "fork failed");
    }
    if (pid == 0) {
        ::dup2(fds[0], STDIN_FILENO);
        ::close(fds[0]);
        ::close(fds[1]);
        const int devnull = ::open("/dev/null", O_WRONLY);
        if (devnull >= 0) {
            ::dup2(devnull, STDOUT_FILENO);
            ::dup2(devnull, STDERR_FILENO);
        }
        if (::chdir(cwd.c_str()) != 0) ::_exit(126);
        ::execl(exe.c_str(), exe.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(fds[0]);
    // The command stream is small; a broken pipe just means XFoil exited early.
    auto old = ::signal(SIGPIPE, SIG_IGN);
    std::size_t off = 0;
    while (off < input.size()) {
        const auto n = ::write(fds[1], input.data() + off, input.size() - off);
        if (n <= 0) break;
        off += static_cast<std::size_t>(n);
    }
    ::close(fds[1]);
    ::signal(SIGPIPE, old);

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    int status = 0;
    while (true) {
        const pid_t w = ::waitpid(pid, &status, WNOHANG);
        if (w == pid) break;
        if (w < 0) throw Error(Errc::IoFailure, "waitpid failed");
        if (std::chrono::steady_clock::now() >= deadline) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            return false;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (WIFEXITED(status) && WEXITSTATUS(status) == 127)
        throw Error(Errc::ExecutableMissing, "could not execute " + exe);
    return true;
}

}  // namespace detail

inline std::string resolve_xfoil(const XfoilOptions& opt) {
    std::string name = opt.executable;
    if (name.empty()) {
        const char* env = std::getenv("FOILGEN_XFOIL");
        name = env && *env ? env : "xfoil";
    }
    auto found = detail::find_on_path(name);
    if (found.empty()) throw Error(Errc::ExecutableMissing, "XFoil executable '" + name + "' not found");
    return found;
}

/// Command stream for one viscous single-alpha analysis.
inline std::string xfoil_commands(const FlowConditions& cond, const XfoilOptions& opt) {
    std::ostringstream os;
    os << "PLOP\nG F\n\n"
       << "LOAD airfoil.dat\n"
       << "PPAR\nN " << opt.panels << "\n\n\n"
       << "OPER\n"
       << "VISC " << text::format_double(cond.reynolds) << "\n"
       << "MACH " << text::format_double(cond.mach) << "\n"
       << "ITER " << opt.iterations << "\n"
       << "PACC\npolar.txt\n\n"
       << "ALFA " << text::format_double(cond.alpha) << "\n"
       << "PACC\n\nQUIT\n";
    return os.str();
}

inline AeroResult eval_xfoil(const RawAirfoil& airfoil, const FlowConditions& cond, const XfoilOptions& opt = {}) {
    cond.validate();
    const auto exe = resolve_xfoil(opt);
    detail::TempDir dir(opt.temp_root);
    {
        std::ofstream out(dir.path() + "/airfoil.dat");
        out << write_selig(airfoil);
        if (!out) throw Error(Errc::IoFailure, "cannot write airfoil for XFoil");
    }
    AeroResult r;
    r.source = AeroSource::Xfoil;
    if (!detail::run_with_timeout(exe, dir.path(), xfoil_commands(cond, opt), opt.timeout_s)) return r;
    std::ifstream in(dir.path() + "/polar.txt");
    if (!in) throw Error(Errc::ParseFailure, "XFoil wrote no polar file");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto rows = parse_polar(ss.str());
    if (rows.empty()) return r;
    r.cl = rows.back().cl;
    r.cd = rows.back().cd;
    r.converged = std::isfinite(r.cl) && std::isfinite(r.cd) && r.cd > 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Evaluator selection.

enum class EvaluatorKind { Panel, Xfoil, Auto };

using AirfoilEvaluator = std::function<AeroResult(const RawAirfoil&)>;

/// Failures other than a missing executable are reported as unconverged.
inline AirfoilEvaluator make_airfoil_evaluator(EvaluatorKind kind, const FlowConditions& cond,
                                               const XfoilOptions& opt = {}) {
    cond.validate();
    if (kind == EvaluatorKind::Auto) {
        try {
            resolve_xfoil(opt);
            kind = EvaluatorKind::Xfoil;
        } catch (const Error&) {
            kind = EvaluatorKind::Panel;
        }
    }
    if (kind == EvaluatorKind::Xfoil) {
        resolve_xfoil(opt);
        return [cond, opt](const RawAirfoil& a) {
            try {
                return eval_xfoil(a, cond, opt);
            } catch (const Error& e) {
                if (e.code() == Errc::ExecutableMissing) throw;
                return AeroResult{0.0, 0.0, false, AeroSource::Xfoil};
            }
        };
    }
    return [cond](const RawAirfoil& a) {
        try {
            return eval_panel(a, cond);
        } catch (const Error&) {
            return AeroResult{0.0, 0.0, false, AeroSource::Panel};
        }
    };
}

}  // namespace foilgen
