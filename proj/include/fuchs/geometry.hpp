#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "core.hpp"
#include "errors.hpp"

namespace fuchs {

/// Piecewise-linear path in the complex plane. Invariants: at least one
/// vertex; consecutive vertices distinct. A single-vertex path is the
/// degenerate closed path produced by realizing an empty loop word.
using PolyPath = std::vector<Complex>;

/// One letter of a loop word: a simple counterclockwise (exponent +1) or
/// clockwise (exponent -1) lasso around the pole with the given 1-based
/// index. A word is traversed left to right.
struct LoopLetter {
    int pole_index = 0; // 1-based
    int exponent = 0;   // +1 or -1
};

using LoopWord = std::vector<LoopLetter>;

/// Reference point and argument choice fixing a branch of arg(x - t_j)
/// along a path; used when raising (x - t_j) to matrix powers.
struct BranchAnchor {
    int pole_index = 0;
    Complex anchor_point;
    double anchor_arg = 0.0;
};

/// Total change of arg(x - t_j) along a path, one entry per pole.
struct WindingRecord {
    std::vector<double> arg_change;
};

inline LoopWord inverse_word(const LoopWord& w) {
    LoopWord out(w.rbegin(), w.rend());
    for (auto& l : out) l.exponent = -l.exponent;
    return out;
}

/// Distance from point p to the closed segment [a, b].
inline double point_segment_distance(Complex p, Complex a, Complex b) {
    const Complex ab = b - a;
    const double len2 = std::norm(ab);
    if (len2 == 0.0) return std::abs(p - a);
    double s = ((p - a) * std::conj(ab)).real() / len2;
    s = std::clamp(s, 0.0, 1.0);
    return std::abs(p - (a + s * ab));
}

namespace detail {

inline void check_path(const PolyPath& path) {
    if (path.empty())
        raise(Errc::invalid_argument, "path must have at least one vertex");
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
        if (path[i] == path[i + 1])
            raise(Errc::invalid_argument,
                  "path has coincident consecutive vertices at position " + std::to_string(i));
}

inline void append_vertex(PolyPath& path, Complex v) {
    if (path.empty() || path.back() != v) path.push_back(v);
}

} // namespace detail

/// Continuous change of arg(x - pole) from the first to the last vertex.
/// Each straight segment subtends less than pi as seen from any point not on
/// it, so summing principal arguments of the per-segment ratios is exact.
/// Throws path_through_singularity if the path touches the pole.
inline double track_argument(const PolyPath& path, Complex pole) {
    detail::check_path(path);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        if (point_segment_distance(pole, path[i], path[i + 1]) == 0.0)
            raise(Errc::path_through_singularity,
                  "path segment " + std::to_string(i) + " passes through the pole");
        total += std::arg((path[i + 1] - pole) / (path[i] - pole));
    }
    if (path.size() == 1 && path[0] == pole)
        raise(Errc::path_through_singularity, "degenerate path sits on the pole");
    return total;
}

inline WindingRecord track_windings(const PolyPath& path, const std::vector<Complex>& poles) {
    WindingRecord rec;
    rec.arg_change.reserve(poles.size());
    for (Complex p : poles) rec.arg_change.push_back(track_argument(path, p));
    return rec;
}

/// Exact minimum distance from a path to a set of point obstacles, or to
/// disk boundaries when radii are given (distance to center minus radius;
/// negative means the path enters the disk).
inline double path_clearance(const PolyPath& path, const std::vector<Complex>& obstacles,
                             const std::vector<double>& radii = {}) {
    detail::check_path(path);
    if (!radii.empty() && radii.size() != obstacles.size())
        raise(Errc::invalid_argument, "path_clearance: radii count mismatch");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < obstacles.size(); ++j) {
        double d = std::numeric_limits<double>::infinity();
        if (path.size() == 1)
            d = std::abs(path[0] - obstacles[j]);
        for (std::size_t i = 0; i + 1 < path.size(); ++i)
            d = std::min(d, point_segment_distance(obstacles[j], path[i], path[i + 1]));
        if (!radii.empty()) d -= radii[j];
        best = std::min(best, d);
    }
    return best;
}

inline PolyPath reverse_path(const PolyPath& path) {
    return PolyPath(path.rbegin(), path.rend());
}

namespace detail {

inline constexpr double kArcCos = 0.98078528040323044913; // cos(pi/16)

/// Straight segment from a to b with polygonal arc detours around obstacles
/// that the segment passes too closely. Obstacles are points, or disks when
/// radii are nonzero; `skip` (0-based) is exempt (the routing target).
/// Detour arcs have vertex radius (radius_j + clearance) / cos(pi/16) so
/// every chord keeps at least `clearance` from the disk. The dodge side is
/// away from the obstacle; exact ties go toward positive imaginary side in
/// the plane.
inline PolyPath route_segment(Complex a, Complex b, const std::vector<Complex>& obstacles,
                              const std::vector<double>& radii, double clearance,
                              int skip = -1) {
    PolyPath verts{a};
    const Complex d = b - a;
    const double len = std::abs(d);
    if (len == 0.0) return verts;
    const Complex u = d / len;

    struct Blocker {
        double s;     // projection parameter along the segment
        double dperp; // signed perpendicular offset, + = left of travel
        int idx;
    };
    std::vector<Blocker> blockers;
    for (std::size_t j = 0; j < obstacles.size(); ++j) {
        if (static_cast<int>(j) == skip) continue;
        const double body = radii.empty() ? 0.0 : radii[j];
        const double rd = (body + clearance) / kArcCos;
        const Complex rel = (obstacles[j] - a) / u;
        const double s = rel.real();
        const double dperp = rel.imag();
        if (s <= -rd || s >= len + rd || std::abs(dperp) >= rd) continue;
        const double sc = std::clamp(s, 0.0, len);
        if (std::abs(a + sc * u - obstacles[j]) >= rd) continue;
        blockers.push_back({s, dperp, static_cast<int>(j)});
    }
    std::sort(blockers.begin(), blockers.end(),
              [](const Blocker& x, const Blocker& y) { return x.s < y.s; });

    for (const Blocker& bl : blockers) {
        const Complex p = obstacles[bl.idx];
        const double body = radii.empty() ? 0.0 : radii[bl.idx];
        const double rd = (body + clearance) / kArcCos;
        const double half = std::sqrt(std::max(rd * rd - bl.dperp * bl.dperp, 0.0));
        const double s_in = bl.s - half;
        const double s_out = bl.s + half;
        // An endpoint inside the dodge window: leave the straight run and let
        // the caller's clearance check decide whether the result is usable.
        if (s_in <= 0.0 || s_out >= len) continue;
        const Complex z_in = a + s_in * u;
        const Complex z_out = a + s_out * u;

        int side; // +1 = left of travel
        if (std::abs(bl.dperp) > 1e-9 * std::max(1.0, len))
            side = bl.dperp > 0 ? -1 : +1;
        else
            side = u.real() >= 0 ? +1 : -1; // tie: arc midpoint toward +Im in the plane
        const double phi_in = std::arg(z_in - p);
        const double phi_out = std::arg(z_out - p);
        double dphi = std::fmod(phi_out - phi_in, 2.0 * M_PI);
        if (dphi < 0) dphi += 2.0 * M_PI;
        double chosen = dphi;
        for (double cand : {dphi, dphi - 2.0 * M_PI}) {
            const Complex mid = p + rd * std::polar(1.0, phi_in + cand / 2.0);
            const int sgn = ((mid - a) / u).imag() > 0 ? +1 : -1;
            if (sgn == side) {
                chosen = cand;
                break;
            }
        }
        const int nseg = std::max(1, static_cast<int>(std::ceil(std::abs(chosen) / (M_PI / 8.0))));
        append_vertex(verts, z_in);
        for (int m = 1; m < nseg; ++m)
            append_vertex(verts, p + rd * std::polar(1.0, phi_in + chosen * m / nseg));
        append_vertex(verts, z_out);
    }
    append_vertex(verts, b);
    return verts;
}

/// Corridor from base to the circuit entry point of obstacle j (0-based).
/// The entry sits on the segment from the obstacle center toward base, at
/// circuit-vertex distance.
inline PolyPath corridor_to(int j, const std::vector<Complex>& obstacles,
                            const std::vector<double>& radii, Complex base,
                            double clearance, double vertex_radius) {
    const Complex p = obstacles[j];
    const Complex u = (base - p) / std::abs(base - p);
    const Complex entry = p + vertex_radius * u;
    return route_segment(base, entry, obstacles, radii, clearance, j);
}

} // namespace detail

/// Largest clearance we consider safe by default: a tenth of the smallest
/// pairwise obstacle separation.
inline double default_clearance(const std::vector<Complex>& poles) {
    const double sep = min_pole_separation(poles);
    if (!(sep > 0.0) || !std::isfinite(sep))
        return 0.1; // single pole: separation is infinite, any clearance works
    return 0.1 * sep;
}

/// Realize a loop word as a closed piecewise-linear path based at
/// `base_point`. Each letter contributes a lasso: a corridor from the base
/// toward the pole (with arc detours around other poles), a 16-gon circuit,
/// and the exact reversed corridor back (so corridor windings cancel).
///
/// With point poles (empty `radii`) the circuit is a 16-gon of vertex radius
/// `clearance` around the target, so the distance to the target on circuit
/// chords is clearance * cos(pi/16). With disk obstacles the circuit vertex
/// radius is (radius_j + clearance) / cos(pi/16), keeping the path at least
/// `clearance` outside every disk.
///
/// Preconditions: 2 * clearance < minimal obstacle separation (measured
/// between disk boundaries when radii are given); the base keeps more than
/// `clearance` from every obstacle; letters reference valid poles with
/// exponent +-1. Postcondition, checked exactly: the returned path keeps
/// distance >= clearance * (1 - 1e-9) from every obstacle that is not the
/// target of some letter, and >= clearance * cos(pi/16) * (1 - 1e-9) from
/// targets; otherwise realization_failure names a blocking pole.
inline PolyPath realize_loop(const LoopWord& word, const std::vector<Complex>& poles,
                             Complex base_point, double clearance,
                             const std::vector<double>& radii = {}) {
    const int n = static_cast<int>(poles.size());
    if (!radii.empty() && radii.size() != poles.size())
        raise(Errc::invalid_argument, "realize_loop: radii count mismatch");
    if (!(clearance > 0.0))
        raise(Errc::invalid_argument, "realize_loop: clearance must be positive");

    double sep = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double d = std::abs(poles[i] - poles[j]);
            if (!radii.empty()) d -= radii[i] + radii[j];
            sep = std::min(sep, d);
        }
    if (!(2.0 * clearance < sep))
        raise(Errc::invalid_argument,
              "realize_loop: clearance " + std::to_string(clearance) +
                  " is not below half the minimal obstacle separation");
    for (int j = 0; j < n; ++j) {
        const double body = radii.empty() ? 0.0 : radii[j];
        if (!(std::abs(base_point - poles[j]) - body > clearance))
            raise(Errc::invalid_argument,
                  "realize_loop: base point is within clearance of pole " + std::to_string(j + 1),
                  j + 1);
    }
    for (const LoopLetter& l : word) {
        if (l.pole_index < 1 || l.pole_index > n)
            raise(Errc::invalid_argument,
                  "realize_loop: letter references pole " + std::to_string(l.pole_index) +
                      " outside 1.." + std::to_string(n));
        if (l.exponent != 1 && l.exponent != -1)
            raise(Errc::invalid_argument, "realize_loop: letter exponent must be +1 or -1");
    }

    if (word.empty()) return PolyPath{base_point};

    PolyPath path{base_point};
    std::vector<bool> is_target(static_cast<std::size_t>(n), false);
    for (const LoopLetter& l : word) {
        const int j = l.pole_index - 1;
        is_target[static_cast<std::size_t>(j)] = true;
        const double body = radii.empty() ? 0.0 : radii[j];
        const double vr = radii.empty() ? clearance : (body + clearance) / detail::kArcCos;
        const PolyPath corridor =
            detail::corridor_to(j, poles, radii, base_point, clearance, vr);
        const Complex u = (base_point - poles[j]) / std::abs(base_point - poles[j]);
        for (Complex v : corridor) detail::append_vertex(path, v);
        for (int m = 1; m <= 16; ++m) {
            const double ang = l.exponent * 2.0 * M_PI * m / 16.0;
            detail::append_vertex(path, poles[j] + vr * u * std::polar(1.0, ang));
        }
        for (auto it = corridor.rbegin(); it != corridor.rend(); ++it)
            detail::append_vertex(path, *it);
    }

    for (int j = 0; j < n; ++j) {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < path.size(); ++i)
            d = std::min(d, point_segment_distance(poles[j], path[i], path[i + 1]));
        if (!radii.empty()) d -= radii[j];
        const double need =
            is_target[static_cast<std::size_t>(j)] ? clearance * detail::kArcCos : clearance;
        if (d < need * (1.0 - 1e-9))
            raise(Errc::realization_failure,
                  "realize_loop: pole " + std::to_string(j + 1) +
                      " blocks the realization (distance " + std::to_string(d) +
                      ", required " + std::to_string(need) + ")",
                  j + 1);
    }
    return path;
}

/// Order in which a large counterclockwise circle around the whole pole set,
/// started just above the direction base -> +infinity of its own arm system,
/// meets the corridors from `base` to the poles. Equivalently: ascending
/// effective arm angle. Computed by walking pairs of corridors in lockstep
/// by arclength and, at the first divergence, asking which one lies to the
/// right of travel (right = smaller angle).
inline std::vector<int> traversal_order(const std::vector<Complex>& poles, Complex base,
                                        double clearance) {
    const int n = static_cast<int>(poles.size());
    if (n == 0) return {};
    constexpr int kSamples = 4096;

    std::vector<PolyPath> corridors;
    std::vector<std::vector<double>> seg_lens(static_cast<std::size_t>(n));
    double longest = 0.0;
    for (int j = 0; j < n; ++j) {
        corridors.push_back(detail::corridor_to(j, poles, {}, base, clearance, clearance));
        const PolyPath& cor = corridors.back();
        auto& lens = seg_lens[static_cast<std::size_t>(j)];
        lens.resize(cor.size() - 1);
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < cor.size(); ++i) {
            lens[i] = std::abs(cor[i + 1] - cor[i]);
            total += lens[i];
        }
        longest = std::max(longest, total);
    }

    // Sample every corridor at the same absolute arclengths (clamping the
    // shorter ones at their endpoints). Corridors that share a straight
    // prefix then produce identical samples until they genuinely split, so
    // the first divergence found below is the geometric one.
    std::vector<std::vector<Complex>> dense(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const PolyPath& cor = corridors[static_cast<std::size_t>(j)];
        const auto& lens = seg_lens[static_cast<std::size_t>(j)];
        auto& pts = dense[static_cast<std::size_t>(j)];
        pts.reserve(kSamples);
        std::size_t seg = 0;
        double acc = 0.0;
        for (int m = 0; m < kSamples; ++m) {
            const double t = longest * m / (kSamples - 1);
            while (seg + 1 < lens.size() && t > acc + lens[seg]) acc += lens[seg++];
            const double lt = lens[seg] > 0 ? std::min((t - acc) / lens[seg], 1.0) : 0.0;
            pts.push_back(cor[seg] + (cor[seg + 1] - cor[seg]) * lt);
        }
    }

    const double tol = 1e-7 * std::max(1.0, std::abs(base));
    auto less = [&](int i, int j) {
        const auto& zi = dense[static_cast<std::size_t>(i)];
        const auto& zj = dense[static_cast<std::size_t>(j)];
        const std::size_t m = std::min(zi.size(), zj.size());
        std::size_t idx = m;
        for (std::size_t s = 0; s < m; ++s)
            if (std::abs(zi[s] - zj[s]) > tol) {
                idx = s;
                break;
            }
        if (idx == m) return i < j;
        Complex u = zi[idx] - zi[idx > 0 ? idx - 1 : 0];
        if (u == Complex(0.0)) u = zj[idx] - zj[idx > 0 ? idx - 1 : 0];
        u /= std::abs(u);
        const double s = ((zi[idx] - zj[idx]) / u).imag();
        if (std::abs(s) < 1e-15) return i < j;
        return s < 0; // right of travel comes first
    };

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) order[static_cast<std::size_t>(j)] = j;
    // Insertion sort: n <= 16 and the comparator is geometric, so keep the
    // sort free of strict-weak-ordering assumptions.
    for (int i = 1; i < n; ++i) {
        const int v = order[static_cast<std::size_t>(i)];
        int p = i - 1;
        while (p >= 0 && less(v, order[static_cast<std::size_t>(p)])) {
            order[static_cast<std::size_t>(p + 1)] = order[static_cast<std::size_t>(p)];
            --p;
        }
        order[static_cast<std::size_t>(p + 1)] = v;
    }
    return order;
}

} // namespace fuchs
