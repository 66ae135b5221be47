#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "errors.hpp"
#include "geometry.hpp"

namespace fuchs {

/// Result of transporting a matrix solution along a path.
struct ContinuationResult {
    ComplexMatrix value;      // Y at the endpoint
    double error_estimate = 0.0; // sum of accepted local error estimates
    long steps_taken = 0;
    long steps_rejected = 0;
    WindingRecord winding;    // arg change of (x - t_j) along the path
};

/// Right-hand side sum_j Q_j / (x - t_j) of the system at a regular point x.
inline ComplexMatrix fuchsian_rhs(const FuchsianSystem& sys, Complex x) {
    const int k = sys.dimension();
    ComplexMatrix a = ComplexMatrix::Zero(k, k);
    for (int j = 0; j < sys.size(); ++j) {
        const Complex d = x - sys.poles[static_cast<std::size_t>(j)];
        if (d == Complex(0.0))
            raise(Errc::evaluation_at_singularity,
                  "right-hand side requested at pole " + std::to_string(j + 1), j + 1);
        a += sys.residues[static_cast<std::size_t>(j)] / d;
    }
    return a;
}

/// Right-hand side of the system in the chart w = 1/x around infinity:
/// dY/dw = -sum_j t_j Q_j / (1 - t_j w) * Y, valid because the residues sum
/// to zero (checked; otherwise infinity is not a regular point and the
/// chart has a singularity at w = 0).
inline ComplexMatrix infinity_chart_rhs(const FuchsianSystem& sys, Complex w,
                                        const Tolerances& tol = {}) {
    const int k = sys.dimension();
    ComplexMatrix sum = ComplexMatrix::Zero(k, k);
    for (const auto& q : sys.residues) sum += q;
    if (sum.norm() > tol.regularity_tol)
        raise(Errc::irregular_infinity,
              "residues sum to norm " + std::to_string(sum.norm()) +
                  "; infinity is not a regular point");
    ComplexMatrix b = ComplexMatrix::Zero(k, k);
    for (int j = 0; j < sys.size(); ++j) {
        const Complex t = sys.poles[static_cast<std::size_t>(j)];
        const Complex d = Complex(1.0) - t * w;
        if (d == Complex(0.0))
            raise(Errc::evaluation_at_singularity,
                  "chart point w is the image of pole " + std::to_string(j + 1), j + 1);
        b -= t * sys.residues[static_cast<std::size_t>(j)] / d;
    }
    return b;
}

namespace detail {

/// Adaptive Dormand-Prince 5(4) over a real parameter in [0, s_end].
/// `rhs(s, y)` returns dy/ds; `max_step(s, y)` caps the step size (return
/// +inf for no cap); `on_accept(s, y, err)` runs after each accepted step.
/// Deterministic: no randomness, no time-dependent state.
template <class Rhs, class MaxStep, class OnAccept>
void dopri5(Rhs&& rhs, ComplexMatrix& y, double s_end, const Tolerances& tol,
            MaxStep&& max_step, OnAccept&& on_accept, long& accepted, long& rejected,
            double& error_sum) {
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

    if (s_end <= 0.0) return;
    double s = 0.0;
    double h = std::min(s_end, std::min(0.1, max_step(0.0, y)));
    const double h_min = 1e-14 * std::max(1.0, s_end);

    while (s < s_end) {
        h = std::min(h, s_end - s);
        h = std::min(h, max_step(s, y));
        if (h < h_min)
            raise(Errc::step_underflow,
                  "adaptive step fell below " + std::to_string(h_min) + " at s = " +
                      std::to_string(s));

        const ComplexMatrix k1 = rhs(s, y);
        const ComplexMatrix k2 = rhs(s + c2 * h, y + h * (a21 * k1));
        const ComplexMatrix k3 = rhs(s + c3 * h, y + h * (a31 * k1 + a32 * k2));
        const ComplexMatrix k4 = rhs(s + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const ComplexMatrix k5 =
            rhs(s + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const ComplexMatrix k6 =
            rhs(s + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const ComplexMatrix y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const ComplexMatrix k7 = rhs(s + h, y_new);
        const double err =
            (h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7)).norm();

        const double scale =
            tol.ode_abs_tol + tol.ode_rel_tol * std::max(y.norm(), y_new.norm());
        if (err <= scale) {
            s += h;
            y = y_new;
            ++accepted;
            error_sum += err;
            on_accept(s, y, err);
            const double factor =
                err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(scale / err, 0.2), 0.2, 5.0);
            h *= factor;
        } else {
            ++rejected;
            h *= std::clamp(0.9 * std::pow(scale / err, 0.2), 0.1, 0.5);
        }
    }
}

inline double distance_to_nearest_pole(Complex x, const std::vector<Complex>& poles) {
    double d = std::numeric_limits<double>::infinity();
    for (Complex t : poles) d = std::min(d, std::abs(x - t));
    return d;
}

} // namespace detail

/// Transport Y0 along a piecewise-linear path by integrating the system.
/// Steps are capped at half the distance to the nearest pole, so the
/// integrator cannot step over or onto a singularity. Raises
/// determinant_collapse if |det Y| drops below 1e-12 (the transported frame
/// must stay a fundamental one) and step_underflow if the controller stalls.
inline ContinuationResult continue_solution(const FuchsianSystem& sys, const PolyPath& path,
                                            const ComplexMatrix& y0,
                                            const Tolerances& tol = {}) {
    detail::check_path(path);
    const int k = sys.dimension();
    if (y0.rows() != k || y0.cols() != k)
        raise(Errc::invalid_argument, "continue_solution: initial value has wrong shape");
    if (!(path_clearance(path, sys.poles) > 0.0))
        raise(Errc::path_through_singularity,
              "continuation path touches a pole of the system");

    ContinuationResult res;
    res.value = y0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const Complex a = path[i];
        const Complex b = path[i + 1];
        const Complex dir = b - a;
        const double len = std::abs(dir);
        auto rhs = [&](double s, const ComplexMatrix& y) -> ComplexMatrix {
            return dir * (fuchsian_rhs(sys, a + s * dir) * y);
        };
        auto cap = [&](double s, const ComplexMatrix&) {
            return 0.5 * detail::distance_to_nearest_pole(a + s * dir, sys.poles) / len;
        };
        auto check = [&](double, const ComplexMatrix& y, double) {
            const double dets = std::abs(y.determinant());
            if (dets < 1e-12)
                raise(Errc::determinant_collapse,
                      "fundamental matrix determinant fell to " + std::to_string(dets));
        };
        detail::dopri5(rhs, res.value, 1.0, tol, cap, check, res.steps_taken,
                       res.steps_rejected, res.error_estimate);
    }
    res.winding = track_windings(path, sys.poles);
    return res;
}

/// Radius at which integration switches from the chart at infinity to the
/// finite chart: ten times the larger of 1 and the largest pole magnitude.
inline double chart_switch_radius(const FuchsianSystem& sys) {
    double m = 0.0;
    for (Complex t : sys.poles) m = std::max(m, std::abs(t));
    return 10.0 * std::max(1.0, m);
}

/// Default approach path for solve_from_infinity: from the chart-switch
/// circle radially toward the target, detouring around poles.
inline PolyPath default_approach(const FuchsianSystem& sys, Complex target) {
    double r = chart_switch_radius(sys);
    if (std::abs(target) >= r) r = 2.0 * std::abs(target);
    const Complex u = std::abs(target) > 0.0 ? target / std::abs(target) : Complex(1.0);
    const Complex start = r * u;
    if (start == target) return PolyPath{target};
    return detail::route_segment(start, target, sys.poles, {}, default_clearance(sys.poles));
}

/// Value at `target` of the solution normalized to the identity at infinity,
/// computed by integrating the infinity chart from w = 0 to the chart-switch
/// point and then the finite chart along `approach` (default: radial).
///
/// Preconditions: the residues sum to zero within regularity_tol (otherwise
/// irregular_infinity); the approach starts with at least a factor-2 margin
/// outside the pole set and ends at the target.
inline ContinuationResult solve_from_infinity(const FuchsianSystem& sys, Complex target,
                                              PolyPath approach = {},
                                              const Tolerances& tol = {}) {
    const int k = sys.dimension();
    if (k < 1) raise(Errc::invalid_argument, "solve_from_infinity: empty system");
    infinity_chart_rhs(sys, Complex(0.0), tol); // validates regularity at infinity

    if (approach.empty()) approach = default_approach(sys, target);
    detail::check_path(approach);
    const Complex x_switch = approach.front();
    if (std::abs(approach.back() - target) > 1e-12 * std::max(1.0, std::abs(target)))
        raise(Errc::invalid_argument, "solve_from_infinity: approach does not end at target");
    double pole_mag = 0.0;
    for (Complex t : sys.poles) pole_mag = std::max(pole_mag, std::abs(t));
    if (!(std::abs(x_switch) >= std::max(2.0 * pole_mag, 1e-8)))
        raise(Errc::invalid_argument,
              "solve_from_infinity: chart-switch point at distance " +
                  std::to_string(std::abs(x_switch)) +
                  " leaves no margin over the poles (need twice the largest pole magnitude)");

    // Chart at infinity: straight w-path from 0 to 1/x_switch. Its
    // singularities sit at w = 1/t_j, outside the traversed disk thanks to
    // the margin condition.
    ContinuationResult res;
    res.value = ComplexMatrix::Identity(k, k);
    const Complex w_end = Complex(1.0) / x_switch;
    std::vector<Complex> w_poles;
    for (Complex t : sys.poles)
        if (std::abs(t) > 0.0) w_poles.push_back(Complex(1.0) / t);
    auto rhs = [&](double s, const ComplexMatrix& y) -> ComplexMatrix {
        return w_end * (infinity_chart_rhs(sys, s * w_end, tol) * y);
    };
    auto cap = [&](double s, const ComplexMatrix&) {
        if (w_poles.empty()) return std::numeric_limits<double>::infinity();
        return 0.5 * detail::distance_to_nearest_pole(s * w_end, w_poles) / std::abs(w_end);
    };
    auto check = [&](double, const ComplexMatrix& y, double) {
        const double dets = std::abs(y.determinant());
        if (dets < 1e-12)
            raise(Errc::determinant_collapse,
                  "fundamental matrix determinant fell to " + std::to_string(dets));
    };
    detail::dopri5(rhs, res.value, 1.0, tol, cap, check, res.steps_taken, res.steps_rejected,
                   res.error_estimate);

    if (approach.size() > 1) {
        ContinuationResult leg = continue_solution(sys, approach, res.value, tol);
        res.value = std::move(leg.value);
        res.error_estimate += leg.error_estimate;
        res.steps_taken += leg.steps_taken;
        res.steps_rejected += leg.steps_rejected;
        res.winding = std::move(leg.winding);
    } else {
        res.winding = track_windings(approach, sys.poles);
    }
    return res;
}

} // namespace fuchs
