#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "schlesinger.hpp"

namespace fuchs {

/// The four-pole rational deformation family used as ground truth: poles
/// (t, 1, 2, 3), a diagonal base solution, and an upper-triangular
/// perturbation proportional to a polynomial h(t). With h identically zero
/// the residues are constant (an exact Schlesinger solution); any other h
/// keeps the monodromy trivial while breaking the Schlesinger equations.
struct ExampleFamily {
    std::vector<Complex> h; // h(t) = sum h[m] * t^m; empty means h = 0
};

inline Complex eval_h(const ExampleFamily& family, Complex t) {
    Complex v(0.0);
    for (auto it = family.h.rbegin(); it != family.h.rend(); ++it) v = v * t + *it;
    return v;
}

namespace detail {

inline void check_example_parameter(Complex t) {
    for (double fixed : {1.0, 2.0, 3.0})
        if (std::abs(t - Complex(fixed)) < 1e-9)
            raise(Errc::pole_collision,
                  "example family: moving pole t = " + std::to_string(fixed) +
                      " collides with a fixed pole");
}

} // namespace detail

/// Pole configuration of the example family at parameter t.
inline std::vector<Complex> example_poles(Complex t) {
    detail::check_example_parameter(t);
    return {t, Complex(1.0), Complex(2.0), Complex(3.0)};
}

/// Residues of the example family at parameter t:
///   Q_1(t) = [[1, 0], [0, 0]]                       (at the moving pole t)
///   Q_2(t) = [[-1, t(1-t)h(t)/(t-3)], [0, 0]]       (at 1)
///   Q_3(t) = [[0, 2t(t-2)h(t)/(t-3)], [0, 1]]       (at 2)
///   Q_4(t) = [[0, -t h(t)], [0, -1]]                (at 3)
/// The sum vanishes identically in t and h.
inline std::vector<ComplexMatrix> example_residues(Complex t, const ExampleFamily& family) {
    detail::check_example_parameter(t);
    const Complex h = eval_h(family, t);
    ComplexMatrix q1(2, 2), q2(2, 2), q3(2, 2), q4(2, 2);
    q1 << Complex(1.0), Complex(0.0), Complex(0.0), Complex(0.0);
    q2 << Complex(-1.0), t * (Complex(1.0) - t) * h / (t - Complex(3.0)), Complex(0.0),
        Complex(0.0);
    q3 << Complex(0.0), Complex(2.0) * t * (t - Complex(2.0)) * h / (t - Complex(3.0)),
        Complex(0.0), Complex(1.0);
    q4 << Complex(0.0), -t * h, Complex(0.0), Complex(-1.0);
    return {q1, q2, q3, q4};
}

/// The example family's base point t = 0 as a plain system: poles (0,1,2,3)
/// with diagonal residues diag(1,0), diag(-1,0), diag(0,1), diag(0,-1).
/// Every pole is resonant (eigenvalue differences are nonzero integers).
inline FuchsianSystem example_system() {
    FuchsianSystem sys;
    sys.poles = example_poles(Complex(0.0));
    sys.residues = example_residues(Complex(0.0), ExampleFamily{});
    return sys;
}

/// Closed-form solution of the example family, normalized to the identity
/// at infinity:
///   Y(x,t) = [[(x-t)/(x-1), -2 t (x-t) h(t) / ((x-1)(x-3)(t-3))],
///             [0,           (x-2)/(x-3)]].
/// Rational in x, hence single-valued: the family's monodromy is trivial.
inline ComplexMatrix example_solution(Complex x, Complex t, const ExampleFamily& family) {
    detail::check_example_parameter(t);
    for (Complex p : example_poles(t))
        if (x == p)
            raise(Errc::evaluation_at_singularity,
                  "example_solution: x coincides with a pole");
    const Complex h = eval_h(family, t);
    ComplexMatrix y(2, 2);
    y(0, 0) = (x - t) / (x - Complex(1.0));
    y(0, 1) = Complex(-2.0) * t * (x - t) * h /
              ((x - Complex(1.0)) * (x - Complex(3.0)) * (t - Complex(3.0)));
    y(1, 0) = Complex(0.0);
    y(1, 1) = (x - Complex(2.0)) / (x - Complex(3.0));
    return y;
}

/// Adapter exposing the example family to schlesinger_residual: the first
/// pole is the parameter, the fixed poles must stay at (1, 2, 3).
inline ParameterizedFamily example_parameterized(const ExampleFamily& family,
                                                 double h_fd = 1e-3) {
    ParameterizedFamily out;
    out.h_fd = h_fd;
    out.residues_at = [family](const std::vector<Complex>& poles) {
        if (poles.size() != 4)
            raise(Errc::invalid_argument, "example family: expected 4 poles");
        for (std::size_t j = 1; j < 4; ++j)
            if (std::abs(poles[j] - Complex(static_cast<double>(j))) > 1e-9)
                raise(Errc::invalid_argument,
                      "example family: fixed pole " + std::to_string(j + 1) +
                          " moved; the family is parameterized by the first pole only");
        return example_residues(poles[0], family);
    };
    return out;
}

/// Two-pole scalar system dy/dx = (q/(x-t1) - q/(x-t2)) y, whose normalized
/// solution is ((x-t1)/(x-t2))^q.
inline FuchsianSystem scalar_system(Complex q, Complex t1, Complex t2) {
    if (t1 == t2) raise(Errc::pole_collision, "scalar_system: poles coincide");
    FuchsianSystem sys;
    sys.poles = {t1, t2};
    ComplexMatrix plus(1, 1), minus(1, 1);
    plus(0, 0) = q;
    minus(0, 0) = -q;
    sys.residues = {plus, minus};
    return sys;
}

/// Branch-explicit evaluation of ((x-t1)/(x-t2))^q: the caller supplies the
/// tracked argument of the ratio (for example theta1 - theta2 from a
/// WindingRecord); the value is e^{q (ln|r| + i theta)}. One extra positive
/// circuit of t1 multiplies the value by e^{2 pi i q}.
inline Complex scalar_two_pole(Complex q, Complex t1, Complex t2, Complex x,
                               double tracked_theta) {
    if (x == t1 || x == t2)
        raise(Errc::evaluation_at_singularity, "scalar_two_pole: x at a pole");
    const double ln_r = std::log(std::abs((x - t1) / (x - t2)));
    return std::exp(q * Complex(ln_r, tracked_theta));
}

/// Principal-branch convenience overload (tracked argument taken as the
/// principal argument of the ratio; this is the branch reached from the
/// normalization at infinity by any path with zero net ratio winding).
inline Complex scalar_two_pole(Complex q, Complex t1, Complex t2, Complex x) {
    if (x == t1 || x == t2)
        raise(Errc::evaluation_at_singularity, "scalar_two_pole: x at a pole");
    return scalar_two_pole(q, t1, t2, x, std::arg((x - t1) / (x - t2)));
}

} // namespace fuchs
