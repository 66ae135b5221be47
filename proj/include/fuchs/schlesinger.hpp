#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "continuation.hpp"
#include "core.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "linalg.hpp"
#include "monodromy.hpp"

namespace fuchs {

/// A point of the deformation space: pole configuration plus residues. The
/// fields coincide with FuchsianSystem (poles pairwise distinct, residues
/// square and finite, sum within regularity_tol of zero), so the alias keeps
/// every system-level operation directly applicable to flow states.
using SchlesingerState = FuchsianSystem;

struct ConfinementDisk {
    Complex center;
    double radius = 0.0;
};

/// Piecewise-linear motion of the pole configuration, s in [0, 1], together
/// with one confinement disk per pole. Invariants: every waypoint keeps pole
/// j inside disk j; disk closures are pairwise disjoint. Because disks are
/// convex and the motion is linear between waypoints, waypoint containment
/// implies containment along the whole path.
struct FlowPath {
    std::vector<std::vector<Complex>> waypoints;
    std::vector<ConfinementDisk> disks;
};

struct FlowSample {
    double s = 0.0;
    SchlesingerState state;
};

/// Record of one flow integration. The first sample is the supplied initial
/// state; drift fields summarize the conservation diagnostics over all
/// samples.
struct FlowTrace {
    std::vector<FlowSample> samples;
    long steps_taken = 0;
    long steps_rejected = 0;
    double error_estimate = 0.0;
    double first_integral_drift = 0.0;
    double isospectrality_drift = 0.0;
    FlowPath path;
};

/// Family of residue tuples parameterized by the pole configuration,
/// evaluable on finite-difference stencils. The callback returns the
/// residues (Q_1..Q_n) for a given pole vector and may throw to signal that
/// the stencil left its domain.
struct ParameterizedFamily {
    std::function<std::vector<ComplexMatrix>(const std::vector<Complex>&)> residues_at;
    double h_fd = 1e-3;
};

struct ResidualEntry {
    int equation = 0;  // 1-based residue index i
    int direction = 0; // 1-based moving pole index j
    double norm = 0.0; // Frobenius norm of DeltaQ_i/Delta t_j - RHS_ij
};

struct ResidualGrid {
    std::vector<ResidualEntry> entries;
    double max_norm = 0.0;
    int worst_equation = 0;
    int worst_direction = 0;
    double step = 0.0;
};

/// Finite-difference residual of the auxiliary system, reported at the
/// requested step and at half the step so callers can read off the
/// convergence order (second order: ratio near 4).
struct AuxiliaryResidual {
    double at_step = 0.0;
    double at_half_step = 0.0;
    double step = 0.0;
};

namespace detail {

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
    return a * b - b * a;
}

inline void validate_state_shape(const SchlesingerState& state, const char* who) {
    if (state.size() < 1 || state.dimension() < 1)
        raise(Errc::invalid_argument, std::string(who) + ": empty state");
    if (state.poles.size() != state.residues.size())
        raise(Errc::invalid_argument, std::string(who) + ": pole/residue count mismatch");
    const int k = state.dimension();
    for (const auto& q : state.residues)
        if (q.rows() != k || q.cols() != k)
            raise(Errc::invalid_argument, std::string(who) + ": residue size mismatch");
}

} // namespace detail

/// The Schlesinger right-hand sides: entry (i, j) is the vector field
/// dQ_i/dt_j, namely [Q_i, Q_j] / (t_i - t_j) off the diagonal and
/// -sum_{j != i} [Q_i, Q_j] / (t_i - t_j) on it, so each row sums to zero
/// (simultaneous translation of all poles changes nothing).
inline std::vector<std::vector<ComplexMatrix>>
schlesinger_partials(const SchlesingerState& state) {
    detail::validate_state_shape(state, "schlesinger_partials");
    const int n = state.size();
    const int k = state.dimension();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (state.poles[static_cast<std::size_t>(i)] ==
                state.poles[static_cast<std::size_t>(j)])
                raise(Errc::singular_configuration,
                      "poles " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                          " coincide; the Schlesinger field is undefined");

    std::vector<std::vector<ComplexMatrix>> grid(
        static_cast<std::size_t>(n),
        std::vector<ComplexMatrix>(static_cast<std::size_t>(n), ComplexMatrix::Zero(k, k)));
    for (int i = 0; i < n; ++i) {
        ComplexMatrix diag = ComplexMatrix::Zero(k, k);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const ComplexMatrix f =
                detail::commutator(state.residues[static_cast<std::size_t>(i)],
                                   state.residues[static_cast<std::size_t>(j)]) /
                (state.poles[static_cast<std::size_t>(i)] -
                 state.poles[static_cast<std::size_t>(j)]);
            grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = f;
            diag -= f;
        }
        grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = diag;
    }
    return grid;
}

/// Subtract the average of sum Q_j from every residue so the sum vanishes
/// exactly. Never called implicitly: conservation is measured, not enforced.
inline SchlesingerState project_residue_sum(SchlesingerState state) {
    detail::validate_state_shape(state, "project_residue_sum");
    const int k = state.dimension();
    ComplexMatrix sum = ComplexMatrix::Zero(k, k);
    for (const auto& q : state.residues) sum += q;
    sum /= static_cast<double>(state.size());
    for (auto& q : state.residues) q -= sum;
    return state;
}

/// Build a FlowPath for the given waypoints: each pole's disk is the
/// smallest centroid-centered disk containing its waypoints, inflated by
/// margin_factor of the worst-case gap (the disks stay pairwise disjoint for
/// margin_factor < 1).
inline FlowPath make_flow_path(std::vector<std::vector<Complex>> waypoints,
                               double margin_factor = 0.5) {
    if (waypoints.empty())
        raise(Errc::invalid_argument, "make_flow_path: need at least one waypoint");
    const std::size_t n = waypoints.front().size();
    if (n == 0) raise(Errc::invalid_argument, "make_flow_path: empty pole configuration");
    for (const auto& w : waypoints)
        if (w.size() != n)
            raise(Errc::invalid_argument, "make_flow_path: waypoint size mismatch");
    if (!(margin_factor > 0.0) || !(margin_factor < 1.0))
        raise(Errc::invalid_argument, "make_flow_path: margin_factor must be in (0, 1)");

    FlowPath path;
    path.waypoints = std::move(waypoints);
    path.disks.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        Complex c(0.0);
        for (const auto& w : path.waypoints) c += w[j];
        c /= static_cast<double>(path.waypoints.size());
        double r = 0.0;
        for (const auto& w : path.waypoints) r = std::max(r, std::abs(w[j] - c));
        path.disks[j] = {c, r};
    }
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            gap = std::min(gap, std::abs(path.disks[i].center - path.disks[j].center) -
                                    path.disks[i].radius - path.disks[j].radius);
    if (n == 1) gap = std::max(1.0, 2.0 * path.disks[0].radius);
    if (!(gap > 0.0))
        raise(Errc::invalid_argument,
              "make_flow_path: pole trajectories come too close to be confined in "
              "disjoint disks");
    for (auto& d : path.disks) d.radius += margin_factor * gap / 2.0;
    return path;
}

namespace detail {

inline void validate_flow_path(const SchlesingerState& state0, const FlowPath& path) {
    const std::size_t n = static_cast<std::size_t>(state0.size());
    if (path.waypoints.empty())
        raise(Errc::invalid_argument, "flow path has no waypoints");
    if (path.disks.size() != n)
        raise(Errc::invalid_argument, "flow path needs one confinement disk per pole");
    for (const auto& w : path.waypoints)
        if (w.size() != n)
            raise(Errc::invalid_argument, "flow waypoint dimension mismatch");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (!(std::abs(path.disks[i].center - path.disks[j].center) >
                  path.disks[i].radius + path.disks[j].radius))
                raise(Errc::invalid_argument,
                      "confinement disks of poles " + std::to_string(i + 1) + " and " +
                          std::to_string(j + 1) + " are not disjoint");
    for (std::size_t m = 0; m < path.waypoints.size(); ++m)
        for (std::size_t j = 0; j < n; ++j) {
            const double d = std::abs(path.waypoints[m][j] - path.disks[j].center);
            const double allow = path.disks[j].radius * (1.0 + 1e-12) + 1e-15;
            if (d > allow)
                raise(Errc::confinement_violation,
                      "waypoint " + std::to_string(m) + " places pole " +
                          std::to_string(j + 1) + " outside its confinement disk",
                      static_cast<int>(j + 1));
        }
    double scale = 1.0;
    for (Complex t : state0.poles) scale = std::max(scale, std::abs(t));
    for (std::size_t j = 0; j < n; ++j)
        if (std::abs(state0.poles[j] - path.waypoints.front()[j]) > 1e-9 * scale)
            raise(Errc::invalid_argument,
                  "initial state poles do not match the flow path start");
}

} // namespace detail

/// Integrate the Schlesinger system along a confined pole motion with the
/// same adaptive controller as analytic continuation (the residues are
/// stacked into one (n*k) x k matrix ODE). Samples are recorded at every
/// accepted step; drift diagnostics are filled in before returning.
inline FlowTrace schlesinger_flow(const SchlesingerState& state0, const FlowPath& path,
                                  const Tolerances& tol = {}) {
    detail::validate_state_shape(state0, "schlesinger_flow");
    const int n = state0.size();
    const int k = state0.dimension();
    if (!(min_pole_separation(state0) > 0.0))
        raise(Errc::pole_collision, "schlesinger_flow: initial poles coincide");
    {
        ComplexMatrix sum = ComplexMatrix::Zero(k, k);
        for (const auto& q : state0.residues) sum += q;
        if (sum.norm() > tol.regularity_tol)
            raise(Errc::irregular_infinity,
                  "schlesinger_flow: residues sum to norm " + std::to_string(sum.norm()) +
                      " (use project_residue_sum to rebalance explicitly)");
    }
    detail::validate_flow_path(state0, path);

    FlowTrace trace;
    trace.path = path;
    trace.samples.push_back({0.0, state0});

    ComplexMatrix y(static_cast<Eigen::Index>(n) * k, k);
    for (int i = 0; i < n; ++i)
        y.block(static_cast<Eigen::Index>(i) * k, 0, k, k) =
            state0.residues[static_cast<std::size_t>(i)];

    const std::size_t pieces = path.waypoints.size() - 1;
    for (std::size_t m = 0; m < pieces; ++m) {
        const auto& va = path.waypoints[m];
        const auto& vb = path.waypoints[m + 1];
        std::vector<Complex> vel(static_cast<std::size_t>(n));
        double max_vel = 0.0;
        for (int j = 0; j < n; ++j) {
            vel[static_cast<std::size_t>(j)] = vb[static_cast<std::size_t>(j)] -
                                               va[static_cast<std::size_t>(j)];
            max_vel = std::max(max_vel, std::abs(vel[static_cast<std::size_t>(j)]));
        }
        auto poles_at = [&](double sigma) {
            std::vector<Complex> t(static_cast<std::size_t>(n));
            for (int j = 0; j < n; ++j)
                t[static_cast<std::size_t>(j)] =
                    va[static_cast<std::size_t>(j)] + sigma * vel[static_cast<std::size_t>(j)];
            return t;
        };
        auto record = [&](double sigma, const ComplexMatrix& stacked) {
            FlowSample sample;
            sample.s = (static_cast<double>(m) + sigma) / static_cast<double>(pieces);
            sample.state.poles = poles_at(sigma);
            sample.state.residues.resize(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i)
                sample.state.residues[static_cast<std::size_t>(i)] =
                    stacked.block(static_cast<Eigen::Index>(i) * k, 0, k, k);
            trace.samples.push_back(std::move(sample));
        };
        if (max_vel == 0.0) {
            record(1.0, y);
            continue;
        }

        auto rhs = [&](double sigma, const ComplexMatrix& st) -> ComplexMatrix {
            const std::vector<Complex> t = poles_at(sigma);
            ComplexMatrix out(static_cast<Eigen::Index>(n) * k, k);
            for (int i = 0; i < n; ++i) {
                ComplexMatrix dq = ComplexMatrix::Zero(k, k);
                const auto qi = st.block(static_cast<Eigen::Index>(i) * k, 0, k, k);
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const Complex dt = t[static_cast<std::size_t>(i)] -
                                       t[static_cast<std::size_t>(j)];
                    if (dt == Complex(0.0))
                        raise(Errc::pole_collision,
                              "poles collided during flow integration");
                    const auto qj = st.block(static_cast<Eigen::Index>(j) * k, 0, k, k);
                    dq += (qi * qj - qj * qi) / dt *
                          (vel[static_cast<std::size_t>(j)] - vel[static_cast<std::size_t>(i)]);
                }
                out.block(static_cast<Eigen::Index>(i) * k, 0, k, k) = dq;
            }
            return out;
        };
        auto cap = [&](double sigma, const ComplexMatrix&) {
            return 0.5 * min_pole_separation(poles_at(sigma)) / max_vel;
        };
        auto on_accept = [&](double sigma, const ComplexMatrix& st, double) {
            const std::vector<Complex> t = poles_at(sigma);
            for (int j = 0; j < n; ++j) {
                const double d = std::abs(t[static_cast<std::size_t>(j)] -
                                          path.disks[static_cast<std::size_t>(j)].center);
                if (d > path.disks[static_cast<std::size_t>(j)].radius * (1.0 + 1e-9) + 1e-15)
                    raise(Errc::confinement_violation,
                          "pole " + std::to_string(j + 1) + " left its confinement disk",
                          j + 1);
            }
            record(sigma, st);
        };
        detail::dopri5(rhs, y, 1.0, tol, cap, on_accept, trace.steps_taken,
                       trace.steps_rejected, trace.error_estimate);
    }

    // Drift summaries over the recorded samples.
    {
        ComplexMatrix sum0 = ComplexMatrix::Zero(k, k);
        for (const auto& q : trace.samples.front().state.residues) sum0 += q;
        std::vector<std::vector<Complex>> spec0;
        for (const auto& q : trace.samples.front().state.residues)
            spec0.push_back(eigenvalues(q));
        for (const auto& sample : trace.samples) {
            ComplexMatrix sum = ComplexMatrix::Zero(k, k);
            for (const auto& q : sample.state.residues) sum += q;
            trace.first_integral_drift =
                std::max(trace.first_integral_drift, (sum - sum0).norm());
            for (int j = 0; j < n; ++j)
                trace.isospectrality_drift = std::max(
                    trace.isospectrality_drift,
                    spectra_matching_distance(
                        eigenvalues(sample.state.residues[static_cast<std::size_t>(j)]),
                        spec0[static_cast<std::size_t>(j)]));
        }
    }
    return trace;
}

/// Largest deviation of sum Q over the trace from its initial value.
inline double first_integral_drift(const FlowTrace& trace) {
    if (trace.samples.empty())
        raise(Errc::invalid_argument, "first_integral_drift: empty trace");
    const int k = trace.samples.front().state.dimension();
    ComplexMatrix sum0 = ComplexMatrix::Zero(k, k);
    for (const auto& q : trace.samples.front().state.residues) sum0 += q;
    double drift = 0.0;
    for (const auto& sample : trace.samples) {
        ComplexMatrix sum = ComplexMatrix::Zero(k, k);
        for (const auto& q : sample.state.residues) sum += q;
        drift = std::max(drift, (sum - sum0).norm());
    }
    return drift;
}

/// Largest matched-eigenvalue distance of any residue from its initial
/// spectrum over the trace.
inline double isospectrality_drift(const FlowTrace& trace) {
    if (trace.samples.empty())
        raise(Errc::invalid_argument, "isospectrality_drift: empty trace");
    std::vector<std::vector<Complex>> spec0;
    for (const auto& q : trace.samples.front().state.residues)
        spec0.push_back(eigenvalues(q));
    double drift = 0.0;
    for (const auto& sample : trace.samples)
        for (std::size_t j = 0; j < sample.state.residues.size(); ++j)
            drift = std::max(drift, spectra_matching_distance(
                                        eigenvalues(sample.state.residues[j]), spec0[j]));
    return drift;
}

namespace detail {

inline double disk_gap(const std::vector<ConfinementDisk>& disks) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < disks.size(); ++i)
        for (std::size_t j = i + 1; j < disks.size(); ++j)
            gap = std::min(gap, std::abs(disks[i].center - disks[j].center) -
                                    disks[i].radius - disks[j].radius);
    if (disks.size() < 2) gap = std::max(1.0, 2.0 * (disks.empty() ? 0.0 : disks[0].radius));
    return gap;
}

inline double disk_reach(const std::vector<ConfinementDisk>& disks) {
    double reach = 0.0;
    for (const auto& d : disks) reach = std::max(reach, std::abs(d.center) + d.radius);
    return reach;
}

} // namespace detail

/// Compare the monodromy of each word at the first and last state of the
/// trace. Every loop is realized once, with clearance measured against the
/// confinement disks, and the same geometric path is continued in both
/// systems; since the poles never leave the disjoint disks the two
/// continuations follow homotopic loops by construction.
inline double isomonodromy_check(const FlowTrace& trace, const std::vector<LoopWord>& words,
                                 const Tolerances& tol = {}) {
    if (trace.samples.empty())
        raise(Errc::invalid_argument, "isomonodromy_check: empty trace");
    if (words.empty()) return 0.0;
    const auto& disks = trace.path.disks;
    std::vector<Complex> centers;
    std::vector<double> radii;
    for (const auto& d : disks) {
        centers.push_back(d.center);
        radii.push_back(d.radius);
    }
    const Complex base(10.0 * std::max(1.0, detail::disk_reach(disks)), 0.0);
    const double clearance = 0.1 * detail::disk_gap(disks);

    std::vector<PolyPath> paths;
    paths.reserve(words.size());
    for (const auto& w : words)
        paths.push_back(realize_loop(w, centers, base, clearance, radii));

    std::vector<std::vector<ComplexMatrix>> mono(2);
    const FlowSample* endpoints[2] = {&trace.samples.front(), &trace.samples.back()};
    for (int e = 0; e < 2; ++e) {
        const FuchsianSystem& sys = endpoints[e]->state;
        const ComplexMatrix yb = solve_from_infinity(sys, base, {}, tol).value;
        Eigen::PartialPivLU<ComplexMatrix> lu(yb);
        for (const auto& p : paths) {
            const ComplexMatrix transported = continue_solution(sys, p, yb, tol).value;
            mono[static_cast<std::size_t>(e)].push_back(lu.solve(transported));
        }
    }
    double dev = 0.0;
    for (std::size_t i = 0; i < words.size(); ++i)
        dev = std::max(dev, (mono[1][i] - mono[0][i]).norm());
    return dev;
}

/// Default probe points for the auxiliary-system residual: points on a
/// circle of 2.5 times the disk cluster's spread around its centroid, far
/// enough out to clear every confinement disk but close enough that the
/// auxiliary right-hand side has workable magnitude.
inline std::vector<Complex> default_probes(const FlowPath& path, int count = 2) {
    if (path.disks.empty() || count < 1)
        raise(Errc::invalid_argument, "default_probes: need disks and a positive count");
    Complex centroid(0.0);
    for (const auto& d : path.disks) centroid += d.center;
    centroid /= static_cast<double>(path.disks.size());
    double spread = 0.0;
    for (const auto& d : path.disks)
        spread = std::max(spread, std::abs(d.center - centroid) + d.radius);
    const double rho = 2.5 * std::max(spread, 0.4);
    std::vector<Complex> probes;
    for (int m = 0; m < count; ++m)
        probes.push_back(centroid +
                         rho * std::polar(1.0, M_PI / 7.0 + 2.0 * M_PI * m / count));
    return probes;
}

/// Residual of the auxiliary system dY/dt_j = -Q_j/(x - t_j) * Y at the flow
/// state nearest the middle of the trace: for every pole j, two short
/// Schlesinger flows displace t_j by +-h (direction chosen inside the
/// confinement disk), the solution is continued from infinity to each probe
/// along one fixed approach path routed around the disks (so all branches
/// agree), and the central difference is compared with the right-hand side.
/// Reported at h and at h/2.
inline AuxiliaryResidual auxiliary_system_residual(const FlowTrace& trace,
                                                   const std::vector<Complex>& probes,
                                                   double h_fd = 1e-3,
                                                   const Tolerances& tol = {}) {
    if (trace.samples.empty())
        raise(Errc::invalid_argument, "auxiliary_system_residual: empty trace");
    if (probes.empty())
        raise(Errc::invalid_argument, "auxiliary_system_residual: no probe points");
    if (!(h_fd > 0.0))
        raise(Errc::invalid_argument, "auxiliary_system_residual: step must be positive");
    const auto& disks = trace.path.disks;
    for (std::size_t m = 0; m < probes.size(); ++m)
        for (std::size_t j = 0; j < disks.size(); ++j)
            if (!(std::abs(probes[m] - disks[j].center) > disks[j].radius))
                raise(Errc::invalid_argument,
                      "probe " + std::to_string(m + 1) + " lies inside confinement disk " +
                          std::to_string(j + 1),
                      static_cast<int>(j + 1));

    // State nearest the parameter midpoint: mini-flows in every direction
    // must stay inside the disks, and the midpoint has the most headroom on
    // typical paths.
    const double s_mid =
        (trace.samples.front().s + trace.samples.back().s) / 2.0;
    const FlowSample* mid = &trace.samples.front();
    for (const auto& sample : trace.samples)
        if (std::abs(sample.s - s_mid) < std::abs(mid->s - s_mid)) mid = &sample;
    const SchlesingerState& center = mid->state;
    const int n = center.size();

    std::vector<Complex> centers;
    std::vector<double> radii;
    for (const auto& d : disks) {
        centers.push_back(d.center);
        radii.push_back(d.radius);
    }
    const double reach = detail::disk_reach(disks);
    const double clearance = 0.1 * detail::disk_gap(disks);

    // One approach path per probe, reused for every displaced state.
    std::vector<PolyPath> approaches;
    std::vector<ComplexMatrix> y_center;
    for (Complex p : probes) {
        const double r = std::max(10.0 * std::max(1.0, reach), 2.0 * std::abs(p));
        const Complex start = r * (std::abs(p) > 0 ? p / std::abs(p) : Complex(1.0));
        PolyPath approach = detail::route_segment(start, p, centers, radii, clearance);
        if (!(path_clearance(approach, centers, radii) > 0.0))
            raise(Errc::realization_failure,
                  "probe approach path crosses a confinement disk");
        approaches.push_back(std::move(approach));
        y_center.push_back(solve_from_infinity(center, p, approaches.back(), tol).value);
    }

    auto displaced = [&](int j, double step) -> SchlesingerState {
        // Direction with room for the +- stencil inside disk j.
        const Complex c = disks[static_cast<std::size_t>(j)].center;
        const double r = disks[static_cast<std::size_t>(j)].radius;
        const Complex t0 = center.poles[static_cast<std::size_t>(j)];
        const double rho = std::abs(t0 - c);
        Complex dir(1.0);
        if (!(rho + std::abs(step) <= r)) {
            if (rho > 0.0 && rho * rho + step * step <= r * r)
                dir = Complex(0.0, 1.0) * (t0 - c) / rho;
            else
                raise(Errc::invalid_argument,
                      "finite-difference step exceeds the confinement headroom of pole " +
                          std::to_string(j + 1),
                      j + 1);
        }
        FlowPath leg;
        leg.disks = disks;
        leg.waypoints = {center.poles, center.poles};
        leg.waypoints.back()[static_cast<std::size_t>(j)] = t0 + step * dir;
        const FlowTrace t = schlesinger_flow(center, leg, tol);
        return t.samples.back().state;
    };
    auto direction_of = [&](int j, double step) -> Complex {
        const Complex c = disks[static_cast<std::size_t>(j)].center;
        const double r = disks[static_cast<std::size_t>(j)].radius;
        const Complex t0 = center.poles[static_cast<std::size_t>(j)];
        const double rho = std::abs(t0 - c);
        if (rho + std::abs(step) <= r) return Complex(1.0);
        return Complex(0.0, 1.0) * (t0 - c) / rho;
    };

    auto residual_at = [&](double h) -> double {
        double worst = 0.0;
        for (int j = 0; j < n; ++j) {
            const Complex dir = direction_of(j, h);
            const SchlesingerState plus = displaced(j, h);
            const SchlesingerState minus = displaced(j, -h);
            for (std::size_t m = 0; m < probes.size(); ++m) {
                const ComplexMatrix yp =
                    solve_from_infinity(plus, probes[m], approaches[m], tol).value;
                const ComplexMatrix ym =
                    solve_from_infinity(minus, probes[m], approaches[m], tol).value;
                const ComplexMatrix fd = (yp - ym) / (2.0 * h);
                const ComplexMatrix rhs =
                    dir * center.residues[static_cast<std::size_t>(j)] /
                    (probes[m] - center.poles[static_cast<std::size_t>(j)]) * y_center[m];
                worst = std::max(worst, (fd + rhs).norm());
            }
        }
        return worst;
    };

    AuxiliaryResidual out;
    out.step = h_fd;
    out.at_step = residual_at(h_fd);
    out.at_half_step = residual_at(h_fd / 2.0);
    return out;
}

/// Central-difference Schlesinger residual of a parameterized family at a
/// pole configuration: for every moving direction j and every equation i,
/// || (Q_i(t + h e_j) - Q_i(t - h e_j)) / 2h - dQ_i/dt_j(t, Q(t)) ||_F.
/// Raises irregular_infinity if the residues fail to sum to zero at any
/// stencil point, and invalid_argument if the callback rejects a stencil
/// point (stencil left the family's domain).
inline ResidualGrid schlesinger_residual(const ParameterizedFamily& family,
                                         const std::vector<Complex>& at,
                                         const std::vector<int>& moving, double h_fd = 0.0,
                                         const Tolerances& tol = {}) {
    if (!family.residues_at)
        raise(Errc::invalid_argument, "schlesinger_residual: family has no callback");
    const int n = static_cast<int>(at.size());
    if (n < 1) raise(Errc::invalid_argument, "schlesinger_residual: empty configuration");
    double h = h_fd > 0.0 ? h_fd : family.h_fd;
    if (!(h > 0.0))
        raise(Errc::invalid_argument, "schlesinger_residual: step must be positive");

    auto eval = [&](const std::vector<Complex>& t) -> std::vector<ComplexMatrix> {
        std::vector<ComplexMatrix> q;
        try {
            q = family.residues_at(t);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            raise(Errc::invalid_argument,
                  std::string("schlesinger_residual: stencil left the family domain: ") +
                      e.what());
        }
        if (static_cast<int>(q.size()) != n)
            raise(Errc::invalid_argument,
                  "schlesinger_residual: family returned wrong residue count");
        const int k = q.empty() ? 0 : static_cast<int>(q.front().rows());
        ComplexMatrix sum = ComplexMatrix::Zero(k, k);
        for (const auto& m : q) {
            if (m.rows() != k || m.cols() != k)
                raise(Errc::invalid_argument,
                      "schlesinger_residual: family returned inconsistent shapes");
            sum += m;
        }
        if (sum.norm() > std::max(tol.regularity_tol, 1e-12))
            raise(Errc::irregular_infinity,
                  "schlesinger_residual: residues sum to norm " +
                      std::to_string(sum.norm()) + " at a stencil point");
        return q;
    };

    const std::vector<ComplexMatrix> q0 = eval(at);
    SchlesingerState state;
    state.poles = at;
    state.residues = q0;
    const auto partials = schlesinger_partials(state);

    ResidualGrid grid;
    grid.step = h;
    for (int j : moving) {
        if (j < 1 || j > n)
            raise(Errc::invalid_argument,
                  "schlesinger_residual: moving index " + std::to_string(j) +
                      " outside 1.." + std::to_string(n));
        std::vector<Complex> tp = at, tm = at;
        tp[static_cast<std::size_t>(j - 1)] += h;
        tm[static_cast<std::size_t>(j - 1)] -= h;
        const std::vector<ComplexMatrix> qp = eval(tp);
        const std::vector<ComplexMatrix> qm = eval(tm);
        for (int i = 0; i < n; ++i) {
            const ComplexMatrix fd =
                (qp[static_cast<std::size_t>(i)] - qm[static_cast<std::size_t>(i)]) /
                (2.0 * h);
            const double norm =
                (fd - partials[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - 1)])
                    .norm();
            grid.entries.push_back({i + 1, j, norm});
            if (norm > grid.max_norm) {
                grid.max_norm = norm;
                grid.worst_equation = i + 1;
                grid.worst_direction = j;
            }
        }
    }
    return grid;
}

/// Mixed-partial symmetry of the Schlesinger field, evaluated algebraically:
/// for every index triple, differentiate RHS_ij along the t_k flow (chain
/// rule through every residue plus the explicit pole dependence) and
/// subtract the j <-> k swap. The Jacobi identity makes this vanish
/// identically, so anything nonzero is rounding.
inline double jacobi_compatibility_defect(const SchlesingerState& state) {
    const auto f = schlesinger_partials(state); // validates the state
    const int n = state.size();
    const int k = state.dimension();
    const auto& t = state.poles;
    const auto& q = state.residues;

    // D_k F_ij for i != j: explicit t_k dependence plus [F_ik, Q_j] and
    // [Q_i, F_jk] from the chain rule.
    auto d_off = [&](int i, int j, int kk) -> ComplexMatrix {
        const Complex tau = t[static_cast<std::size_t>(i)] - t[static_cast<std::size_t>(j)];
        ComplexMatrix r =
            (detail::commutator(f[static_cast<std::size_t>(i)][static_cast<std::size_t>(kk)],
                                q[static_cast<std::size_t>(j)]) +
             detail::commutator(q[static_cast<std::size_t>(i)],
                                f[static_cast<std::size_t>(j)][static_cast<std::size_t>(kk)])) /
            tau;
        if (kk == i || kk == j) {
            const ComplexMatrix c = detail::commutator(q[static_cast<std::size_t>(i)],
                                                       q[static_cast<std::size_t>(j)]);
            if (kk == i) r -= c / (tau * tau);
            if (kk == j) r += c / (tau * tau);
        }
        return r;
    };
    auto d_any = [&](int i, int j, int kk) -> ComplexMatrix {
        if (i != j) return d_off(i, j, kk);
        ComplexMatrix r = ComplexMatrix::Zero(k, k);
        for (int m = 0; m < n; ++m)
            if (m != i) r -= d_off(i, m, kk);
        return r;
    };

    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int kk = j + 1; kk < n; ++kk)
                worst = std::max(worst, (d_any(i, j, kk) - d_any(i, kk, j)).norm());
    return worst;
}

} // namespace fuchs
