#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace fuchs {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Numerical tolerances threaded through the library. Operations take these
/// explicitly; the defaults below are used when a caller does not override.
struct Tolerances {
    double regularity_tol = 1e-12; // allowed Frobenius norm of sum of residues
    double ode_rel_tol = 1e-11;    // adaptive integrator, relative
    double ode_abs_tol = 1e-13;    // adaptive integrator, absolute
    double integer_tol = 1e-9;     // "is this an integer" in resonance checks
    double monodromy_tol = 1e-7;   // acceptance threshold for generator relation
};

/// A linear system dY/dx = sum_j Q_j / (x - t_j) * Y with all finite
/// singularities simple poles and (when the residues sum to zero) a regular
/// point at infinity normalized by Y(infinity) = I.
///
/// Invariants (checked by validate_system, not by the constructor):
///   - poles are pairwise distinct and finite,
///   - residues are square, all of one size, with finite entries,
///   - poles.size() == residues.size() >= 1.
struct FuchsianSystem {
    std::vector<Complex> poles;        // t_1 .. t_n
    std::vector<ComplexMatrix> residues; // Q_1 .. Q_n

    int size() const { return static_cast<int>(poles.size()); }
    int dimension() const { return residues.empty() ? 0 : static_cast<int>(residues.front().rows()); }
};

/// One violated invariant found by validate_system.
struct Violation {
    std::string invariant; // stable identifier, e.g. "poles_distinct"
    double measured;       // offending magnitude where meaningful, else NaN
    std::string detail;    // human-readable description with indices
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

/// Eigenvalue data of one residue matrix plus its resonance status.
/// A pole is resonant when two distinct eigenvalues of its residue differ by
/// a nonzero integer (within integer_tol); equal eigenvalues never count.
struct PoleSpectrum {
    std::vector<Complex> eigenvalues;
    bool non_resonant = true;
    std::vector<std::pair<Complex, Complex>> resonance_witnesses;
};

struct SpectralData {
    std::vector<PoleSpectrum> poles;
    bool all_non_resonant() const {
        for (const auto& p : poles)
            if (!p.non_resonant) return false;
        return true;
    }
};

namespace detail {

inline bool finite(Complex z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

inline bool finite(const ComplexMatrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (!finite(m(i, j))) return false;
    return true;
}

inline std::string fmt_complex(Complex z) {
    std::ostringstream os;
    os << z.real() << (z.imag() < 0 ? "" : "+") << z.imag() << "i";
    return os.str();
}

} // namespace detail

/// Smallest pairwise distance between poles. Zero or negative sizes give +inf.
inline double min_pole_separation(const std::vector<Complex>& poles) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poles.size(); ++i)
        for (std::size_t j = i + 1; j < poles.size(); ++j)
            best = std::min(best, std::abs(poles[i] - poles[j]));
    return best;
}

inline double min_pole_separation(const FuchsianSystem& sys) {
    return min_pole_separation(sys.poles);
}

/// Check every structural invariant of a system and report all failures.
/// Never throws; an exception-free report is what the CLI `validate`
/// subcommand serializes.
inline ValidationReport validate_system(const FuchsianSystem& sys,
                                        const Tolerances& tol = {}) {
    ValidationReport rep;
    auto add = [&rep](std::string inv, double measured, std::string detail) {
        rep.violations.push_back({std::move(inv), measured, std::move(detail)});
    };

    if (sys.poles.empty())
        add("pole_count", 0.0, "system has no poles");
    if (sys.poles.size() != sys.residues.size()) {
        add("shape", static_cast<double>(sys.residues.size()),
            "pole count " + std::to_string(sys.poles.size()) +
                " does not match residue count " + std::to_string(sys.residues.size()));
        return rep; // shapes disagree, further checks would misattribute indices
    }

    const int k = sys.dimension();
    if (!sys.residues.empty() && k < 1)
        add("dimension", static_cast<double>(k), "residue matrices are empty");
    for (std::size_t j = 0; j < sys.residues.size(); ++j) {
        const auto& q = sys.residues[j];
        if (q.rows() != q.cols() || q.rows() != k) {
            add("residue_shape", static_cast<double>(q.rows()),
                "residue " + std::to_string(j + 1) + " is " + std::to_string(q.rows()) +
                    "x" + std::to_string(q.cols()) + ", expected " + std::to_string(k) +
                    "x" + std::to_string(k));
            return rep;
        }
        if (!detail::finite(q))
            add("residue_finite", std::numeric_limits<double>::quiet_NaN(),
                "residue " + std::to_string(j + 1) + " has a non-finite entry");
    }

    for (std::size_t j = 0; j < sys.poles.size(); ++j)
        if (!detail::finite(sys.poles[j]))
            add("pole_finite", std::numeric_limits<double>::quiet_NaN(),
                "pole " + std::to_string(j + 1) + " is not finite");

    for (std::size_t i = 0; i < sys.poles.size(); ++i)
        for (std::size_t j = i + 1; j < sys.poles.size(); ++j) {
            const double d = std::abs(sys.poles[i] - sys.poles[j]);
            if (!(d > 0.0))
                add("poles_distinct", d,
                    "poles " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                        " coincide at " + detail::fmt_complex(sys.poles[i]));
        }

    if (!sys.residues.empty() && k >= 1) {
        ComplexMatrix sum = ComplexMatrix::Zero(k, k);
        for (const auto& q : sys.residues)
            if (q.rows() == k && q.cols() == k) sum += q;
        const double drift = sum.norm();
        if (!(drift <= tol.regularity_tol))
            add("residues_sum_zero", drift,
                "residues sum to a matrix of Frobenius norm " + std::to_string(drift) +
                    ", exceeding " + std::to_string(tol.regularity_tol) +
                    "; the point at infinity is not regular");
    }
    return rep;
}

/// Replace the last residue by minus the sum of the others so the residues
/// sum to zero exactly. Deliberately a separate, explicit call: validation
/// never mutates its input.
inline FuchsianSystem close_system(FuchsianSystem sys) {
    if (sys.residues.empty())
        raise(Errc::invalid_argument, "close_system: system has no residues");
    const int k = sys.dimension();
    ComplexMatrix sum = ComplexMatrix::Zero(k, k);
    for (std::size_t j = 0; j + 1 < sys.residues.size(); ++j) {
        if (sys.residues[j].rows() != k || sys.residues[j].cols() != k)
            raise(Errc::invalid_argument, "close_system: residue size mismatch");
        sum += sys.residues[j];
    }
    sys.residues.back() = -sum;
    return sys;
}

/// Eigenvalues of every residue plus per-pole resonance classification.
/// Throws numerical_failure naming the pole if the eigensolver does not
/// converge.
inline SpectralData spectral_data(const FuchsianSystem& sys,
                                  const Tolerances& tol = {}) {
    SpectralData out;
    out.poles.reserve(sys.residues.size());
    for (std::size_t j = 0; j < sys.residues.size(); ++j) {
        Eigen::ComplexEigenSolver<ComplexMatrix> es(sys.residues[j], /*computeEigenvectors=*/false);
        if (es.info() != Eigen::Success)
            raise(Errc::numerical_failure,
                  "eigenvalue computation failed for residue " + std::to_string(j + 1),
                  static_cast<int>(j + 1));
        PoleSpectrum ps;
        const auto& ev = es.eigenvalues();
        ps.eigenvalues.assign(ev.data(), ev.data() + ev.size());
        for (std::size_t a = 0; a < ps.eigenvalues.size(); ++a)
            for (std::size_t b = a + 1; b < ps.eigenvalues.size(); ++b) {
                const Complex d = ps.eigenvalues[a] - ps.eigenvalues[b];
                if (std::abs(d) <= tol.integer_tol)
                    continue; // equal eigenvalues are not a resonance
                const double nearest = std::round(d.real());
                if (nearest != 0.0 && std::abs(d.real() - nearest) <= tol.integer_tol &&
                    std::abs(d.imag()) <= tol.integer_tol) {
                    ps.non_resonant = false;
                    ps.resonance_witnesses.emplace_back(ps.eigenvalues[a], ps.eigenvalues[b]);
                }
            }
        out.poles.push_back(std::move(ps));
    }
    return out;
}

} // namespace fuchs
