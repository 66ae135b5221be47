#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "errors.hpp"

namespace fuchs {

/// Eigenvalues of a square complex matrix, in solver order.
inline std::vector<Complex> eigenvalues(const ComplexMatrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0)
        raise(Errc::invalid_argument, "eigenvalues: matrix must be square and nonempty");
    Eigen::ComplexEigenSolver<ComplexMatrix> es(m, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        raise(Errc::numerical_failure, "eigenvalue computation did not converge");
    const auto& ev = es.eigenvalues();
    return std::vector<Complex>(ev.data(), ev.data() + ev.size());
}

/// Bottleneck matching distance between two eigenvalue multisets: the
/// smallest over bijections sigma of max_i |a_i - b_sigma(i)|. Exact via
/// bitmask dynamic programming; sizes up to 16 are supported (matching the
/// library-wide dimension cap).
inline double spectra_matching_distance(const std::vector<Complex>& a,
                                        const std::vector<Complex>& b) {
    if (a.size() != b.size())
        raise(Errc::invalid_argument, "spectra_matching_distance: multisets differ in size");
    const int k = static_cast<int>(a.size());
    if (k == 0) return 0.0;
    if (k > 16)
        raise(Errc::invalid_argument, "spectra_matching_distance: more than 16 eigenvalues");

    std::vector<double> cost(static_cast<std::size_t>(k) * k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            cost[static_cast<std::size_t>(i) * k + j] = std::abs(a[i] - b[j]);

    // dp[mask] = best bottleneck assigning a_0..a_{p-1} to the b's in mask,
    // p = popcount(mask).
    const std::size_t full = (std::size_t{1} << k) - 1;
    std::vector<double> dp(full + 1, std::numeric_limits<double>::infinity());
    dp[0] = 0.0;
    for (std::size_t mask = 1; mask <= full; ++mask) {
        const int i = __builtin_popcountll(mask) - 1;
        for (int j = 0; j < k; ++j) {
            if (!(mask >> j & 1)) continue;
            const double cand = std::max(dp[mask ^ (std::size_t{1} << j)],
                                         cost[static_cast<std::size_t>(i) * k + j]);
            dp[mask] = std::min(dp[mask], cand);
        }
    }
    return dp[full];
}

namespace detail {

inline double one_norm(const ComplexMatrix& a) {
    if (a.size() == 0) return 0.0;
    return a.cwiseAbs().colwise().sum().maxCoeff();
}

/// Matrix exponential by Pade(13,13) with scaling and squaring. Degree 13 is
/// used unconditionally; the scaling bound keeps the approximant in its
/// accuracy region.
inline ComplexMatrix pade13_exp(const ComplexMatrix& a_in) {
    static const double b[14] = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0,  129060195264000.0,   10559470521600.0,
        670442572800.0,      33522128640.0,       1323241920.0,
        40840800.0,          960960.0,            16380.0,
        182.0,               1.0};
    const double theta13 = 5.371920351148152;

    const int k = static_cast<int>(a_in.rows());
    const double nrm = one_norm(a_in);
    int squarings = 0;
    if (nrm > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(nrm / theta13)));
        squarings = std::min(squarings, 1072); // hard stop well past double range
    }
    ComplexMatrix a = a_in / std::pow(2.0, squarings);

    const ComplexMatrix id = ComplexMatrix::Identity(k, k);
    const ComplexMatrix a2 = a * a;
    const ComplexMatrix a4 = a2 * a2;
    const ComplexMatrix a6 = a4 * a2;
    const ComplexMatrix u =
        a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
             b[3] * a2 + b[1] * id);
    const ComplexMatrix v =
        a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
        b[2] * a2 + b[0] * id;

    Eigen::PartialPivLU<ComplexMatrix> lu(v - u);
    ComplexMatrix r = lu.solve(v + u);
    for (int s = 0; s < squarings; ++s) r = r * r;
    return r;
}

/// Principal square root of an upper triangular matrix by the recurrence
/// s_ij = (t_ij - sum_k s_ik s_kj) / (s_ii + s_jj). A vanishing denominator
/// with a nonvanishing numerator marks a defective branch split; we record it
/// and let the caller's verification decide.
inline ComplexMatrix triangular_sqrt(const ComplexMatrix& t, bool* split_flag) {
    const int k = static_cast<int>(t.rows());
    ComplexMatrix s = ComplexMatrix::Zero(k, k);
    for (int i = 0; i < k; ++i) s(i, i) = std::sqrt(t(i, i));
    for (int d = 1; d < k; ++d) {
        for (int i = 0; i + d < k; ++i) {
            const int j = i + d;
            Complex acc = t(i, j);
            for (int m = i + 1; m < j; ++m) acc -= s(i, m) * s(m, j);
            const Complex den = s(i, i) + s(j, j);
            const double scale = std::abs(s(i, i)) + std::abs(s(j, j));
            if (std::abs(den) <= 1e-14 * scale) {
                if (split_flag) *split_flag = true;
                s(i, j) = (den == Complex(0.0)) ? Complex(0.0) : acc / den;
            } else {
                s(i, j) = acc / den;
            }
        }
    }
    return s;
}

/// log(I + E) by the alternating power series, valid for ||E|| <= 0.25.
inline ComplexMatrix log_series_near_identity(const ComplexMatrix& e) {
    const int k = static_cast<int>(e.rows());
    ComplexMatrix l = ComplexMatrix::Zero(k, k);
    ComplexMatrix p = e;
    for (int m = 1; m <= 96; ++m) {
        const double sign = (m % 2 == 1) ? 1.0 : -1.0;
        l += (sign / m) * p;
        if (p.norm() / (m + 1) < 1e-19) break;
        p = p * e;
    }
    return l;
}

} // namespace detail

/// Matrix exponential e^A.
inline ComplexMatrix matrix_exp(const ComplexMatrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0)
        raise(Errc::invalid_argument, "matrix_exp: matrix must be square and nonempty");
    if (!detail::finite(a))
        raise(Errc::invalid_argument, "matrix_exp: matrix has non-finite entries");
    return detail::pade13_exp(a);
}

/// Matrix logarithm with a branch cut along the ray of angle `cut_angle`.
/// The default pi is the principal branch: every eigenvalue of the result
/// has imaginary part in (cut_angle - 2*pi, cut_angle]. Computed by inverse
/// scaling and squaring on the Schur factor (repeated triangular square
/// roots, then the near-identity series).
///
/// Errors:
///   - invalid_argument for non-square, non-finite, or singular input;
///   - branch_cut when a near-coincident eigenvalue pair sits on opposite
///     sides of the cut with defective coupling, so no continuous logarithm
///     on this branch exists (callers retry with a rotated cut);
///   - numerical_failure if the Schur factorization fails or the computed
///     logarithm does not reproduce the input within 1e-10 * ||M||.
inline ComplexMatrix matrix_log(const ComplexMatrix& m, double cut_angle = M_PI) {
    if (m.rows() != m.cols() || m.rows() == 0)
        raise(Errc::invalid_argument, "matrix_log: matrix must be square and nonempty");
    if (!detail::finite(m))
        raise(Errc::invalid_argument, "matrix_log: matrix has non-finite entries");
    const int k = static_cast<int>(m.rows());

    // Rotate so the requested cut lands on the principal one, take the
    // principal log, rotate back by a scalar shift of the spectrum.
    const Complex rot = std::polar(1.0, M_PI - cut_angle);
    const ComplexMatrix mr = m * rot;

    Eigen::ComplexSchur<ComplexMatrix> schur(mr, /*computeU=*/true);
    if (schur.info() != Eigen::Success)
        raise(Errc::numerical_failure, "matrix_log: Schur factorization failed");
    ComplexMatrix t = schur.matrixT();
    const ComplexMatrix& u = schur.matrixU();

    double eig_scale = 0.0;
    for (int i = 0; i < k; ++i) eig_scale = std::max(eig_scale, std::abs(t(i, i)));
    for (int i = 0; i < k; ++i)
        if (!(std::abs(t(i, i)) > 1e-300) || !(std::abs(t(i, i)) > 1e-16 * eig_scale))
            raise(Errc::invalid_argument,
                  "matrix_log: matrix is singular (eigenvalue " + std::to_string(i + 1) +
                      " vanishes)");

    bool split_flag = false;
    int sqrts = 0;
    while ((t - ComplexMatrix::Identity(k, k)).norm() > 0.25 && sqrts < 60) {
        t = detail::triangular_sqrt(t, &split_flag);
        ++sqrts;
    }
    ComplexMatrix l = detail::log_series_near_identity(t - ComplexMatrix::Identity(k, k));
    l *= std::pow(2.0, sqrts);
    l = u * l * u.adjoint();
    l += Complex(0.0, cut_angle - M_PI) * ComplexMatrix::Identity(k, k);

    const double m_norm = m.norm();
    const double err = (detail::pade13_exp(l) - m).norm();
    if (!(err <= 1e-10 * std::max(m_norm, 1e-300))) {
        // Decide whether the failure is a branch split across the cut: a
        // near-coincident eigenvalue pair of the rotated matrix whose
        // principal logs disagree wildly in imaginary part.
        const ComplexMatrix& t0 = schur.matrixT();
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j) {
                const Complex li = std::log(t0(i, i));
                const Complex lj = std::log(t0(j, j));
                if (std::abs(t0(i, i) - t0(j, j)) <= 1e-3 * eig_scale &&
                    std::abs(li.imag() - lj.imag()) > 1.0)
                    raise(Errc::branch_cut,
                          "matrix_log: eigenvalues straddle the branch cut within a "
                          "defective cluster; retry with a rotated cut");
            }
        raise(Errc::numerical_failure,
              "matrix_log: verification failed, residual " + std::to_string(err));
    }
    return l;
}

} // namespace fuchs
