#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "continuation.hpp"
#include "core.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "linalg.hpp"

namespace fuchs {

/// Monodromy generators at a common base point, one per pole, in pole index
/// order. Convention: continuation of the infinity-normalized solution along
/// a loop acts on the right, Y -> Y * M. The generators satisfy
/// M_1 * M_2 * ... * M_n = I within monodromy_tol; generator_words record
/// loop words realizing each generator at the base point.
struct MonodromyRep {
    std::vector<ComplexMatrix> generators;
    std::vector<LoopWord> generator_words;
    Complex base_point;
    double clearance = 0.0;
    double relation_defect = 0.0;
};

/// Local exponent data at one pole: A = log(M_j) / (2 pi i), how single-valued
/// the regular factor Y * (x - t_j)^(-A) is around the pole, and how well the
/// eigenvalues of M_j match those of e^(2 pi i Q_j).
struct LocalFactorReport {
    int pole_index = 0;
    ComplexMatrix exponent;
    double single_valued_defect = 0.0;
    double spectra_match_defect = 0.0;
    bool resonant_skipped = false;
};

namespace detail {

inline Complex canonical_base(const FuchsianSystem& sys) {
    return Complex(chart_switch_radius(sys), 0.0);
}

/// Solution frame at the base point, normalized to the identity at infinity.
inline ComplexMatrix base_frame(const FuchsianSystem& sys, Complex base,
                                const Tolerances& tol) {
    return solve_from_infinity(sys, base, {}, tol).value;
}

/// Matrix log that falls back to a branch cut through the middle of the
/// widest angular gap of the spectrum when the principal cut splits a
/// defective eigenvalue cluster.
inline ComplexMatrix log_any_branch(const ComplexMatrix& m) {
    try {
        return matrix_log(m);
    } catch (const Error& e) {
        if (e.code() != Errc::branch_cut) throw;
    }
    std::vector<double> angs;
    for (Complex ev : eigenvalues(m)) {
        double a = std::arg(ev);
        if (a < 0) a += 2.0 * M_PI;
        angs.push_back(a);
    }
    std::sort(angs.begin(), angs.end());
    double best_gap = 2.0 * M_PI - angs.back() + angs.front();
    double cut = std::fmod(angs.back() + best_gap / 2.0, 2.0 * M_PI);
    for (std::size_t i = 0; i + 1 < angs.size(); ++i)
        if (angs[i + 1] - angs[i] > best_gap) {
            best_gap = angs[i + 1] - angs[i];
            cut = (angs[i] + angs[i + 1]) / 2.0;
        }
    return matrix_log(m, cut);
}

struct LoopTransport {
    ComplexMatrix before_circuit; // frame at circuit entry, inbound
    ComplexMatrix after_circuit;  // frame at circuit entry after one turn
    PolyPath corridor;
};

// Extended-precision workspace for the generator reordering. The adjacent
// transpositions are exact matrix identities, but the conjugations they
// evaluate can be ill-conditioned enough (norms of conjugated generators
// reach 1e6 for residue norms near 1) that working-precision rounding alone
// would dominate the relation defect. Long double keeps the algebra's own
// rounding far below the continuation error of the elementary loops.
using LongComplex = std::complex<long double>;
using LongMatrix = Eigen::Matrix<LongComplex, Eigen::Dynamic, Eigen::Dynamic>;

/// Transport the base frame to the circuit entry of pole j (0-based) and once
/// around its 16-gon. The lasso monodromy is before^-1 * after.
inline LoopTransport single_loop_transport(const FuchsianSystem& sys, int j, int exponent,
                                           Complex base, double clearance,
                                           const ComplexMatrix& yb, const Tolerances& tol) {
    LoopTransport lt;
    lt.corridor = corridor_to(j, sys.poles, {}, base, clearance, clearance);
    lt.before_circuit = continue_solution(sys, lt.corridor, yb, tol).value;
    const Complex p = sys.poles[static_cast<std::size_t>(j)];
    const Complex u = (base - p) / std::abs(base - p);
    PolyPath circuit{lt.corridor.back()};
    for (int m = 1; m <= 16; ++m)
        append_vertex(circuit, p + clearance * u * std::polar(1.0, exponent * 2.0 * M_PI * m / 16.0));
    lt.after_circuit = continue_solution(sys, circuit, lt.before_circuit, tol).value;
    return lt;
}

} // namespace detail

/// Monodromy matrix of a loop word at the given base point (default: the
/// chart-switch point on the positive real axis; default clearance a tenth
/// of the minimal pole separation, selected by passing 0).
inline ComplexMatrix monodromy_matrix(const FuchsianSystem& sys, const LoopWord& word,
                                      Complex base = Complex(0.0), double clearance = 0.0,
                                      const Tolerances& tol = {}) {
    if (base == Complex(0.0)) base = detail::canonical_base(sys);
    if (clearance <= 0.0) clearance = default_clearance(sys.poles);
    const PolyPath path = realize_loop(word, sys.poles, base, clearance);
    const ComplexMatrix yb = detail::base_frame(sys, base, tol);
    ComplexMatrix transported = yb;
    if (path.size() > 1)
        transported = continue_solution(sys, path, yb, tol).value;
    return Eigen::PartialPivLU<ComplexMatrix>(yb).solve(transported);
}

/// Deviation from the homomorphism property on a pair of words: compares the
/// monodromy of the composite loop (which traverses w2 first, then w1) with
/// the product M(w1) * M(w2).
inline double homomorphism_defect(const FuchsianSystem& sys, const LoopWord& w1,
                                  const LoopWord& w2, Complex base = Complex(0.0),
                                  double clearance = 0.0, const Tolerances& tol = {}) {
    LoopWord cat = w2;
    cat.insert(cat.end(), w1.begin(), w1.end());
    const ComplexMatrix m_cat = monodromy_matrix(sys, cat, base, clearance, tol);
    const ComplexMatrix m1 = monodromy_matrix(sys, w1, base, clearance, tol);
    const ComplexMatrix m2 = monodromy_matrix(sys, w2, base, clearance, tol);
    return (m_cat - m1 * m2).norm();
}

/// Canonical generator set: one loop per pole, based at the chart-switch
/// point, with the product in pole index order equal to the identity.
///
/// Construction: elementary lassos are taken in ascending effective arm
/// angle, where their composite is contractible on the sphere; adjacent
/// transpositions M_a M_b -> M_b (M_b^-1 M_a M_b) then rewrite the relation
/// into index order while keeping every factor an honest loop (the words are
/// rewritten alongside the matrices). Raises numerical_failure if the final
/// relation defect exceeds monodromy_tol.
inline MonodromyRep monodromy_representation(const FuchsianSystem& sys,
                                             Complex base = Complex(0.0),
                                             double clearance = 0.0,
                                             const Tolerances& tol = {}) {
    const int n = sys.size();
    const int k = sys.dimension();
    if (n < 1 || k < 1)
        raise(Errc::invalid_argument, "monodromy_representation: empty system");
    if (base == Complex(0.0)) base = detail::canonical_base(sys);
    if (clearance <= 0.0) clearance = default_clearance(sys.poles);

    const ComplexMatrix yb = detail::base_frame(sys, base, tol);
    Eigen::PartialPivLU<ComplexMatrix> yb_lu(yb);
    std::vector<ComplexMatrix> elementary(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const auto lt = detail::single_loop_transport(sys, j, +1, base, clearance, yb, tol);
        elementary[static_cast<std::size_t>(j)] =
            Eigen::PartialPivLU<ComplexMatrix>(lt.before_circuit).solve(lt.after_circuit);
    }

    const std::vector<int> order = traversal_order(sys.poles, base, clearance);

    // Product sequence left to right: monodromy of the ascending-arm
    // traversal is the reversed product of elementary matrices. The
    // reordering runs in extended precision (see LongMatrix above); the
    // generators are rounded back to working precision on return, and the
    // relation defect reports the product of the extended-precision factors.
    struct Entry {
        int idx;
        detail::LongMatrix m;
        LoopWord w;
    };
    std::vector<Entry> seq;
    seq.reserve(static_cast<std::size_t>(n));
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        seq.push_back({*it,
                       elementary[static_cast<std::size_t>(*it)]
                           .cast<detail::LongComplex>(),
                       LoopWord{{*it + 1, +1}}});

    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            if (seq[i].idx <= seq[i + 1].idx) continue;
            Entry a = std::move(seq[i]);
            Entry b = std::move(seq[i + 1]);
            Entry moved;
            moved.idx = a.idx;
            moved.m = Eigen::PartialPivLU<detail::LongMatrix>(b.m).solve(a.m * b.m);
            moved.w = b.w;
            LoopWord tail = inverse_word(b.w);
            moved.w.insert(moved.w.end(), a.w.begin(), a.w.end());
            moved.w.insert(moved.w.end(), tail.begin(), tail.end());
            seq[i] = std::move(b);
            seq[i + 1] = std::move(moved);
            changed = true;
        }
    }

    MonodromyRep rep;
    rep.base_point = base;
    rep.clearance = clearance;
    detail::LongMatrix prod = detail::LongMatrix::Identity(k, k);
    for (const Entry& e : seq) {
        rep.generators.push_back(e.m.cast<Complex>());
        rep.generator_words.push_back(e.w);
        prod = prod * e.m;
    }
    rep.relation_defect = static_cast<double>(
        (prod - detail::LongMatrix::Identity(k, k)).norm());
    if (!(rep.relation_defect <= tol.monodromy_tol))
        raise(Errc::numerical_failure,
              "monodromy_representation: relation defect " +
                  std::to_string(rep.relation_defect) + " exceeds tolerance");
    return rep;
}

/// Bottleneck distance between the spectrum of the monodromy around pole j
/// (1-based) and the spectrum of e^(2 pi i Q_j).
inline double local_spectrum_check(const FuchsianSystem& sys, int pole_index,
                                   const Tolerances& tol = {}) {
    if (pole_index < 1 || pole_index > sys.size())
        raise(Errc::invalid_argument, "local_spectrum_check: pole index out of range");
    const ComplexMatrix mj =
        monodromy_matrix(sys, LoopWord{{pole_index, +1}}, Complex(0.0), 0.0, tol);
    const ComplexMatrix ej = matrix_exp(
        Complex(0.0, 2.0 * M_PI) * sys.residues[static_cast<std::size_t>(pole_index - 1)]);
    return spectra_matching_distance(eigenvalues(mj), eigenvalues(ej));
}

/// Around a non-resonant pole, factor the solution as Y = H * (x - t_j)^A
/// with A = log(M_j) / (2 pi i) and measure how single-valued H is after one
/// circuit (the argument of x - t_j is tracked, not taken principal).
/// Resonant poles are reported with resonant_skipped set and only the
/// spectra comparison populated.
inline LocalFactorReport regular_factor_check(const FuchsianSystem& sys, int pole_index,
                                              const Tolerances& tol = {}) {
    if (pole_index < 1 || pole_index > sys.size())
        raise(Errc::invalid_argument, "regular_factor_check: pole index out of range");
    LocalFactorReport rep;
    rep.pole_index = pole_index;
    rep.spectra_match_defect = local_spectrum_check(sys, pole_index, tol);

    const SpectralData sd = spectral_data(sys, tol);
    if (!sd.poles[static_cast<std::size_t>(pole_index - 1)].non_resonant) {
        rep.resonant_skipped = true;
        return rep;
    }

    const Complex base = detail::canonical_base(sys);
    const double clearance = default_clearance(sys.poles);
    const ComplexMatrix yb = detail::base_frame(sys, base, tol);
    const int j = pole_index - 1;
    const auto lt = detail::single_loop_transport(sys, j, +1, base, clearance, yb, tol);
    const ComplexMatrix mj =
        Eigen::PartialPivLU<ComplexMatrix>(lt.before_circuit).solve(lt.after_circuit);

    rep.exponent = detail::log_any_branch(mj) / Complex(0.0, 2.0 * M_PI);

    const Complex t = sys.poles[static_cast<std::size_t>(j)];
    const double theta_pre = std::arg(base - t) + track_argument(lt.corridor, t);
    const double radius = std::abs(lt.corridor.back() - t);
    auto power = [&](double theta) {
        return matrix_exp(-Complex(std::log(radius), theta) * rep.exponent);
    };
    const ComplexMatrix h_pre = lt.before_circuit * power(theta_pre);
    const ComplexMatrix h_post = lt.after_circuit * power(theta_pre + 2.0 * M_PI);
    rep.single_valued_defect = (h_post - h_pre).norm();
    return rep;
}

} // namespace fuchs
