#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace fuchs;
using testsupport::Rng;

namespace {

template <typename Fn>
Errc code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    throw std::runtime_error("expected a library error");
}

} // namespace

TEST_CASE("eval_h is a plain polynomial evaluation") {
    ExampleFamily f;
    f.h = {Complex(1.0), Complex(2.0), Complex(3.0)};
    REQUIRE(std::abs(eval_h(f, Complex(2.0)) - Complex(17.0)) < 1e-15);
    REQUIRE(std::abs(eval_h({}, Complex(2.0))) == 0.0);
}

TEST_CASE("example residues always sum to zero") {
    Rng rng(301);
    ExampleFamily f;
    f.h = {Complex(0.7, 0.2), Complex(-0.3)};
    for (int trial = 0; trial < 10; ++trial) {
        const Complex t = testsupport::random_unit_disk(rng, 0.6);
        const auto qs = example_residues(t, f);
        ComplexMatrix sum = ComplexMatrix::Zero(2, 2);
        for (const auto& q : qs) sum += q;
        REQUIRE(sum.norm() < 1e-14);
    }
}

TEST_CASE("the base example system is diagonal and fully resonant") {
    const auto sys = example_system();
    REQUIRE(sys.poles == std::vector<Complex>{Complex(0.0), Complex(1.0), Complex(2.0),
                                              Complex(3.0)});
    for (const auto& q : sys.residues) {
        REQUIRE(std::abs(q(0, 1)) == 0.0);
        REQUIRE(std::abs(q(1, 0)) == 0.0);
    }
    REQUIRE(validate_system(sys).ok());
    const auto spec = spectral_data(sys);
    for (const auto& pole : spec.poles) REQUIRE_FALSE(pole.non_resonant);
}

TEST_CASE("parameters colliding with the fixed poles are rejected") {
    REQUIRE(code_of([&] { example_residues(Complex(1.0), {}); }) == Errc::pole_collision);
    REQUIRE(code_of([&] { example_poles(Complex(3.0)); }) == Errc::pole_collision);
    REQUIRE(code_of([&] { example_solution(Complex(5.0), Complex(2.0), {}); }) ==
            Errc::pole_collision);
}

TEST_CASE("the closed form solution satisfies the differential system") {
    ExampleFamily f;
    f.h = {Complex(1.0)};
    const Complex t(0.1);
    FuchsianSystem sys;
    sys.poles = example_poles(t);
    sys.residues = example_residues(t, f);

    const double h = 1e-6;
    for (Complex x : {Complex(-1.0), Complex(0.5, 0.8), Complex(4.0, -0.6)}) {
        const ComplexMatrix dy =
            (example_solution(x + h, t, f) - example_solution(x - h, t, f)) / (2.0 * h);
        const ComplexMatrix rhs = fuchsian_rhs(sys, x) * example_solution(x, t, f);
        CAPTURE(x.real(), x.imag());
        REQUIRE((dy - rhs).norm() < 1e-6);
    }
}

TEST_CASE("the closed form solution tends to the identity at infinity") {
    ExampleFamily f;
    f.h = {Complex(1.0)};
    const ComplexMatrix y = example_solution(Complex(1e7), Complex(0.1), f);
    REQUIRE((y - ComplexMatrix::Identity(2, 2)).norm() < 1e-5);
}

TEST_CASE("a pinned entry of the closed form solution") {
    ExampleFamily f;
    f.h = {Complex(1.0)};
    const ComplexMatrix y = example_solution(Complex(-1.0), Complex(0.1), f);
    // Entry (1,2) at x = -1, t = 0.1 is -11/1160.
    REQUIRE(std::abs(y(0, 1) - Complex(-11.0 / 1160.0)) < 1e-15);
    REQUIRE(std::abs(y(0, 0) - Complex(1.1 / 2.0)) < 1e-15);
    REQUIRE(std::abs(y(1, 1) - Complex(3.0 / 4.0)) < 1e-15);
    REQUIRE(std::abs(y(1, 0)) == 0.0);
}

TEST_CASE("continuation from infinity reproduces the closed form") {
    ExampleFamily f;
    f.h = {Complex(1.0)};
    const Complex t(0.1);
    FuchsianSystem sys;
    sys.poles = example_poles(t);
    sys.residues = example_residues(t, f);
    const auto res = solve_from_infinity(sys, Complex(-1.0));
    REQUIRE((res.value - example_solution(Complex(-1.0), t, f)).norm() < 1e-8);
}

TEST_CASE("evaluating the closed form on a pole is an error") {
    REQUIRE(code_of([&] { example_solution(Complex(1.0), Complex(0.1), {}); }) ==
            Errc::evaluation_at_singularity);
    REQUIRE(code_of([&] { example_solution(Complex(0.1), Complex(0.1), {}); }) ==
            Errc::evaluation_at_singularity);
}

TEST_CASE("the parameterized adapter reproduces the direct residues") {
    ExampleFamily f;
    f.h = {Complex(0.5), Complex(1.5)};
    const auto family = example_parameterized(f);
    const Complex t(0.25, 0.1);
    const auto via_adapter = family.residues_at(example_poles(t));
    const auto direct = example_residues(t, f);
    for (std::size_t j = 0; j < 4; ++j)
        REQUIRE((via_adapter[j] - direct[j]).norm() == 0.0);
}

TEST_CASE("the adapter insists on the fixed poles staying fixed") {
    const auto family = example_parameterized({});
    REQUIRE(code_of([&] {
                family.residues_at({Complex(0.0), Complex(1.1), Complex(2.0), Complex(3.0)});
            }) == Errc::invalid_argument);
    REQUIRE(code_of([&] { family.residues_at({Complex(0.0), Complex(1.0)}); }) ==
            Errc::invalid_argument);
}

TEST_CASE("scalar_system builds the one dimensional pair") {
    const auto sys = scalar_system(Complex(0.3, -0.1), Complex(0.0), Complex(2.0));
    REQUIRE(sys.dimension() == 1);
    REQUIRE(sys.residues[0](0, 0) == Complex(0.3, -0.1));
    REQUIRE(sys.residues[1](0, 0) == Complex(-0.3, 0.1));
    REQUIRE(validate_system(sys).ok());
}

TEST_CASE("the scalar closed form shifts branches by the local exponential") {
    const Complex q(0.3);
    const Complex t1(0.0), t2(1.0);
    const Complex x(2.0);
    const double theta = 0.4; // any tracked argument choice
    const Complex base = scalar_two_pole(q, t1, t2, x, theta);
    const Complex shifted = scalar_two_pole(q, t1, t2, x, theta + 2.0 * M_PI);
    REQUIRE(std::abs(shifted / base - std::exp(Complex(0.0, 1.0) * q * 2.0 * M_PI)) < 1e-12);

    // The principal overload agrees with the tracked one at the principal
    // argument of the pole-difference ratio.
    const Complex principal = scalar_two_pole(q, t1, t2, x);
    const Complex tracked = scalar_two_pole(q, t1, t2, x, std::arg((x - t1) / (x - t2)));
    REQUIRE(std::abs(principal - tracked) < 1e-14);
}
