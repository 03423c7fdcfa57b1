#include "helpers.hpp"

#include <doctest.h>

#include <random>

using namespace hopflab;
using namespace testing_helpers;

TEST_CASE("apply_local closed forms") {
    CHECK(apply_local(half_laplacian(3), quadratic(3), make_vec({0.3, -0.2, 0.1})) ==
          doctest::Approx(3.0));
    CHECK(apply_local(half_laplacian(2), constant_field(2, 4.0), make_vec({0.1, 0.2})) == 0.0);

    const OperatorSpec drift = with_drift(2, make_vec({2.0, 0.0}));
    const SmoothField x1{[](const Vec& x) { return x(0); }, [](const Vec&) { return make_vec({1.0, 0.0}); },
                         [](const Vec&) { return Mat(Mat::Zero(2, 2)); }};
    CHECK(apply_local(drift, x1, make_vec({0.5, 0.5})) == doctest::Approx(2.0));

    SmoothField no_hessian = quadratic(2);
    no_hessian.hessian = nullptr;
    CHECK_THROWS_AS(apply_local(half_laplacian(2), no_hessian, make_vec({0.0, 0.0})), ContractViolation);
}

TEST_CASE("apply_nonlocal by direct summation") {
    CHECK(apply_nonlocal(half_laplacian(2), quadratic(2), make_vec({0.4, 0.1})) == 0.0);

    // unit masses at ±e1: Σ (|x+y|² - |x|² - y·2x/(1+|y|²)) = 2|y|² = 2
    const OperatorSpec op = two_point(2, 0.0, 2.0);
    for (const auto& x : {make_vec({0.0, 0.0}), make_vec({0.7, -1.3}), make_vec({-2.0, 5.0})})
        CHECK(apply_nonlocal(op, quadratic(2), x) == doctest::Approx(2.0).epsilon(1e-14));

    OperatorSpec one_atom;
    one_atom.coeffs = CoefficientField::constant(Mat::Identity(2, 2), Vec::Zero(2));
    one_atom.kernel = FiniteActivityKernel::atomic_law(1.0, {Atom{unit_vec(2, 0), 1.0}});
    CHECK(apply_nonlocal(one_atom, constant_field(2, 3.0), make_vec({0.2, 0.2})) == 0.0);
}

TEST_CASE("apply sums local and nonlocal parts") {
    const OperatorSpec op = two_point(2, 1.0, 2.0);
    CHECK(apply(op, quadratic(2), make_vec({0.3, 0.4})) == doctest::Approx(4.0));
    const OperatorSpec pure = half_laplacian(2);
    const Vec x = make_vec({0.1, -0.6});
    CHECK(apply(pure, quadratic(2), x) == apply_local(pure, quadratic(2), x));
    CHECK(apply(op, constant_field(2, -1.5), x) == 0.0);
}

TEST_CASE("uniform-ball kernel quadrature matches the second moment") {
    // E|Y|² for Y uniform on B(0,ρ) in d dims is d ρ²/(d+2)
    for (int d = 1; d <= 3; ++d) {
        OperatorSpec op;
        op.coeffs = CoefficientField::constant(Mat::Identity(d, d), Vec::Zero(d));
        op.kernel = FiniteActivityKernel::uniform_ball(3.0, 0.8);
        const double expected = 3.0 * d * 0.64 / (d + 2.0);
        const auto res = apply_nonlocal_detailed(op, quadratic(d), Vec::Constant(d, 0.25));
        CHECK(res.value == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("truncated-stable kernel: moments and small-jump correction") {
    const int d = 2;
    TruncatedStableKernel k{1.0, 1.0, 0.5, 0.1};
    OperatorSpec op;
    op.coeffs = CoefficientField::constant(Mat::Identity(d, d), Vec::Zero(d));
    op.kernel = k;
    // ∫_{ε<|y|<=R} |y|² |y|^{-3} dy = 2π (R - ε)
    const double second = 2.0 * std::numbers::pi * (0.5 - 0.1);
    CHECK(apply_nonlocal(op, quadratic(d), make_vec({0.2, 0.0})) == doctest::Approx(second).epsilon(1e-6));
    // removed part 2π ε / d on each diagonal entry
    const Mat q = op.diffusion(make_vec({0.0, 0.0}));
    CHECK(q(0, 0) == doctest::Approx(1.0 + std::numbers::pi * 0.1));
    CHECK(q(0, 1) == 0.0);
    CHECK(kernel_n_star(op.kernel, d) == doctest::Approx(2.0 * std::numbers::pi * 0.5));
}

TEST_CASE("operator_bounds") {
    const BoxRegion unit{make_vec({0.0, 0.0}), make_vec({1.0, 1.0})};
    CHECK(operator_bounds(half_laplacian(2), unit, 9).lambda == doctest::Approx(1.0));
    CHECK(operator_bounds(half_laplacian(2), unit, 9).n_star == 0.0);

    OperatorSpec var;
    var.coeffs.dim = 2;
    var.coeffs.q = [](const Vec& x) {
        Mat q = Mat::Zero(2, 2);
        q(0, 0) = 1.0;
        q(1, 1) = 1.0 + std::abs(x(0));
        return q;
    };
    var.coeffs.b = [](const Vec&) { return Vec(Vec::Zero(2)); };
    CHECK(operator_bounds(var, unit, 11).lambda == doctest::Approx(1.0));

    OperatorSpec degenerate = half_laplacian(2);
    degenerate.coeffs = CoefficientField::constant(Mat::Zero(2, 2), Vec::Zero(2));
    CHECK_THROWS_AS(operator_bounds(degenerate, unit, 3), EllipticityError);
}

TEST_CASE("operator_bounds is monotone in K on nested lattices") {
    OperatorSpec op;
    op.coeffs.dim = 1;
    op.coeffs.q = [](const Vec& x) { return Mat(Mat::Constant(1, 1, 1.0 + x(0) * x(0))); };
    op.coeffs.b = [](const Vec&) { return Vec(Vec::Zero(1)); };
    const auto big = box_lattice({make_vec({-1.0}), make_vec({1.0})}, 41);
    std::vector<Vec> small;
    for (const auto& p : big)
        if (p(0) >= 0.25) small.push_back(p);
    CHECK(operator_bounds(op, small).lambda >= operator_bounds(op, big).lambda);
}

TEST_CASE("linearity and constant annihilation on random samples") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    OperatorSpec op;
    op.coeffs = CoefficientField::constant((Mat(2, 2) << 1.0, 0.3, 0.3, 0.7).finished(), make_vec({0.5, -0.25}));
    op.kernel = FiniteActivityKernel::uniform_ball(2.0, 0.5);
    const SmoothField u{[](const Vec& x) { return std::sin(x(0)) * std::cos(x(1)); },
                        [](const Vec& x) { return make_vec({std::cos(x(0)) * std::cos(x(1)), -std::sin(x(0)) * std::sin(x(1))}); },
                        [](const Vec& x) {
                            Mat h(2, 2);
                            h << -std::sin(x(0)) * std::cos(x(1)), -std::cos(x(0)) * std::sin(x(1)),
                                -std::cos(x(0)) * std::sin(x(1)), -std::sin(x(0)) * std::cos(x(1));
                            return h;
                        }};
    const SmoothField v = quadratic(2);
    for (int t = 0; t < 20; ++t) {
        const double a = U(rng), b = U(rng);
        const Vec x = make_vec({U(rng), U(rng)});
        const SmoothField w{[&](const Vec& y) { return a * u.value(y) + b * v.value(y); },
                            [&](const Vec& y) { return Vec(a * u.gradient(y) + b * v.gradient(y)); },
                            [&](const Vec& y) { return Mat(a * u.hessian(y) + b * v.hessian(y)); }};
        const double lhs = apply(op, w, x);
        const double rhs = a * apply(op, u, x) + b * apply(op, v, x);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
        CHECK(std::abs(apply(op, constant_field(2, U(rng)), x)) <= 1e-12);
    }
}

TEST_CASE("symmetric kernel on quadratics ignores the linear part") {
    const OperatorSpec op = two_point(1, 0.0, 1.0, 0.5);
    const SmoothField u{[](const Vec& x) { return 3.0 * x(0) * x(0) + 5.0 * x(0) - 2.0; },
                        [](const Vec& x) { return make_vec({6.0 * x(0) + 5.0}); },
                        [](const Vec&) { return Mat(Mat::Constant(1, 1, 6.0)); }};
    // ∫ 3 y² N(dy) = 3 * 0.25
    for (double x : {-1.0, 0.0, 2.5}) CHECK(apply_nonlocal(op, u, make_vec({x})) == doctest::Approx(0.75));
}

TEST_CASE("vmo_modulus") {
    const BoxRegion line{make_vec({0.0}), make_vec({1.0})};
    CHECK(vmo_modulus([](const Vec&) { return 2.0; }, 0.1, line).eta == 0.0);
    const auto lin = vmo_modulus([](const Vec& x) { return x(0); }, 0.1, line);
    CHECK(lin.eta <= 0.05 + lin.sampling_error + 1e-12);
    const BoxRegion around{make_vec({-0.1, -0.1}), make_vec({0.1, 0.1})};
    const auto step = vmo_modulus([](const Vec& x) { return x(0) > 0.0 ? 1.0 : 0.0; }, 0.01, around);
    CHECK(step.eta >= 0.4);
}
