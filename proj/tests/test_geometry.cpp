#include "hopflab/geometry.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace hopflab;

namespace {

DomainSpec unit_disk() { return DomainSpec(Ball{make_vec({0.0, 0.0}), 1.0}); }

}  // namespace

TEST_CASE("delta_D") {
    CHECK(delta_D(unit_disk(), make_vec({0.0, 0.0})) == 1.0);
    CHECK(delta_D(unit_disk(), make_vec({1.0, 0.0})) == 0.0);
    CHECK(delta_D(unit_disk(), make_vec({3.0, 0.0})) == 0.0);
    const DomainSpec box(Box{make_vec({0.0, 0.0}), make_vec({2.0, 1.0})});
    CHECK(delta_D(box, make_vec({1.0, 0.5})) == doctest::Approx(0.5));
}

TEST_CASE("delta_D is 1-Lipschitz") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-2.5, 2.5);
    for (const auto& dom : {unit_disk(), implicit_domain("l-shape"), implicit_domain("inward-cusp"),
                            DomainSpec(Annulus{make_vec({0.0, 0.0}), 0.5, 1.5})}) {
        for (int t = 0; t < 500; ++t) {
            const Vec x = make_vec({U(rng), U(rng)}), y = make_vec({U(rng), U(rng)});
            CHECK(std::abs(delta_D(dom, x) - delta_D(dom, y)) <= (x - y).norm() + 1e-12);
        }
    }
}

TEST_CASE("interior_ball_radius") {
    CHECK(interior_ball_radius(DomainSpec(Ball{make_vec({0.0, 0.0}), 0.4}), make_vec({0.0, 0.4})).radius ==
          doctest::Approx(0.4));
    CHECK(interior_ball_radius(DomainSpec(Ball{make_vec({0.0, 0.0}), 3.0}), make_vec({3.0, 0.0})).radius == 1.0);
    const DomainSpec box(Box{make_vec({0.0, 0.0}), make_vec({1.0, 1.0})});
    const auto corner = interior_ball_radius(box, make_vec({1.0, 1.0}));
    CHECK(corner.radius == 0.0);
    CHECK_FALSE(corner.found);
    const DomainSpec ann(Annulus{make_vec({0.0, 0.0}), 0.5, 1.0});
    CHECK(interior_ball_radius(ann, make_vec({0.0, 1.0})).radius == doctest::Approx(0.25));
    CHECK_THROWS_AS(interior_ball_radius(unit_disk(), make_vec({0.5, 0.0})), ContractViolation);

    // bisection certifier agrees with the closed form on the implicit disk
    const auto imp = interior_ball_radius(implicit_domain("disk"), make_vec({0.6, 0.8}));
    CHECK(imp.radius == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(imp.certification_points > 0);
}

TEST_CASE("generalized_normals") {
    const auto ball = generalized_normals(unit_disk(), make_vec({1.0, 0.0}));
    REQUIRE(ball.size() == 1);
    CHECK((ball[0] - make_vec({1.0, 0.0})).norm() < 1e-12);

    const DomainSpec box(Box{make_vec({0.0, 0.0}), make_vec({1.0, 1.0})});
    const auto face = generalized_normals(box, make_vec({0.5, 0.0}));
    REQUIRE(face.size() == 1);
    CHECK((face[0] - make_vec({0.0, -1.0})).norm() < 1e-12);
    CHECK(generalized_normals(box, make_vec({0.0, 0.0})).empty());

    const DomainSpec lshape = implicit_domain("l-shape");
    BallCertification coarse;
    coarse.directions = 32;
    const auto vertex = generalized_normals(lshape, make_vec({0.0, 0.0}), coarse);
    CHECK(vertex.size() >= 2);
    for (const auto& n : vertex) {
        CHECK(std::abs(n.norm() - 1.0) <= 1e-12);
        // the certified tangent ball lies in D on a dense sample
        const double r = 1e-3;
        const Vec y = -r * n;
        for (int k = 0; k < 720; ++k) {
            const double a = 2.0 * std::numbers::pi * k / 720;
            for (double s : {0.25, 0.5, 0.99}) {
                CHECK(lshape.in_closure(y + s * r * make_vec({std::cos(a), std::sin(a)}), 1e-12));
            }
        }
    }
}

TEST_CASE("reachable_set_contains") {
    const DomainSpec disk = unit_disk();
    CHECK(reachable_set_contains(disk, ZeroKernel{}, make_vec({1.0, 0.0})));
    CHECK_FALSE(reachable_set_contains(disk, ZeroKernel{}, make_vec({1.01, 0.0})));
    const LevyKernelSpec ball_jumps = FiniteActivityKernel::uniform_ball(1.0, 0.3);
    CHECK_FALSE(reachable_set_contains(disk, ball_jumps, make_vec({1.31, 0.0})));
    CHECK(reachable_set_contains(disk, ball_jumps, make_vec({1.29, 0.0})));
    const LevyKernelSpec two = FiniteActivityKernel::atomic_law(
        1.0, {Atom{make_vec({1.0, 0.0}), 0.5}, Atom{make_vec({-1.0, 0.0}), 0.5}});
    CHECK(reachable_set_contains(disk, two, make_vec({1.5, 0.0})));
    CHECK_FALSE(reachable_set_contains(disk, two, make_vec({0.0, 2.5})));
}

TEST_CASE("reachable set is monotone in the support radius") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int t = 0; t < 200; ++t) {
        const Vec z = make_vec({U(rng), U(rng)});
        const bool small = reachable_set_contains(unit_disk(), FiniteActivityKernel::uniform_ball(1.0, 0.2), z);
        const bool large = reachable_set_contains(unit_disk(), FiniteActivityKernel::uniform_ball(1.0, 0.6), z);
        CHECK((!small || large));
    }
}

TEST_CASE("shrink") {
    const auto half = shrink(unit_disk(), 0.5);
    CHECK(std::get<Ball>(half.shape()).radius == doctest::Approx(0.5));
    CHECK(shrink(unit_disk(), 1.0).empty());
    const auto box = shrink(DomainSpec(Box{make_vec({0.0, 0.0}), make_vec({1.0, 1.0})}), 0.25);
    CHECK(std::get<Box>(box.shape()).lo(0) == doctest::Approx(0.25));
    CHECK(std::get<Box>(box.shape()).hi(1) == doctest::Approx(0.75));
    CHECK(shrink(implicit_domain("l-shape"), 0.6).empty());
    CHECK_FALSE(shrink(implicit_domain("l-shape"), 0.3).empty());
}

TEST_CASE("shrink composes inside the larger shrink") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (const auto& dom : {implicit_domain("l-shape"), DomainSpec(Box{make_vec({-1.0, -1.0}), make_vec({1.0, 1.0})})}) {
        const auto twice = shrink(shrink(dom, 0.1), 0.2);
        const auto once = shrink(dom, 0.3);
        for (int t = 0; t < 300; ++t) {
            const Vec x = make_vec({U(rng), U(rng)});
            if (twice.contains(x)) CHECK(once.in_closure(x, 1e-12));
        }
    }
}

TEST_CASE("annuli") {
    const auto pair = annuli(make_vec({0.0, 0.0}), 1.0);
    const auto& inner = std::get<Annulus>(pair.inner.shape());
    const auto& outer = std::get<Annulus>(pair.outer.shape());
    CHECK(inner.r_in == 0.5);
    CHECK(inner.r_out == 1.0);
    CHECK(outer.r_in == 0.5);
    CHECK(outer.r_out == 1.5);
    CHECK_FALSE(pair.inner.contains(make_vec({0.0, 0.0})));
    CHECK_FALSE(pair.outer.contains(make_vec({0.0, 0.0})));
}

TEST_CASE("exterior_ball") {
    const auto eb = exterior_ball(unit_disk(), make_vec({1.0, 0.0}));
    REQUIRE(eb.has_value());
    CHECK(eb->radius == doctest::Approx(1.0));
    CHECK((eb->center - make_vec({2.0, 0.0})).norm() < 1e-6);
    const DomainSpec box(Box{make_vec({0.0, 0.0}), make_vec({1.0, 1.0})});
    CHECK(exterior_ball(box, make_vec({0.5, 1.0})).has_value());
    BallCertification fine;
    fine.min_radius = 1e-4;
    CHECK_FALSE(exterior_ball(implicit_domain("inward-cusp"), make_vec({0.0, 0.0}), fine).has_value());
}

TEST_CASE("lower_normal_derivative") {
    const Vec e1 = make_vec({1.0, 0.0});
    const auto lin = lower_normal_derivative([](const Vec& x) { return 2.0 * x(0) - x(1); }, e1, e1, 1e-3, 0.5);
    CHECK(lin.value == doctest::Approx(2.0));
    for (double q : lin.quotients) CHECK(q == doctest::Approx(2.0));
    CHECK(lin.h.front() == 0.5);

    // u = |x|² - 1: quotient (2h - h²)/h = 2 - h, smallest at h_max
    const auto quad = lower_normal_derivative([](const Vec& x) { return x.squaredNorm() - 1.0; }, e1, e1, 1e-3, 0.25);
    CHECK(quad.value == doctest::Approx(2.0 - 0.25));
    for (std::size_t i = 0; i < quad.h.size(); ++i) CHECK(quad.quotients[i] == doctest::Approx(2.0 - quad.h[i]));

    const auto flat = lower_normal_derivative([](const Vec&) { return 1.0; }, e1, e1, 1e-3, 0.5);
    CHECK(flat.value == 0.0);

    const DomainSpec disk = unit_disk();
    CHECK_THROWS_AS(lower_normal_derivative([](const Vec&) { return 0.0; }, e1, -e1, 1e-3, 0.5, &disk),
                    ContractViolation);
}

TEST_CASE("cusp control has exact interior distance") {
    const DomainSpec cusp = implicit_domain("tangent-disks-cusp");
    CHECK(cusp.contains(make_vec({-0.5, 0.0})));
    CHECK_FALSE(cusp.contains(make_vec({0.5, 0.0})));
    CHECK(delta_D(cusp, make_vec({-0.5, 0.0})) == doctest::Approx(0.5));
    CHECK(delta_D(cusp, make_vec({0.9, 0.4})) <= 0.1);
}
