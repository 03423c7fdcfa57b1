#include "hopflab/mc.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace hopflab;
using namespace testing_helpers;

namespace {

const DomainSpec kInterval(Box{make_vec({-1.0}), make_vec({1.0})});

PathConfig config(std::size_t n, double dt, std::uint64_t seed = 7) {
    PathConfig cfg;
    cfg.n_paths = n;
    cfg.dt = dt;
    cfg.seed = seed;
    return cfg;
}

// discrete monitoring pushes the effective boundary out by about 0.5826 √dt
double monitoring_shift(double dt) { return 0.5826 * std::sqrt(dt); }

}  // namespace

TEST_CASE("deterministic drift exits at time 1") {
    OperatorSpec op;
    op.coeffs = CoefficientField::constant(Mat::Zero(2, 2), unit_vec(2, 0));
    PathConfig cfg = config(1, 1e-3);
    cfg.T_max = 5.0;
    const auto p = simulate_path(op, DomainSpec(Ball{make_vec({0.0, 0.0}), 1.0}), make_vec({0.0, 0.0}), cfg, 0);
    CHECK_FALSE(p.hit_horizon);
    CHECK(p.tau >= 1.0 - 1e-12);
    CHECK(p.tau <= 1.0 + cfg.dt + 1e-12);
    CHECK((p.x_tau - unit_vec(2, 0)).norm() <= cfg.dt + 1e-12);
    CHECK(p.overshoot >= 0.0);
    CHECK(p.overshoot <= cfg.dt + 1e-12);
}

TEST_CASE("Brownian exit time from the interval") {
    const double dt = 1e-3;
    const auto est = estimate_feynman_kac(half_laplacian(1), KillingRate::zero(), kInterval, make_vec({0.0}),
                                          [](const Vec&) { return 1.0; }, nullptr, config(4000, dt));
    // E₀τ = 1 - x² on (-L, L) is L²
    const double L = 1.0 + monitoring_shift(dt);
    CHECK(std::abs(est.mean - 1.0) <= 3.0 * est.ci + (L * L - 1.0) + 0.5 * dt);
    CHECK_FALSE(est.bias_flag);
    CHECK(est.n_used == 4000);
}

TEST_CASE("jump-dominated exit") {
    const double rate = 2.0;
    OperatorSpec op;
    // b cancels the compensator λ y/(1+|y|²) so the only way out is the jump
    op.coeffs = CoefficientField::constant(1e-4 * Mat::Identity(2, 2), make_vec({rate * 2.0 / 5.0, 0.0}));
    op.kernel = FiniteActivityKernel::atomic_law(rate, {Atom{make_vec({2.0, 0.0}), 1.0}});
    PathConfig cfg = config(4000, 1e-3);
    cfg.record_paths = true;
    const auto est = estimate_feynman_kac(op, KillingRate::zero(), DomainSpec(Ball{make_vec({0.0, 0.0}), 1.0}),
                                          make_vec({0.0, 0.0}), [](const Vec&) { return 1.0; }, nullptr, cfg);
    CHECK(std::abs(est.mean - 1.0 / rate) <= 3.0 * est.ci + 1e-3);
    for (const auto& p : est.paths) CHECK(p.x_tau(0) > 1.5);
}

TEST_CASE("gauge estimates") {
    const Vec x0 = make_vec({0.0});
    const auto zero = estimate_gauge(half_laplacian(1), KillingRate::zero(), kInterval, x0, config(200, 1e-3));
    CHECK(zero.v.mean == 1.0);
    CHECK(zero.w == 0.0);

    const double dt = 1e-3;
    const auto one = estimate_gauge(half_laplacian(1), KillingRate::uniform(1.0), kInterval, x0, config(4000, dt));
    const double exact = 1.0 / std::cosh(std::sqrt(2.0));
    const double shifted = 1.0 / std::cosh(std::sqrt(2.0) * (1.0 + monitoring_shift(dt)));
    CHECK(std::abs(one.v.mean - exact) <= 3.0 * one.v.ci + (exact - shifted));
    CHECK(one.w == doctest::Approx(1.0 - one.v.mean));

    double prev = 1.0;
    for (double c0 : {0.5, 1.0, 2.0, 4.0}) {
        const auto g = estimate_gauge(half_laplacian(1), KillingRate::uniform(c0), kInterval, x0, config(500, dt));
        CHECK(g.v.mean < prev);
        CHECK(g.v.mean >= 0.0);
        CHECK(g.v.mean <= 1.0);
        CHECK(g.w >= 0.0);
        prev = g.v.mean;
    }
}

TEST_CASE("Feynman-Kac identities") {
    const Vec x0 = make_vec({0.3});
    auto one = [](const Vec&) { return 1.0; };
    const auto unit = estimate_feynman_kac(half_laplacian(1), KillingRate::zero(), kInterval, x0, nullptr, one,
                                           config(300, 1e-3));
    CHECK(unit.mean == 1.0);
    CHECK(unit.ci == 0.0);

    const auto fk = estimate_feynman_kac(half_laplacian(1), KillingRate::uniform(1.0), kInterval, x0, nullptr, one,
                                         config(300, 1e-3));
    const auto gauge = estimate_gauge(half_laplacian(1), KillingRate::uniform(1.0), kInterval, x0, config(300, 1e-3));
    CHECK(std::abs(fk.mean - gauge.v.mean) <= 1e-12);
}

TEST_CASE("survival curve") {
    const double dt = 1e-4;
    const std::vector<double> ts{0.0, 0.25, 0.5, 1.0, 1.5, 2.0};
    const auto s = estimate_survival(half_laplacian(1), kInterval, make_vec({0.0}), ts, config(20000, dt));
    CHECK(s[0].p == 1.0);
    for (std::size_t k = 1; k < s.size(); ++k) CHECK(s[k].p <= s[k - 1].p);
    // log-slope between t = 1 and t = 2 against λ_D = π²/8 on the monitored interval
    const double slope = std::log(s[5].p / s[3].p);
    const double L = 1.0 + monitoring_shift(dt);
    const double lambda = std::numbers::pi * std::numbers::pi / 8.0;
    const double ci = 3.0 * (s[5].ci / s[5].p + s[3].ci / s[3].p);
    CHECK(-slope >= lambda / (L * L) - ci);
    CHECK(-slope <= lambda + ci);
}

TEST_CASE("paths are reproducible and order independent") {
    const auto op = two_point(2, 1.0, 1.0, 0.5);
    const DomainSpec disk(Ball{make_vec({0.0, 0.0}), 1.0});
    PathConfig cfg = config(32, 1e-3, 99);
    cfg.record_paths = true;
    const auto est = estimate_gauge(op, KillingRate::uniform(0.5), disk, make_vec({0.1, 0.2}), cfg);
    const auto alone = simulate_path(op.with_killing(KillingRate::uniform(0.5)), disk, make_vec({0.1, 0.2}), cfg, 17);
    CHECK(alone.tau == est.v.paths[17].tau);
    CHECK(alone.x_tau == est.v.paths[17].x_tau);
    CHECK(alone.c_integral == est.v.paths[17].c_integral);
    const auto again = estimate_gauge(op, KillingRate::uniform(0.5), disk, make_vec({0.1, 0.2}), cfg);
    CHECK(again.v.mean == est.v.mean);
    cfg.seed = 100;
    CHECK(estimate_gauge(op, KillingRate::uniform(0.5), disk, make_vec({0.1, 0.2}), cfg).v.mean != est.v.mean);
}

TEST_CASE("antithetic pairing keeps the mean") {
    PathConfig plain = config(4000, 1e-3, 3);
    PathConfig anti = plain;
    anti.antithetic = true;
    auto one = [](const Vec&) { return 1.0; };
    const auto a = estimate_feynman_kac(half_laplacian(1), KillingRate::zero(), kInterval, make_vec({0.2}), one,
                                        nullptr, plain);
    const auto b = estimate_feynman_kac(half_laplacian(1), KillingRate::zero(), kInterval, make_vec({0.2}), one,
                                        nullptr, anti);
    CHECK(std::abs(a.mean - b.mean) <= a.ci + b.ci);
    anti.n_paths = 3;
    CHECK_THROWS_AS(anti.validate(), ConfigError);
}

TEST_CASE("halving dt moves the exit-time estimate by less than the CIs") {
    auto one = [](const Vec&) { return 1.0; };
    const auto a = estimate_feynman_kac(half_laplacian(1), KillingRate::zero(), kInterval, make_vec({0.0}), one,
                                        nullptr, config(4000, 1e-3, 5));
    const auto b = estimate_feynman_kac(half_laplacian(1), KillingRate::zero(), kInterval, make_vec({0.0}), one,
                                        nullptr, config(4000, 5e-4, 6));
    CHECK(std::abs(a.mean - b.mean) < a.ci + b.ci);
}

TEST_CASE("truncated-stable paths and horizon flags") {
    OperatorSpec op = half_laplacian(2);
    op.kernel = TruncatedStableKernel{1.0, 1.0, 0.5, 0.1};
    const DomainSpec disk(Ball{make_vec({0.0, 0.0}), 1.0});
    const auto g = estimate_gauge(op, KillingRate::uniform(1.0), disk, make_vec({0.0, 0.0}), config(200, 1e-3));
    CHECK(g.v.mean > 0.0);
    CHECK(g.v.mean < 1.0);

    PathConfig short_horizon = config(50, 1e-3);
    short_horizon.T_max = 0.01;
    const auto h = estimate_gauge(half_laplacian(1), KillingRate::uniform(1.0), kInterval, make_vec({0.0}), short_horizon);
    CHECK(h.v.bias_flag);
    CHECK(h.v.horizon_fraction == 1.0);
    CHECK(h.v.n_used == 0);
}

TEST_CASE("indefinite diffusion is rejected") {
    OperatorSpec op;
    op.coeffs = CoefficientField::constant((Mat(2, 2) << 1.0, 2.0, 2.0, 1.0).finished(), Vec::Zero(2));
    PathConfig cfg = config(1, 1e-3);
    cfg.T_max = 1.0;
    CHECK_THROWS_AS(simulate_path(op, DomainSpec(Ball{make_vec({0.0, 0.0}), 1.0}), make_vec({0.0, 0.0}), cfg, 0),
                    EllipticityError);
    CHECK_THROWS_AS(simulate_path(half_laplacian(1), kInterval, make_vec({2.0}), cfg, 0), ContractViolation);
}

TEST_CASE("pairwise summation") {
    std::vector<double> xs(1001);
    std::iota(xs.begin(), xs.end(), 0.0);
    CHECK(pairwise_sum(xs.data(), xs.size()) == 500500.0);
    CHECK(pairwise_sum(xs.data(), 0) == 0.0);
}
