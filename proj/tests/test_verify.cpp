#include "helpers.hpp"

#include "hopflab/verify.hpp"

#include <doctest.h>

#include <cmath>

using namespace hopflab;
using namespace testing_helpers;

namespace {

DomainSpec unit_interval() { return DomainSpec(Box{Vec::Constant(1, 0.0), Vec::Constant(1, 1.0)}); }
DomainSpec unit_disc() { return DomainSpec(Ball{Vec::Zero(2), 1.0}); }

std::shared_ptr<const DiscreteOperator> make_disc(const OperatorSpec& op, const DomainSpec& dom, double h) {
    return std::make_shared<const DiscreteOperator>(assemble(op, dom, h));
}

BarrierConstants constants_for(const OperatorSpec& op) {
    return choose_constants(ConstantInputs::from(op, 1.0), 1.0);
}

/// Points of the unit disc on rings, dense near the boundary.
std::vector<Vec> disc_samples() {
    std::vector<Vec> pts;
    for (double rho : {0.0, 0.25, 0.5, 0.9, 0.99, 0.999, 0.9995, 0.9999})
        for (int k = 0; k < 64; ++k) {
            const double t = 2.0 * M_PI * k / 64.0;
            pts.push_back(Vec{{rho * std::cos(t), rho * std::sin(t)}});
        }
    return pts;
}

std::vector<Vec> interval_samples(int n) {
    std::vector<Vec> pts;
    for (int i = 1; i < n; ++i) pts.push_back(Vec::Constant(1, static_cast<double>(i) / n));
    return pts;
}

}  // namespace

TEST_CASE("digest is stable and input sensitive") {
    Vector v(3);
    v << 1.0, 2.0, 3.0;
    const auto a = Digest().add(v).add(std::string("x")).hex();
    CHECK(a == Digest().add(v).add(std::string("x")).hex());
    CHECK(a.size() == 16);
    v(1) = 2.0000001;
    CHECK(a != Digest().add(v).add(std::string("x")).hex());
}

TEST_CASE("random data is reproducible and in range") {
    const auto disc = make_disc(half_laplacian(1), unit_interval(), 0.05);
    const auto a = make_random_data(disc->grid, 7);
    const auto b = make_random_data(disc->grid, 7);
    CHECK(a.f == b.f);
    CHECK(a.g == b.g);
    CHECK(a.f.minCoeff() >= 0.0);
    CHECK(a.f.maxCoeff() <= 1.0);
    CHECK(a.g.minCoeff() >= -1.0);
    CHECK(a.g.maxCoeff() <= 1.0);
    CHECK(make_random_data(disc->grid, 8).g != a.g);
}

TEST_CASE("grid interpolant reproduces affine functions") {
    const auto disc = make_disc(half_laplacian(2), unit_disc(), 0.1);
    auto lin = [](const Vec& x) { return 0.3 + 2.0 * x(0) - x(1); };
    const auto I = grid_interpolant(disc->grid, interior_values(disc->grid, lin), exterior_values(disc->grid, lin));
    for (const auto& x : {Vec{{0.0, 0.0}}, Vec{{0.31, -0.47}}, Vec{{0.999, 0.0}}, Vec{{-0.6, 0.77}}})
        CHECK(I(x) == doctest::Approx(lin(x)).epsilon(1e-12));
    CHECK_THROWS_AS(I(Vec{{3.0, 3.0}}), ContractViolation);
}

TEST_CASE("generated cases are certified and reproducible") {
    const auto disc = make_disc(with_drift(1, Vec::Constant(1, 0.7)).with_killing(KillingRate::uniform(1.0)),
                                unit_interval(), 0.02);
    const auto d = make_random_data(disc->grid, 3);
    const auto sub = gen_subsolution(disc, d.f, d.g, 3);
    CHECK(sub.certified);
    CHECK(sub.worst_residual >= -sub.cert_tol);
    CHECK((sub.residual - d.f).cwiseAbs().maxCoeff() < 1e-8);
    const auto super = gen_supersolution(disc, d.f, d.g, 3);
    CHECK(super.certified);
    CHECK(super.supersolution);
    CHECK(sub.digest() == gen_subsolution(disc, d.f, d.g, 3).digest());
    CHECK(sub.digest() != super.digest());
    CHECK_THROWS_AS(gen_subsolution(disc, Vector(-d.f), d.g, 3), ContractViolation);
}

TEST_CASE("hand-built cases are recertified, never trusted") {
    const auto disc = make_disc(half_laplacian(1), unit_interval(), 0.05);
    // 1 - (1-x)² is concave: not a subsolution of ½∂².
    auto bump = [](const Vec& x) { return 1.0 - (1.0 - x(0)) * (1.0 - x(0)); };
    auto c = make_case(disc, interior_values(disc->grid, bump), exterior_values(disc->grid, bump), false, "hand");
    CHECK_FALSE(c.certified);
    const auto rep = check_weak_max(c, unit_interval(), ZeroKernel{});
    CHECK(rep.verdict == Verdict::Fail);
    CHECK(rep.note.find("uncertified") != std::string::npos);
    // The margin is still computed.
    CHECK(std::isfinite(rep.margin));
}

TEST_CASE("weak maximum principle holds on random subsolutions") {
    const auto dom = unit_disc();
    for (const auto& op : {half_laplacian(2), two_point(2, 1.0, 2.0, 0.3)}) {
        const auto disc = make_disc(op.with_killing(KillingRate::uniform(0.5)), dom, 0.1);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto d = make_random_data(disc->grid, seed);
            const auto c = gen_subsolution(disc, d.f, d.g, seed);
            const auto rep = check_weak_max(c, dom, op.kernel);
            CHECK(rep.verdict == Verdict::Pass);
            CHECK(rep.margin >= -1e-9);
        }
    }
}

TEST_CASE("weak maximum margin is positively homogeneous") {
    const auto disc = make_disc(half_laplacian(1), unit_interval(), 0.05);
    const auto d = make_random_data(disc->grid, 11);
    const auto c = gen_subsolution(disc, d.f, d.g, 11);
    const auto c3 = make_case(disc, Vector(3.0 * c.u), Vector(3.0 * c.g), false, "scaled");
    CHECK(check_weak_max(c3, unit_interval(), ZeroKernel{}).margin ==
          doctest::Approx(3.0 * check_weak_max(c, unit_interval(), ZeroKernel{}).margin).epsilon(1e-10));
}

TEST_CASE("weak maximum principle fails for a non-monotone scheme") {
    const auto base = std::make_shared<const DiscreteOperator>(assemble(half_laplacian(1), unit_interval(), 0.05));
    const Vector f = Vector::Ones(static_cast<Eigen::Index>(base->size()));
    const Vector g = Vector::Zero(static_cast<Eigen::Index>(base->grid.n_exterior()));
    const auto u0 = gen_subsolution(base, f, g, 0).u;
    auto flipped = std::make_shared<DiscreteOperator>(*base);
    flipped->A_int = -base->A_int;
    flipped->B_ext = -base->B_ext;
    flipped->cert = certify(flipped->A_int, flipped->B_ext, flipped->c);
    CHECK_FALSE(flipped->cert.monotone());
    // -u0 is a subsolution of the negated operator and sits above g = 0.
    const auto c = make_case(flipped, Vector(-u0), g, false, "flipped");
    CHECK(c.certified);
    CHECK(check_weak_max(c, unit_interval(), ZeroKernel{}).verdict == Verdict::Fail);
}

TEST_CASE("strong maximum principle") {
    const auto dom = unit_disc();
    const auto disc = make_disc(half_laplacian(2), dom, 0.1);
    const Vector ones_u = Vector::Ones(static_cast<Eigen::Index>(disc->size()));
    const Vector ones_g = Vector::Ones(static_cast<Eigen::Index>(disc->grid.n_exterior()));
    CHECK(check_strong_max(make_case(disc, ones_u, ones_g, false, "constant")).verdict == Verdict::Pass);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto d = make_random_data(disc->grid, seed);
        const auto v = check_strong_max(gen_subsolution(disc, d.f, d.g, seed)).verdict;
        CHECK(v != Verdict::Fail);
    }
    // Interior bump: concave u is not a subsolution, so the check fails.
    auto bump = [](const Vec& x) { return 1.0 - x.squaredNorm(); };
    const auto c = make_case(disc, interior_values(disc->grid, bump), exterior_values(disc->grid, bump), false, "bump");
    CHECK(check_strong_max(c).verdict == Verdict::Fail);
}

TEST_CASE("Bony: Au is nonpositive near an interior maximum") {
    const auto dom = unit_interval();
    auto disc = assemble(half_laplacian(1), dom, 0.02);
    const Vector f = Vector::Ones(static_cast<Eigen::Index>(disc.size()));
    const Vector g = Vector::Zero(static_cast<Eigen::Index>(disc.grid.n_exterior()));
    // (c - A)u = f: u is a supersolution with an interior maximum at x = 1/2.
    const Vector u = ResolventSolver(disc, 0.0).solve(f, g);
    Eigen::Index top = 0;
    u.maxCoeff(&top);
    const std::vector<double> radii{0.02, 0.05, 0.1};
    const auto rep = check_bony(u, g, disc, static_cast<std::size_t>(top), radii, ZeroKernel{}, dom);
    CHECK(rep.verdict == Verdict::Pass);
    CHECK(rep.margin == doctest::Approx(1.0).epsilon(1e-8));

    // Negative control: a hand-edited non-monotone operator.
    auto bad = disc;
    bad.A_int = -disc.A_int;
    bad.B_ext = -disc.B_ext;
    CHECK(check_bony(u, g, bad, static_cast<std::size_t>(top), radii, ZeroKernel{}, dom).verdict == Verdict::Fail);

    // Not an interior maximum.
    CHECK(check_bony(u, g, disc, 0, radii, ZeroKernel{}, dom).verdict == Verdict::NotApplicable);
}

TEST_CASE("Hopf lemma on the unit disc with u = |x|²") {
    const auto op = half_laplacian(2);
    const auto consts = constants_for(op);
    const Vec x_hat{{1.0, 0.0}};
    FieldInputs in{[](const Vec& x) { return x.squaredNorm(); }, 1.0, disc_samples()};
    const auto rep = check_hopf(in, unit_disc(), x_hat, consts);
    CHECK(rep.verdict == Verdict::Pass);
    CHECK(rep.value("lhs") == doctest::Approx(2.0).epsilon(1e-2));
    const double r = rep.value("r");
    CHECK(r == doctest::Approx(consts.r0));
    CHECK(rep.value("a") == doctest::Approx(consts.C / r * std::exp(-consts.C)));
    CHECK(rep.value("rhs") > 0.0);
    CHECK(rep.value("rhs") < rep.value("lhs"));
}

TEST_CASE("Hopf lemma negative control: vanishing normal derivative") {
    const auto op = half_laplacian(1);
    const auto consts = constants_for(op);
    FieldInputs in{[](const Vec& x) { return 1.0 - (1.0 - x(0)) * (1.0 - x(0)); }, 1.0, interval_samples(2000)};
    const auto rep = check_hopf(in, unit_interval(), Vec::Constant(1, 1.0), consts);
    CHECK(rep.verdict == Verdict::Fail);
    CHECK(rep.margin < 0.0);
}

TEST_CASE("Hopf lemma: constant u is not applicable") {
    const auto consts = constants_for(half_laplacian(1));
    FieldInputs in{[](const Vec&) { return 1.0; }, 1.0, interval_samples(100)};
    CHECK(check_hopf(in, unit_interval(), Vec::Constant(1, 1.0), consts).verdict == Verdict::NotApplicable);
}

TEST_CASE("Hopf lemma on random grid subsolutions with drift") {
    const auto dom = unit_interval();
    for (double b : {-0.8, 0.0, 0.6}) {
        const auto op = with_drift(1, Vec::Constant(1, b));
        const auto consts = constants_for(op);
        const auto disc = make_disc(op, dom, 0.01);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto d = make_random_data(disc->grid, seed, 1.0, 0.0, 1.0);
            const auto rep = check_hopf(gen_subsolution(disc, d.f, d.g, seed), dom, consts);
            CHECK(rep.verdict == Verdict::Pass);
        }
    }
}

TEST_CASE("quantitative Hopf I.A with uniform killing") {
    const auto dom = unit_interval();
    const auto op = half_laplacian(1).with_killing(KillingRate::uniform(1.0));
    const auto consts = constants_for(op);
    const auto disc = make_disc(op, dom, 0.01);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto d = make_random_data(disc->grid, seed, 1.0, 0.0, 1.0);
        const auto rep = check_qhl_IA(gen_subsolution(disc, d.f, d.g, seed), dom, op, consts, 1.0);
        CHECK(rep.verdict == Verdict::Pass);
        CHECK(rep.value("a_star") > 0.0);
        CHECK(rep.value("a_star") <= 1.0);
    }
    // u(x̂) <= 0 makes the bound vacuous.
    const Vector f = Vector::Zero(static_cast<Eigen::Index>(disc->size()));
    const Vector g = Vector::Zero(static_cast<Eigen::Index>(disc->grid.n_exterior()));
    CHECK(check_qhl_IA(gen_subsolution(disc, f, g, 0), dom, op, consts, 1.0).verdict == Verdict::Vacuous);
    CHECK_THROWS_AS(check_qhl_IA(gen_subsolution(disc, f, g, 0), dom, op, consts, 0.0), ContractViolation);
}

TEST_CASE("quantitative Hopf I.B with killing on a ball") {
    const auto dom = unit_interval();
    const auto c = KillingRate::ball_indicator(Vec::Constant(1, 0.5), 0.25, 1.0);
    const auto op = half_laplacian(1).with_killing(c);
    const auto consts = constants_for(op);
    const auto disc = make_disc(op, dom, 0.01);
    const auto gauge = gauge_grid(*disc).w;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto d = make_random_data(disc->grid, seed, 1.0, 0.0, 1.0);
        const auto rep = check_qhl_IB(gen_subsolution(disc, d.f, d.g, seed), dom, gauge, consts);
        CHECK(rep.verdict == Verdict::Pass);
        CHECK(rep.value("rho") > 0.0);
    }
    // Zero killing: ρ ≡ 0 and the statement is vacuous.
    const auto disc0 = make_disc(half_laplacian(1), dom, 0.01);
    const auto d = make_random_data(disc0->grid, 1, 1.0, 0.0, 1.0);
    CHECK(check_qhl_IB(gen_subsolution(disc0, d.f, d.g, 1), dom, gauge_grid(*disc0).w, consts).verdict ==
          Verdict::Vacuous);
}

TEST_CASE("quantitative Hopf II.A and II.B on random subsolutions") {
    const auto dom = unit_interval();
    const auto op = half_laplacian(1).with_killing(KillingRate::uniform(1.0));
    const auto disc = make_disc(op, dom, 0.02);
    const auto plain = disc->with_killing(Vector::Zero(static_cast<Eigen::Index>(disc->size())));
    const auto eigen = principal_eigenpair(plain);
    CHECK(eigen.lambda == doctest::Approx(M_PI * M_PI / 2.0).epsilon(1e-2));
    const auto minor = minorization(*disc, 1.0, disc->grid.nearest_interior(Vec::Constant(1, 0.5)));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto d = make_random_data(disc->grid, seed, 1.0, 0.0, 1.0);
        const auto c = gen_subsolution(disc, d.f, d.g, seed);
        const auto a = check_qhl_IIA(c, eigen, minor);
        const auto b = check_qhl_IIB(c, eigen);
        CHECK(a.verdict == Verdict::Pass);
        CHECK(b.verdict == Verdict::Pass);
    }
    // u ≡ M with positive killing is not a subsolution.
    const Vector ones_u = Vector::Ones(static_cast<Eigen::Index>(disc->size()));
    const Vector ones_g = Vector::Ones(static_cast<Eigen::Index>(disc->grid.n_exterior()));
    const auto flat = make_case(disc, ones_u, ones_g, false, "constant");
    CHECK(check_qhl_IIA(flat, eigen, minor).verdict == Verdict::Fail);
    CHECK(check_qhl_IIB(flat, eigen).verdict == Verdict::Fail);
    CHECK_THROWS_AS(check_qhl_IIA(gen_subsolution(disc, ones_u, ones_g, 0), eigen,
                                  minorization(*disc, 0.5, minor.x0)),
                    ContractViolation);
}

TEST_CASE("delta bound for the Laplacian and its failure without diffusion") {
    const auto dom = unit_interval();
    const auto disc = assemble(half_laplacian(1), dom, 0.01);
    const Vector ones = Vector::Ones(static_cast<Eigen::Index>(disc.size()));
    const auto rep = check_delta_bound(disc, dom, ones, 0.0);
    CHECK(rep.verdict == Verdict::Pass);
    // R_0 1 = x(1 - x) and δ = min(x, 1 - x): the ratio bottoms out at 1/2.
    CHECK(rep.value("a_fit") == doctest::Approx(0.5).epsilon(2e-2));
    CHECK(check_delta_bound(disc, dom, Vector::Zero(ones.size()), 0.0).verdict == Verdict::NotApplicable);

    OperatorSpec drift;
    drift.coeffs = CoefficientField::constant(Mat::Zero(1, 1), Vec::Constant(1, 1.0));
    const auto dd = assemble(drift, dom, 0.01);
    const Vector left = interior_values(dd.grid, [](const Vec& x) { return x(0) < 0.5 ? 1.0 : 0.0; });
    const auto neg = check_delta_bound(dd, dom, left, 1.0);
    CHECK(neg.verdict == Verdict::Fail);
    CHECK(neg.value("a_fit") == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("delta bound refinement: stable on the disc, degrading at a cusp") {
    auto one = [](const Vec&) { return 1.0; };
    const std::vector<double> hs{1.0 / 20, 1.0 / 40, 1.0 / 80};
    // On the disc R_0 1 = (1 - |x|²)/2, so R_0 1 / δ tends to 1/2 at the boundary.
    const auto disc = delta_bound_refinement(half_laplacian(2), unit_disc(), one, 0.0, hs);
    CHECK_FALSE(disc.degrading);
    for (double a : disc.a_fit) CHECK(a == doctest::Approx(0.5).epsilon(0.05));

    const auto cusp = delta_bound_refinement(half_laplacian(2), implicit_domain("tangent-disks-cusp"), one, 0.0, hs);
    CHECK(cusp.degrading);
    CHECK(cusp.nodes[2] > cusp.nodes[1]);
    CHECK(cusp.a_fit.back() < 0.5 * cusp.a_fit.front());
}

TEST_CASE("weak Harnack on nonnegative supersolutions") {
    const auto dom = unit_interval();
    const auto disc = make_disc(half_laplacian(1), dom, 0.02);
    const auto minor = minorization(*disc, 1.0, disc->grid.nearest_interior(Vec::Constant(1, 0.5)));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto d = make_random_data(disc->grid, seed, 1.0, 0.0, 1.0);
        const auto rep = check_weak_harnack(gen_supersolution(disc, d.f, d.g, seed), dom, 0.25, minor);
        CHECK(rep.verdict == Verdict::Pass);
        CHECK(rep.value("C_fit") >= rep.value("C_ref"));
    }
    // A nonnegative function vanishing inside V cannot be a supersolution.
    auto vee = [](const Vec& x) { return std::abs(x(0) - 0.5); };
    const auto c = make_case(disc, interior_values(disc->grid, vee), exterior_values(disc->grid, vee), true, "vee");
    CHECK(check_weak_harnack(c, dom, 0.25, minor).verdict == Verdict::Fail);
    CHECK_THROWS_AS(check_weak_harnack(gen_subsolution(disc, Vector::Zero(c.u.size()), c.g, 0), dom, 0.25, minor),
                    ContractViolation);
}

TEST_CASE("Harnack corollary ratio") {
    const Vec x_hat{{1.0, 0.0}};
    FieldInputs in{[](const Vec& x) { return x.squaredNorm(); }, 1.0, disc_samples()};
    const auto rep = check_harnack_corollary(in, unit_disc(), x_hat, Vec::Zero(2), 0.01);
    CHECK(rep.verdict == Verdict::Info);
    CHECK(rep.value("ratio") == doctest::Approx(2.0).epsilon(1e-2));

    FieldInputs flat{[](const Vec& x) { return 1.0 - (1.0 - x(0)) * (1.0 - x(0)); }, 1.0, {}};
    CHECK(check_harnack_corollary(flat, unit_interval(), Vec::Constant(1, 1.0), Vec::Constant(1, 0.0), 1e-6).verdict ==
          Verdict::Fail);
}

TEST_CASE("Monte Carlo agrees with the grid solution") {
    const auto dom = unit_interval();
    const auto op = half_laplacian(1);
    const auto disc = assemble(op, dom, 0.02);
    PathConfig cfg;
    cfg.dt = 1e-3;
    cfg.n_paths = 2000;
    cfg.seed = 5;
    auto g = [](const Vec& x) { return x(0) > 0.5 ? 1.0 : 0.0; };
    auto f = [](const Vec&) { return 1.0; };
    const auto rep = mc_vs_grid(op, KillingRate::uniform(1.0), dom, f, g, Vec::Constant(1, 0.3), cfg, disc);
    CHECK(rep.verdict == Verdict::Pass);
    CHECK(rep.value("budget") > 3.0 * rep.value("ci"));
    CHECK(rep.value("tol_richardson") < 1e-2);

    const auto wrong = KillingRate::uniform(3.0);
    const auto neg = mc_vs_grid(op, KillingRate::uniform(1.0), dom, f, g, Vec::Constant(1, 0.3), cfg, disc, 2e-3, &wrong);
    CHECK(neg.verdict == Verdict::Fail);
}

TEST_CASE("increasing c never decreases u(x_hat) - u(x) for f = 0, g >= 0") {
    const auto dom = unit_disc();
    const auto base = assemble(half_laplacian(2), dom, 0.1);
    const auto d = make_random_data(base.grid, 4, 1.0, 0.0, 1.0);
    const Vector f = Vector::Zero(static_cast<Eigen::Index>(base.size()));
    const double u_hat = d.g.maxCoeff();
    Vector prev;
    for (double c0 : {0.0, 0.5, 1.0, 4.0}) {
        const Vector c = interior_values(base.grid, [c0](const Vec& x) { return c0 * (1.0 + x(0) * x(0)); });
        const auto disc = std::make_shared<const DiscreteOperator>(base.with_killing(c));
        const auto sub = gen_subsolution(disc, f, d.g, 4);
        const Vector lhs = (u_hat - sub.u.array()).matrix();
        if (prev.size()) CHECK((lhs - prev).minCoeff() >= -1e-12);
        prev = lhs;
    }
}

TEST_CASE("delta bound on (-1, 1): R_0 1 = 1 - x², ratio 1 + |x|") {
    const auto dom = DomainSpec(Box{Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)});
    const auto disc = assemble(half_laplacian(1), dom, 0.01);
    const auto rep = check_delta_bound(disc, dom, Vector::Ones(static_cast<Eigen::Index>(disc.size())), 0.0);
    CHECK(rep.verdict == Verdict::Pass);
    CHECK(rep.value("a_fit") >= 0.9);
    CHECK(rep.value("a_fit") == doctest::Approx(1.0).epsilon(0.02));
}
