#include "hopflab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace hopflab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void require_disc(const SubsolutionCase& c) {
    if (!c.disc) throw ContractViolation("case has no discrete operator");
}

/// Common preamble: an uncertified case is a Fail with the reason recorded.
bool reject_uncertified(const SubsolutionCase& c, VerificationReport& r) {
    r.set("certified", c.certified ? 1.0 : 0.0);
    r.set("worst_residual", c.worst_residual);
    if (c.certified) return false;
    r.verdict = Verdict::Fail;
    r.note = "uncertified input: residual check failed";
    return true;
}

double max_coupled(const SubsolutionCase& c, const std::vector<std::size_t>& ext, bool positive_part) {
    double m = -std::numeric_limits<double>::infinity();
    for (auto j : ext) {
        const double v = c.g(static_cast<Eigen::Index>(j));
        m = std::max(m, positive_part ? std::max(v, 0.0) : v);
    }
    return m;
}

std::string fmt(double x) {
    std::ostringstream s;
    s << std::setprecision(3) << x;
    return s.str();
}

}  // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Fail: return "FAIL";
        case Verdict::Vacuous: return "VACUOUS";
        case Verdict::NotApplicable: return "N/A";
        case Verdict::Info: return "INFO";
        case Verdict::ExpectedFail: return "XFAIL";
    }
    return "?";
}

void Digest::bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
        h_ ^= b[i];
        h_ *= 1099511628211ULL;
    }
}

Digest& Digest::add(double x) {
    bytes(&x, sizeof x);
    return *this;
}

Digest& Digest::add(std::uint64_t x) {
    bytes(&x, sizeof x);
    return *this;
}

Digest& Digest::add(const Vector& v) {
    add(static_cast<std::uint64_t>(v.size()));
    bytes(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
    return *this;
}

Digest& Digest::add(const std::string& s) {
    add(static_cast<std::uint64_t>(s.size()));
    bytes(s.data(), s.size());
    return *this;
}

std::string Digest::hex() const {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h_;
    return s.str();
}

void VerificationReport::set(const std::string& key, double v) {
    for (auto& kv : values)
        if (kv.first == key) {
            kv.second = v;
            return;
        }
    values.emplace_back(key, v);
}

double VerificationReport::value(const std::string& key) const {
    for (const auto& kv : values)
        if (kv.first == key) return kv.second;
    return kNaN;
}

void VerificationReport::decide() { verdict = margin >= -tolerance ? Verdict::Pass : Verdict::Fail; }

std::string SubsolutionCase::digest() const {
    Digest d;
    d.add(u).add(g).add(f).add(seed).add(source);
    if (disc) d.add(disc->c).add(disc->grid.h);
    return d.hex();
}

void recertify(SubsolutionCase& c) {
    require_disc(c);
    const auto& disc = *c.disc;
    if (static_cast<std::size_t>(c.u.size()) != disc.size() ||
        static_cast<std::size_t>(c.g.size()) != disc.grid.n_exterior())
        throw ContractViolation("case vectors do not match the grid");
    c.residual = apply_discrete(disc, c.u, c.g);
    c.cert_tol = 1e-9 * std::max(1.0, inf_norm(c.u));
    c.worst_residual = c.supersolution ? -c.residual.maxCoeff() : c.residual.minCoeff();
    c.certified = c.worst_residual >= -c.cert_tol;
}

SubsolutionCase make_case(std::shared_ptr<const DiscreteOperator> disc, Vector u, Vector g,
                          bool supersolution, std::string source) {
    SubsolutionCase c;
    c.disc = std::move(disc);
    c.u = std::move(u);
    c.g = std::move(g);
    c.supersolution = supersolution;
    c.source = std::move(source);
    recertify(c);
    c.f = c.supersolution ? Vector(-c.residual) : c.residual;
    return c;
}

namespace {

SubsolutionCase solve_case(std::shared_ptr<const DiscreteOperator> disc, const Vector& f, const Vector& g,
                           std::uint64_t seed, bool super) {
    if (!disc) throw ContractViolation("case has no discrete operator");
    if (f.size() && f.minCoeff() < 0.0) throw ContractViolation("source f must be non-negative");
    SubsolutionCase c;
    c.disc = disc;
    c.f = f;
    c.g = g;
    c.seed = seed;
    c.supersolution = super;
    c.source = super ? "solve (A-c)u = -f" : "solve (A-c)u = f";
    // (A - c)u = ±f  <=>  (c - A)u = ∓f + B g
    c.u = ResolventSolver(*disc, 0.0).solve(super ? f : Vector(-f), g);
    recertify(c);
    if (!c.certified) throw NumericalError("solver-tolerance failure: residual recheck dipped below -tol", c.worst_residual);
    return c;
}

}  // namespace

SubsolutionCase gen_subsolution(std::shared_ptr<const DiscreteOperator> disc, const Vector& f, const Vector& g,
                                std::uint64_t seed) {
    return solve_case(std::move(disc), f, g, seed, false);
}

SubsolutionCase gen_supersolution(std::shared_ptr<const DiscreteOperator> disc, const Vector& f, const Vector& g,
                                  std::uint64_t seed) {
    return solve_case(std::move(disc), f, g, seed, true);
}

RandomData make_random_data(const Grid& grid, std::uint64_t seed, double f_scale, double g_lo, double g_hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    RandomData d;
    const double s = f_scale * U(rng);
    d.f.resize(static_cast<Eigen::Index>(grid.n_interior()));
    for (Eigen::Index i = 0; i < d.f.size(); ++i) {
        const double v = U(rng);
        d.f(i) = s * v * v * v;
    }
    d.g.resize(static_cast<Eigen::Index>(grid.n_exterior()));
    for (Eigen::Index i = 0; i < d.g.size(); ++i) d.g(i) = g_lo + (g_hi - g_lo) * U(rng);
    return d;
}

std::function<double(const Vec&)> grid_interpolant(const Grid& grid, const Vector& u, const Vector& g) {
    return [&grid, u, g](const Vec& x) {
        const int d = grid.dim;
        LatticeIndex base{0, 0, 0};
        std::array<double, 3> frac{0.0, 0.0, 0.0};
        for (int k = 0; k < d; ++k) {
            const double s = (x(k) - grid.origin(k)) / grid.h;
            const double fl = std::floor(s);
            base[static_cast<std::size_t>(k)] = static_cast<int>(fl);
            frac[static_cast<std::size_t>(k)] = s - fl;
        }
        double value = 0.0;
        for (int corner = 0; corner < (1 << d); ++corner) {
            double w = 1.0;
            LatticeIndex idx = base;
            for (int k = 0; k < d; ++k) {
                const auto ks = static_cast<std::size_t>(k);
                const bool up = (corner >> k) & 1;
                w *= up ? frac[ks] : 1.0 - frac[ks];
                idx[ks] += up ? 1 : 0;
            }
            if (w < 1e-14) continue;
            const auto id = grid.lookup(idx);
            if (!id) {
                std::ostringstream msg;
                msg << "interpolation point " << x.transpose() << " leaves the grid";
                throw ContractViolation(msg.str());
            }
            value += w * (*id >= 0 ? u(*id) : g(-*id - 1));
        }
        return value;
    };
}

std::vector<std::size_t> coupled_exterior(const DiscreteOperator& disc) {
    std::vector<bool> used(disc.grid.n_exterior(), false);
    for (Eigen::Index i = 0; i < disc.B_ext.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(disc.B_ext, i); it; ++it)
            if (it.value() != 0.0) used[static_cast<std::size_t>(it.col())] = true;
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < used.size(); ++j)
        if (used[j]) out.push_back(j);
    return out;
}

BoundaryMax boundary_max(const SubsolutionCase& c, const DomainSpec& dom) {
    require_disc(c);
    const auto& grid = c.disc->grid;
    BoundaryMax out;
    Eigen::Index imax = 0;
    const double umax = c.u.size() ? c.u.maxCoeff(&imax) : -std::numeric_limits<double>::infinity();
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t jmax = 0;
    for (auto j : coupled_exterior(*c.disc)) {
        if (c.g(static_cast<Eigen::Index>(j)) > gmax) {
            gmax = c.g(static_cast<Eigen::Index>(j));
            jmax = j;
        }
    }
    if (gmax >= umax) {
        out.value = gmax;
        out.node = -static_cast<long>(jmax) - 1;
        out.on_exterior = true;
        out.x_hat = project_to_boundary(dom, grid.exterior_points[jmax]);
    } else {
        out.value = umax;
        out.node = static_cast<long>(imax);
        out.x_hat = grid.interior_points[static_cast<std::size_t>(imax)];
    }
    return out;
}

VerificationReport check_weak_max(const SubsolutionCase& c, const DomainSpec& dom, const LevyKernelSpec& kernel,
                                  double tol) {
    require_disc(c);
    VerificationReport r;
    r.check = "weak-max";
    r.digest = c.digest();
    r.tolerance = tol;
    r.tolerance_note = "absolute; exact discrete comparison principle";
    const auto ext = coupled_exterior(*c.disc);
    const bool no_killing = inf_norm(c.disc->c) == 0.0;
    const double bound = max_coupled(c, ext, !no_killing);
    const double umax = c.u.maxCoeff();
    r.margin = bound - umax;
    r.set("max_u", umax);
    r.set(no_killing ? "max_g" : "max_g_plus", bound);
    std::size_t unreachable = 0;
    for (auto j : ext)
        if (!reachable_set_contains(dom, kernel, c.disc->grid.exterior_points[j])) ++unreachable;
    r.set("coupled_exterior", static_cast<double>(ext.size()));
    r.set("coupled_outside_reach", static_cast<double>(unreachable));
    if (reject_uncertified(c, r)) return r;
    r.decide();
    return r;
}

VerificationReport check_strong_max(const SubsolutionCase& c, double tol_const) {
    require_disc(c);
    VerificationReport r;
    r.check = "strong-max";
    r.digest = c.digest();
    const auto& grid = c.disc->grid;
    const double M = c.u.maxCoeff();
    const double spread = M - c.u.minCoeff();
    const double gmax = max_coupled(c, coupled_exterior(*c.disc), false);
    r.tolerance = tol_const * std::max(1.0, std::abs(M));
    r.tolerance_note = "relative near-constancy tolerance";
    r.set("max_u", M);
    r.set("spread", spread);
    r.set("max_g", gmax);
    r.margin = -spread;
    if (reject_uncertified(c, r)) return r;
    bool strict = false;
    for (std::size_t i = 0; i < grid.n_interior() && !strict; ++i)
        strict = !grid.boundary_adjacent[i] && c.u(static_cast<Eigen::Index>(i)) >= M - r.tolerance;
    if (M < 0.0 || !strict || gmax > M + r.tolerance) {
        r.verdict = Verdict::NotApplicable;
        r.note = "interior maximum not attained at a strictly interior node";
        return r;
    }
    r.decide();
    return r;
}

VerificationReport check_bony(const Vector& u, const Vector& g, const DiscreteOperator& disc,
                              std::size_t x_hat_node, const std::vector<double>& radii,
                              const LevyKernelSpec& kernel, const DomainSpec& dom, double tol) {
    VerificationReport r;
    r.check = "bony";
    r.digest = Digest().add(u).add(g).add(static_cast<std::uint64_t>(x_hat_node)).hex();
    r.tolerance = tol;
    r.tolerance_note = "absolute";
    const auto& grid = disc.grid;
    if (x_hat_node >= disc.size()) throw ContractViolation("x_hat node out of range");
    const auto ext = coupled_exterior(disc);
    if (!kernel_is_zero(kernel)) {
        const double reach = grid.h * std::sqrt(static_cast<double>(grid.dim)) + 1e-12;
        for (auto j : ext)
            if (dom.signed_distance(grid.exterior_points[j]) > reach) {
                r.verdict = Verdict::NotApplicable;
                r.note = "jumps leave the closure of D";
                return r;
            }
    }
    const double top = u(static_cast<Eigen::Index>(x_hat_node));
    double gmax = -std::numeric_limits<double>::infinity();
    for (auto j : ext) gmax = std::max(gmax, g(static_cast<Eigen::Index>(j)));
    r.set("u_hat", top);
    r.set("max_u", u.maxCoeff());
    r.set("max_g", gmax);
    if (top < u.maxCoeff() || top < gmax) {
        r.verdict = Verdict::NotApplicable;
        r.note = "x_hat is not an interior maximum";
        return r;
    }
    const Vector Au = disc.A_int * u + disc.B_ext * g;
    const Vec xh = grid.interior_points[x_hat_node];
    double worst = -std::numeric_limits<double>::infinity();
    for (double rad : radii) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < disc.size(); ++i)
            if ((grid.interior_points[i] - xh).norm() <= rad) m = std::min(m, Au(static_cast<Eigen::Index>(i)));
        r.set("min_Au_r=" + fmt(rad), m);
        worst = std::max(worst, m);
    }
    r.margin = -worst;
    r.decide();
    return r;
}

HopfGeometry hopf_geometry(const DomainSpec& dom, const Vec& x_hat, const BarrierConstants& consts) {
    HopfGeometry g;
    g.x_hat = x_hat;
    g.r_domain = interior_ball_radius(dom, x_hat).radius;
    g.r = std::min({consts.r0, g.r_domain, 1.0});
    g.normal = outward_normal(dom, x_hat);
    g.ybar = x_hat - g.r * g.normal;
    return g;
}

FieldInputs field_inputs(const SubsolutionCase& c, const Vec& x_hat, double u_hat) {
    require_disc(c);
    FieldInputs in;
    auto interp = grid_interpolant(c.disc->grid, c.u, c.g);
    in.u = [interp, x_hat, u_hat](const Vec& x) { return (x - x_hat).norm() < 1e-14 ? u_hat : interp(x); };
    in.u_hat = u_hat;
    in.samples = c.disc->grid.interior_points;
    return in;
}

namespace {

double lower_derivative(const FieldInputs& in, const DomainSpec& dom, const HopfGeometry& g) {
    return lower_normal_derivative(in.u, g.x_hat, g.normal, 1e-3 * g.r, 0.5 * g.r, &dom).value;
}

}  // namespace

VerificationReport check_hopf(const FieldInputs& in, const DomainSpec& dom, const Vec& x_hat,
                              const BarrierConstants& consts, double tol) {
    VerificationReport r;
    r.check = "hopf";
    r.tolerance = tol;
    r.tolerance_note = "absolute";
    const auto geo = hopf_geometry(dom, x_hat, consts);
    Digest dg;
    for (double v : x_hat) dg.add(v);
    r.digest = dg.add(in.u_hat).add(geo.r).hex();
    r.set("r", geo.r);
    r.set("r_domain", geo.r_domain);
    if (geo.r <= 0.0) {
        r.verdict = Verdict::NotApplicable;
        r.note = "no interior ball at x_hat";
        return r;
    }
    const double alpha = consts.C / (geo.r * geo.r);
    const double a = alpha * geo.r * std::exp(-alpha * geo.r * geo.r);
    double eps = std::numeric_limits<double>::infinity();
    std::size_t n = 0;
    for (const auto& x : in.samples)
        if (delta_D(dom, x) > 0.5 * geo.r) {
            eps = std::min(eps, in.u_hat - in.u(x));
            ++n;
        }
    r.set("a", a);
    r.set("alpha", alpha);
    r.set("samples", static_cast<double>(n));
    if (n == 0) {
        r.verdict = Verdict::NotApplicable;
        r.note = "D_{r/2} has no samples";
        return r;
    }
    r.set("inf_gap", eps);
    if (eps <= 0.0) {
        r.verdict = Verdict::NotApplicable;
        r.note = "not applicable (constant): u reaches u(x_hat) inside D_{r/2}";
        return r;
    }
    const double lhs = lower_derivative(in, dom, geo);
    r.set("lhs", lhs);
    r.set("rhs", a * eps);
    r.margin = lhs - a * eps;
    r.decide();
    return r;
}

VerificationReport check_hopf(const SubsolutionCase& c, const DomainSpec& dom, const BarrierConstants& consts,
                              double tol) {
    require_disc(c);
    const auto bm = boundary_max(c, dom);
    VerificationReport r;
    r.check = "hopf";
    r.digest = c.digest();
    if (reject_uncertified(c, r)) return r;
    if (!bm.on_exterior || (bm.value < 0.0 && inf_norm(c.disc->c) > 0.0)) {
        r.verdict = Verdict::NotApplicable;
        r.note = "maximum is not a nonnegative boundary maximum";
        return r;
    }
    r = check_hopf(field_inputs(c, bm.x_hat, bm.value), dom, bm.x_hat, consts, tol);
    r.digest = c.digest();
    r.set("certified", 1.0);
    r.set("worst_residual", c.worst_residual);
    return r;
}

ExitProbabilityBound qhl_exit_factor(const OperatorSpec& op, const Vec& center, double r_ball, double c_lower) {
    const auto probe = exit_probability_bound(op, center, r_ball, {0.0}, c_lower);
    if (!(probe.sup_neg > 0.0)) return exit_probability_bound(op, center, r_ball, {1.0}, c_lower);
    const double t_max = probe.a / probe.sup_neg;
    std::vector<double> ts;
    for (int k = 1; k <= 400; ++k) ts.push_back(t_max * k / 400.0);
    return exit_probability_bound(op, center, r_ball, ts, c_lower);
}

VerificationReport check_qhl_IA(const SubsolutionCase& c, const DomainSpec& dom, const OperatorSpec& op,
                                const BarrierConstants& consts, double c_lower, double tol) {
    require_disc(c);
    if (!(c_lower > 0.0)) throw ContractViolation("quantitative Hopf I.A needs a positive lower bound on c");
    VerificationReport r;
    r.check = "qhl-IA";
    r.digest = c.digest();
    r.tolerance = tol;
    r.tolerance_note = "absolute";
    if (reject_uncertified(c, r)) return r;
    const auto bm = boundary_max(c, dom);
    r.set("u_hat", bm.value);
    if (!bm.on_exterior) {
        r.verdict = Verdict::NotApplicable;
        r.note = "maximum not attained on the boundary";
        return r;
    }
    if (bm.value <= 0.0) {
        r.verdict = Verdict::Vacuous;
        r.note = "u(x_hat) <= 0";
        return r;
    }
    const auto geo = hopf_geometry(dom, bm.x_hat, consts);
    if (geo.r <= 0.0) throw ContractViolation("no interior ball at the boundary maximum");
    const auto exit = qhl_exit_factor(op, geo.ybar, 0.5 * geo.r, c_lower);
    const double a = 2.0 * consts.C * exit.a_star * std::exp(-consts.C) / geo.r;
    const double lhs = lower_derivative(field_inputs(c, bm.x_hat, bm.value), dom, geo);
    r.set("r", geo.r);
    r.set("a_star", exit.a_star);
    r.set("a", a);
    r.set("lhs", lhs);
    r.set("rhs", a * bm.value);
    r.margin = lhs - a * bm.value;
    r.decide();
    return r;
}

VerificationReport check_qhl_IB(const SubsolutionCase& c, const DomainSpec& dom, const Vector& gauge,
                                const BarrierConstants& consts, double tol) {
    require_disc(c);
    VerificationReport r;
    r.check = "qhl-IB";
    r.digest = c.digest();
    r.tolerance = tol;
    r.tolerance_note = "absolute";
    if (reject_uncertified(c, r)) return r;
    const auto bm = boundary_max(c, dom);
    r.set("u_hat", bm.value);
    if (!bm.on_exterior) {
        r.verdict = Verdict::NotApplicable;
        r.note = "maximum not attained on the boundary";
        return r;
    }
    const auto geo = hopf_geometry(dom, bm.x_hat, consts);
    if (geo.r <= 0.0) throw ContractViolation("no interior ball at the boundary maximum");
    const double rho = rho_modulus(gauge, c.disc->grid, dom, {0.5 * geo.r}).front().rho;
    const double a = 2.0 * consts.C * std::exp(-consts.C) / geo.r;
    r.set("r", geo.r);
    r.set("rho", rho);
    r.set("a", a);
    if (bm.value <= 0.0 || rho <= 0.0) {
        r.verdict = Verdict::Vacuous;
        r.note = bm.value <= 0.0 ? "u(x_hat) <= 0" : "rho = 0";
        return r;
    }
    const double lhs = lower_derivative(field_inputs(c, bm.x_hat, bm.value), dom, geo);
    r.set("lhs", lhs);
    r.set("rhs", a * rho * bm.value);
    r.margin = lhs - a * rho * bm.value;
    r.decide();
    return r;
}

namespace {

struct QhlIIPrep {
    double u_hat = 0.0;
    double c_lo = 0.0;
    double c_hi = 0.0;
    bool applicable = false;
};

QhlIIPrep prepare_qhl_II(const SubsolutionCase& c, const EigenPair& eigen, VerificationReport& r) {
    QhlIIPrep p;
    if (eigen.phi.size() != c.u.size()) throw ContractViolation("eigenpair computed on a different grid");
    const double umax = c.u.maxCoeff();
    const double gmax = max_coupled(c, coupled_exterior(*c.disc), false);
    p.u_hat = std::max(umax, gmax);
    p.c_lo = c.disc->c.minCoeff();
    p.c_hi = c.disc->c.maxCoeff();
    r.set("u_hat", p.u_hat);
    r.set("lambda", eigen.lambda);
    r.set("c_lower", p.c_lo);
    r.set("c_upper", p.c_hi);
    r.tolerance = 1e-9 * std::max(1.0, std::abs(p.u_hat));
    r.tolerance_note = "1e-9 relative to u(x_hat)";
    if (gmax < umax || p.u_hat < 0.0) {
        r.verdict = Verdict::NotApplicable;
        r.note = "no nonnegative boundary maximum";
        return p;
    }
    p.applicable = true;
    return p;
}

}  // namespace

VerificationReport check_qhl_IIA(const SubsolutionCase& c, const EigenPair& eigen, const Minorization& minor,
                                 double tol) {
    require_disc(c);
    VerificationReport r;
    r.check = "qhl-IIA";
    r.digest = c.digest();
    if (reject_uncertified(c, r)) return r;
    const auto p = prepare_qhl_II(c, eigen, r);
    r.tolerance = std::max(r.tolerance, tol);
    if (!p.applicable) return r;
    if (minor.alpha < p.c_hi - 1e-12) throw ContractViolation("minorization must be taken at alpha >= sup c");
    const double h_d = c.disc->grid.cell_volume();
    const double mass = c.residual.dot(minor.chi) * h_d;
    const double phi_sup = eigen.phi.maxCoeff();
    const double k1 = p.c_lo * p.u_hat / (2.0 * std::numbers::e * phi_sup * (eigen.lambda + p.c_lo));
    double margin = std::numeric_limits<double>::infinity();
    Eigen::Index worst = 0;
    for (Eigen::Index i = 0; i < c.u.size(); ++i) {
        const double m = (p.u_hat - c.u(i)) - (k1 * eigen.phi(i) + minor.psi(i) * mass);
        if (m < margin) {
            margin = m;
            worst = i;
        }
    }
    r.set("residual_mass", mass);
    r.set("worst_node", static_cast<double>(worst));
    r.margin = margin;
    r.decide();
    return r;
}

VerificationReport check_qhl_IIB(const SubsolutionCase& c, const EigenPair& eigen, double tol) {
    require_disc(c);
    VerificationReport r;
    r.check = "qhl-IIB";
    r.digest = c.digest();
    if (reject_uncertified(c, r)) return r;
    const auto p = prepare_qhl_II(c, eigen, r);
    r.tolerance = std::max(r.tolerance, tol);
    if (!p.applicable) return r;
    const double ess = c.residual.minCoeff();
    const double bracket = p.c_lo * p.u_hat / (eigen.lambda + p.c_lo) + ess / (eigen.lambda + p.c_hi);
    const double k = bracket / (2.0 * std::numbers::e * eigen.phi.maxCoeff());
    double margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < c.u.size(); ++i)
        margin = std::min(margin, (p.u_hat - c.u(i)) - k * eigen.phi(i));
    r.set("min_residual", ess);
    r.set("bracket", bracket);
    r.margin = margin;
    r.decide();
    return r;
}

VerificationReport check_delta_bound(const DiscreteOperator& disc, const DomainSpec& dom, const Vector& f,
                                     double alpha, double threshold) {
    VerificationReport r;
    r.check = "delta-bound";
    r.digest = Digest().add(f).add(alpha).add(disc.grid.h).hex();
    r.tolerance = 0.0;
    r.tolerance_note = "Pass iff a_fit >= threshold";
    r.set("threshold", threshold);
    if (f.size() && f.minCoeff() < 0.0) throw ContractViolation("delta bound needs f >= 0");
    if (inf_norm(f) == 0.0) {
        r.verdict = Verdict::NotApplicable;
        r.note = "not applicable (trivial f)";
        r.set("a_fit", 0.0);
        return r;
    }
    const Vector Rf = ResolventSolver(disc, alpha).solve(f);
    double a_fit = std::numeric_limits<double>::infinity();
    Eigen::Index worst = 0;
    for (Eigen::Index i = 0; i < Rf.size(); ++i) {
        const double delta = delta_D(dom, disc.grid.interior_points[static_cast<std::size_t>(i)]);
        if (delta <= 0.0) continue;
        const double q = Rf(i) / delta;
        if (q < a_fit) {
            a_fit = q;
            worst = i;
        }
    }
    r.set("a_fit", a_fit);
    r.set("worst_node", static_cast<double>(worst));
    r.margin = a_fit - threshold;
    r.decide();
    return r;
}

DeltaRefinement delta_bound_refinement(const OperatorSpec& op, const DomainSpec& dom,
                                       const std::function<double(const Vec&)>& f, double alpha,
                                       const std::vector<double>& hs) {
    DeltaRefinement out;
    for (double h : hs) {
        const auto disc = assemble(op, dom, h);
        const auto rep = check_delta_bound(disc, dom, interior_values(disc.grid, f), alpha);
        out.h.push_back(h);
        out.a_fit.push_back(rep.value("a_fit"));
        out.nodes.push_back(disc.size());
    }
    bool decreasing = out.a_fit.size() >= 2;
    for (std::size_t k = 1; k < out.a_fit.size(); ++k) decreasing = decreasing && out.a_fit[k] < out.a_fit[k - 1];
    out.degrading = decreasing && out.a_fit.back() <= 0.5 * out.a_fit.front();
    return out;
}

VerificationReport check_weak_harnack(const SubsolutionCase& c, const DomainSpec& dom, double v_margin,
                                      const Minorization& minor) {
    require_disc(c);
    VerificationReport r;
    r.check = "weak-harnack";
    r.digest = c.digest();
    if (!c.supersolution) throw ContractViolation("weak Harnack needs a supersolution case");
    if (reject_uncertified(c, r)) return r;
    const double c_hi = c.disc->c.maxCoeff();
    if (minor.alpha < c_hi + 1.0 - 1e-12) throw ContractViolation("minorization must be taken at alpha >= sup c + 1");
    const auto ext = coupled_exterior(*c.disc);
    if (c.u.minCoeff() < -c.cert_tol || (!ext.empty() && max_coupled(c, ext, false) < 0.0 &&
                                         c.g.minCoeff() < 0.0)) {
        r.verdict = Verdict::NotApplicable;
        r.note = "supersolution is not nonnegative";
        return r;
    }
    for (auto j : ext)
        if (c.g(static_cast<Eigen::Index>(j)) < 0.0) {
            r.verdict = Verdict::NotApplicable;
            r.note = "exterior data is not nonnegative";
            return r;
        }
    const auto& grid = c.disc->grid;
    double min_u = std::numeric_limits<double>::infinity();
    double c_ref = std::numeric_limits<double>::infinity();
    double integral = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < grid.n_interior(); ++i) {
        if (delta_D(dom, grid.interior_points[i]) <= v_margin) continue;
        const auto k = static_cast<Eigen::Index>(i);
        min_u = std::min(min_u, c.u(k));
        c_ref = std::min(c_ref, minor.psi(k));
        integral += c.u(k) * minor.chi(k);
        ++n;
    }
    integral *= grid.cell_volume();
    r.set("nodes_in_V", static_cast<double>(n));
    if (n == 0) {
        r.verdict = Verdict::NotApplicable;
        r.note = "V has no grid nodes";
        return r;
    }
    r.set("C_ref", c_ref);
    r.set("min_u", min_u);
    r.set("integral", integral);
    if (integral <= 0.0) {
        r.verdict = Verdict::Vacuous;
        r.note = "u vanishes on V";
        return r;
    }
    const double c_fit = min_u / integral;
    r.set("C_fit", c_fit);
    r.margin = c_fit - c_ref;
    r.tolerance = 1e-9 * c_ref;
    r.tolerance_note = "1e-9 relative to C_ref";
    r.decide();
    return r;
}

VerificationReport check_harnack_corollary(const FieldInputs& in, const DomainSpec& dom, const Vec& x_hat,
                                           const Vec& x0, double h_max) {
    VerificationReport r;
    r.check = "harnack-corollary";
    Digest dg;
    for (double v : x_hat) dg.add(v);
    for (double v : x0) dg.add(v);
    r.digest = dg.add(in.u_hat).hex();
    const double gap = in.u_hat - in.u(x0);
    r.set("gap", gap);
    if (gap <= 1e-12 * std::max(1.0, std::abs(in.u_hat))) {
        r.verdict = Verdict::NotApplicable;
        r.note = "u(x_hat) = u(x0)";
        return r;
    }
    const double d = lower_normal_derivative(in.u, x_hat, outward_normal(dom, x_hat), 1e-3 * h_max, h_max, &dom).value;
    r.set("normal_derivative", d);
    r.set("ratio", d / gap);
    r.margin = d / gap;
    r.verdict = r.margin > 0.0 ? Verdict::Info : Verdict::Fail;
    r.note = "informational: Harnack constants are not guaranteed for every kernel";
    return r;
}

VerificationReport mc_vs_grid(const OperatorSpec& op, const KillingRate& c, const DomainSpec& dom,
                              const std::function<double(const Vec&)>& f,
                              const std::function<double(const Vec&)>& g, const Vec& x0, const PathConfig& cfg,
                              const DiscreteOperator& disc, double floor, const KillingRate* grid_c) {
    VerificationReport r;
    r.check = "mc-vs-grid";
    const auto& grid = disc.grid;
    auto zero = [](const Vec&) { return 0.0; };
    const auto& fs = f ? f : std::function<double(const Vec&)>(zero);
    const auto& gs = g ? g : std::function<double(const Vec&)>(zero);

    auto solve_on = [&](const DiscreteOperator& d) {
        const auto& kc = grid_c ? *grid_c : c;
        const auto dk = d.with_killing(interior_values(d.grid, [&kc](const Vec& x) { return kc(x); }));
        const Vector F = interior_values(d.grid, fs);
        const Vector G = exterior_values(d.grid, gs);
        const Vector u = ResolventSolver(dk, 0.0).solve(F, G);
        return std::make_pair(u, G);
    };
    const auto [u, G] = solve_on(disc);
    const double grid_value = grid_interpolant(grid, u, G)(x0);
    const auto coarse = assemble(op, dom, 2.0 * grid.h);
    const auto [uc, Gc] = solve_on(coarse);
    const double coarse_value = grid_interpolant(coarse.grid, uc, Gc)(x0);

    GridTolerance tol;
    tol.solver = 10.0 * kSolverTol * std::max(1.0, inf_norm(u));
    tol.richardson = std::abs(grid_value - coarse_value);
    double grad = 0.0;
    for (std::size_t i = 0; i < grid.n_interior(); ++i) {
        if (!grid.boundary_adjacent[i]) continue;
        for (int k = 0; k < grid.dim; ++k)
            for (int s : {-1, 1}) {
                LatticeIndex nb = grid.interior[i];
                nb[static_cast<std::size_t>(k)] += s;
                const auto id = grid.lookup(nb);
                if (id && *id < 0) grad = std::max(grad, std::abs(u(static_cast<Eigen::Index>(i)) - G(-*id - 1)) / grid.h);
            }
    }
    const double q_sup = op.coeffs.sup.trace_q + kernel_small_jump_covariance(op.kernel, op.dim()).trace();
    tol.monitoring = 0.5826 * std::sqrt(q_sup * cfg.dt) * grad;
    tol.floor = floor;

    const auto est = estimate_feynman_kac(op, c, dom, x0, f, g, cfg);
    const double budget = 3.0 * est.ci + tol.total();
    const double diff = std::abs(est.mean - grid_value);
    Digest dg;
    for (double v : x0) dg.add(v);
    r.digest = dg.add(cfg.seed).add(cfg.dt).add(static_cast<std::uint64_t>(cfg.n_paths)).add(grid.h).add(u).hex();
    r.set("mc", est.mean);
    r.set("ci", est.ci);
    r.set("grid", grid_value);
    r.set("grid_coarse", coarse_value);
    r.set("tol_solver", tol.solver);
    r.set("tol_richardson", tol.richardson);
    r.set("tol_monitoring", tol.monitoring);
    r.set("tol_floor", tol.floor);
    r.set("budget", budget);
    r.set("diff", diff);
    r.set("horizon_fraction", est.horizon_fraction);
    r.set("n_paths", static_cast<double>(est.n_paths));
    r.set("dt", cfg.dt);
    r.set("h", grid.h);
    r.tolerance = 0.0;
    r.tolerance_note = "budget = 3 CI + solver + Richardson + monitoring + floor";
    r.margin = budget - diff;
    r.decide();
    if (est.bias_flag) r.note = "some paths hit the horizon";
    return r;
}

}  // namespace hopflab
