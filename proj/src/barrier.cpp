#include "hopflab/barrier.hpp"

#include <boost/random/sobol.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hopflab {

namespace {

constexpr double kDoublingCap = 1099511627776.0;  // 2^40

std::vector<Vec> lattice_in_cube(const Vec& center, double half_width, int per_axis) {
    return box_lattice({Vec(center.array() - half_width), Vec(center.array() + half_width)}, per_axis);
}

}  // namespace

double eta(const BarrierParams& p, const Vec& x) {
    return std::exp(-p.alpha * (x - p.ybar).squaredNorm()) - std::exp(-p.alpha * p.r * p.r);
}

SmoothField eta_field(const BarrierParams& p) {
    SmoothField f;
    f.value = [p](const Vec& x) { return eta(p, x); };
    f.gradient = [p](const Vec& x) {
        const Vec z = x - p.ybar;
        return Vec(-2.0 * p.alpha * z * std::exp(-p.alpha * z.squaredNorm()));
    };
    f.hessian = [p](const Vec& x) {
        const Vec z = x - p.ybar;
        const auto d = z.size();
        return Mat(std::exp(-p.alpha * z.squaredNorm()) *
                   (4.0 * p.alpha * p.alpha * z * z.transpose() - 2.0 * p.alpha * Mat::Identity(d, d)));
    };
    return f;
}

ConstantInputs ConstantInputs::from(const OperatorSpec& op, double lambda) {
    ConstantInputs in;
    in.lambda = lambda;
    in.trace_q = op.coeffs.sup.trace_q + kernel_small_jump_covariance(op.kernel, op.dim()).trace();
    in.b_sup = op.coeffs.sup.b_norm;
    in.n_total = kernel_total_mass(op.kernel, op.dim());
    in.c_sup = op.c().upper;
    const auto kernel = op.kernel;
    const int d = op.dim();
    in.n_small = [kernel, d](double r) { return kernel_small_ball_mass(kernel, d, r); };
    return in;
}

double barrier_gamma_star(const ConstantInputs& in) {
    if (!(in.lambda > 0.0)) throw ContractViolation("constant selection needs lambda > 0");
    return 4.0 / in.lambda * (in.trace_q + 1.5 * in.b_sup);
}

double barrier_lower_bound(const ConstantInputs& in, double gamma_star, double alpha, double M) {
    const double lead = gamma_star / (2.0 * in.lambda) * std::exp(-9.0 * gamma_star / 4.0);
    const double n = in.n_small ? in.n_small(M * std::sqrt(gamma_star / alpha)) : 0.0;
    const double tail = std::sqrt(gamma_star / alpha) / 2.0 + 1.5 / M + std::exp(-M * M * gamma_star / 4.0);
    return alpha * (lead - n - 2.0 * tail * in.n_total) - 2.0 * in.n_total - in.c_sup;
}

BarrierConstants choose_constants(const ConstantInputs& in, double K_target) {
    BarrierConstants out;
    out.K = K_target;
    out.gamma_star = barrier_gamma_star(in);
    out.C = out.gamma_star;
    const double g = out.gamma_star;
    const double lead = g / (2.0 * in.lambda) * std::exp(-9.0 * g / 4.0);
    const double n0 = in.n_small ? in.n_small(1e-12) : 0.0;
    if (lead - n0 <= 0.0) {
        std::ostringstream msg;
        msg << "small-jump modulus n(0+) = " << n0 << " does not fall below the diffusion term " << lead;
        throw ConstantSelectionError(msg.str());
    }
    // α → ∞ limit of the bracket must keep half of the leading term
    out.M = 11.0;
    auto limit = [&](double M) { return lead - n0 - 2.0 * (1.5 / M + std::exp(-M * M * g / 4.0)) * in.n_total; };
    while (limit(out.M) < 0.5 * (lead - n0)) {
        out.M *= 2.0;
        ++out.m_doublings;
        if (out.M > kDoublingCap) throw ConstantSelectionError("M search exceeded 2^40");
    }
    double alpha = 1.0;
    while (barrier_lower_bound(in, g, alpha, out.M) <= K_target) {
        alpha *= 2.0;
        ++out.alpha_doublings;
        if (alpha > kDoublingCap) {
            std::ostringstream msg;
            msg << "alpha search exceeded 2^40 (bound " << barrier_lower_bound(in, g, kDoublingCap, out.M)
                << " < K = " << K_target << ")";
            throw ConstantSelectionError(msg.str());
        }
    }
    out.alpha0 = alpha;
    out.lower_bound = barrier_lower_bound(in, g, alpha, out.M);
    out.r0 = std::sqrt(out.C / alpha);
    return out;
}

BarrierParams BarrierConstants::at(const Vec& ybar, double r) const {
    if (!(r > 0.0) || r > std::min(r0, 1.0) * (1.0 + 1e-12))
        throw ContractViolation("barrier radius must lie in (0, min(r0, 1)]");
    return BarrierParams{C / (r * r), ybar, r, gamma_star};
}

BarrierVerification verify_barrier(const OperatorSpec& op, const BarrierParams& p, double K_target,
                                   const BarrierSampling& sampling) {
    const int d = op.dim();
    if (p.ybar.size() != d) throw ContractViolation("barrier centre has wrong dimension");
    const SmoothField f = eta_field(p);
    std::vector<Vec> pts;
    auto in_vstar = [&](const Vec& x) {
        const double s = (x - p.ybar).norm();
        return s > 0.5 * p.r && s < 1.5 * p.r;
    };
    for (const auto& x : lattice_in_cube(p.ybar, 1.5 * p.r, 3 * sampling.per_unit_length + 1))
        if (in_vstar(x)) pts.push_back(x);
    if (sampling.quasi_random > 0) {
        boost::random::sobol qrng(static_cast<std::size_t>(d));
        const double scale = 1.0 / (static_cast<double>(qrng.max()) + 1.0);
        for (int i = 0; i < sampling.quasi_random; ++i) {
            Vec x(d);
            for (int k = 0; k < d; ++k) x(k) = p.ybar(k) + p.r * (3.0 * static_cast<double>(qrng()) * scale - 1.5);
            if (in_vstar(x)) pts.push_back(x);
        }
    }
    BarrierVerification out;
    out.K = K_target;
    out.margin = std::numeric_limits<double>::infinity();
    out.samples.reserve(pts.size());
    for (const auto& x : pts) {
        const double v = apply(op, f, x) - op.killing(x) * f.value(x);
        out.samples.push_back({x, v});
        if (v < out.margin) {
            out.margin = v;
            out.worst = x;
        }
    }
    out.tol = sampling.tol * std::max(1.0, std::abs(K_target));
    out.pass = !pts.empty() && out.margin >= K_target - out.tol;
    return out;
}

double ExteriorBarrier::operator()(const Vec& x) const {
    const double s = std::clamp((x - y0).norm(), r / 10.0, m_out);
    return scale * (std::pow(r, -sigma) - std::pow(s, -sigma));
}

SmoothField ExteriorBarrier::field() const {
    const ExteriorBarrier self = *this;
    auto inside = [self](const Vec& x) {
        const double s = (x - self.y0).norm();
        return s > self.r / 10.0 && s < self.m_out;
    };
    SmoothField f;
    f.value = self;
    f.gradient = [self, inside](const Vec& x) {
        if (!inside(x)) return Vec(Vec::Zero(x.size()));
        const Vec z = x - self.y0;
        const double s = z.norm();
        return Vec(self.scale * self.sigma * std::pow(s, -self.sigma - 2.0) * z);
    };
    f.hessian = [self, inside](const Vec& x) {
        const auto d = x.size();
        if (!inside(x)) return Mat(Mat::Zero(d, d));
        const Vec z = x - self.y0;
        const double s = z.norm();
        const Vec e = z / s;
        return Mat(self.scale * self.sigma * std::pow(s, -self.sigma - 2.0) *
                   (Mat::Identity(d, d) - (self.sigma + 2.0) * e * e.transpose()));
    };
    return f;
}

ExteriorBarrier exterior_barrier(const Vec& x_hat, const Vec& y0, double r, double sigma, double scale,
                                 double m_out) {
    if (!(r > 0.0 && sigma > 0.0 && scale > 0.0 && m_out > r)) throw ContractViolation("invalid exterior barrier parameters");
    if (std::abs((x_hat - y0).norm() - r) > 1e-9 * std::max(1.0, r))
        throw ContractViolation("exterior ball must touch the boundary point");
    return ExteriorBarrier{y0, r, sigma, scale, m_out};
}

ExteriorVerification verify_exterior_barrier(const OperatorSpec& op, const DomainSpec& dom,
                                             const ExteriorBarrier& psi, int per_axis, double tol) {
    ExteriorVerification out;
    out.margin = std::numeric_limits<double>::infinity();
    const SmoothField f = psi.field();
    const BoxRegion bb = dom.bounding_box();
    for (const auto& x : box_lattice(bb, per_axis)) {
        if (!dom.contains(x)) continue;
        const double v = -apply(op, f, x);
        ++out.samples;
        if (v < out.margin) {
            out.margin = v;
            out.worst = x;
        }
    }
    out.pass = out.samples > 0 && out.margin >= -tol;
    return out;
}

std::vector<RhoEntry> rho_modulus(const Vector& w, const Grid& grid, const DomainSpec& dom,
                                  const std::vector<double>& r_values) {
    if (static_cast<std::size_t>(w.size()) != grid.n_interior()) throw ContractViolation("gauge vector has wrong size");
    std::vector<double> delta(grid.n_interior());
    for (std::size_t i = 0; i < grid.n_interior(); ++i) delta[i] = delta_D(dom, grid.interior_points[i]);
    std::vector<RhoEntry> out;
    for (double r : r_values) {
        RhoEntry e;
        e.r = r;
        e.rho = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < grid.n_interior(); ++i) {
            if (delta[i] > r) {
                e.rho = std::min(e.rho, w(static_cast<Eigen::Index>(i)));
                ++e.nodes;
            }
        }
        if (e.nodes == 0) e.rho = 0.0;
        e.rho = std::clamp(e.rho, 0.0, 1.0);
        out.push_back(e);
    }
    return out;
}

ExitProbabilityBound exit_probability_bound(const OperatorSpec& op, const Vec& xbar, double r,
                                            const std::vector<double>& t_grid, double c_lower, int per_axis) {
    if (!(r > 0.0)) throw ContractViolation("exit probability radius must be positive");
    ExitProbabilityBound out;
    const double r2 = r * r;
    const auto d = xbar.size();
    SmoothField rho;
    rho.value = [xbar, r2](const Vec& x) { return std::exp(-(x - xbar).squaredNorm() / r2); };
    rho.gradient = [xbar, r2](const Vec& x) {
        const Vec z = x - xbar;
        return Vec(-2.0 / r2 * z * std::exp(-z.squaredNorm() / r2));
    };
    rho.hessian = [xbar, r2, d](const Vec& x) {
        const Vec z = x - xbar;
        return Mat(std::exp(-z.squaredNorm() / r2) * (4.0 / (r2 * r2) * z * z.transpose() - 2.0 / r2 * Mat::Identity(d, d)));
    };
    out.a = 1.0 - std::exp(-1.0);
    std::vector<Vec> pts{xbar};
    for (const auto& x : lattice_in_cube(xbar, r, per_axis))
        if ((x - xbar).norm() < r) pts.push_back(x);
    for (const auto& x : pts) out.sup_neg = std::max(out.sup_neg, -apply(op, rho, x));
    out.t_grid = t_grid;
    for (double t : t_grid) {
        const double b = t * out.sup_neg / out.a;
        out.bound.push_back(b);
        const double cand = (1.0 - std::exp(-c_lower * t)) * (1.0 - b);
        if (b < 1.0 && cand > out.a_star) {
            out.a_star = cand;
            out.t_star = t;
        }
    }
    out.vacuous = out.a_star <= 0.0;
    return out;
}

}  // namespace hopflab
