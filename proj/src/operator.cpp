#include "hopflab/operator.hpp"

#include "quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace hopflab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double unit_ball_volume(int dim) { return unit_sphere_area(dim) / dim; }

/// Unit directions and weights integrating over the unit sphere S^{d-1}.
void sphere_rule(int dim, int angular, std::vector<Vec>& dirs, std::vector<double>& weights) {
    dirs.clear();
    weights.clear();
    if (dim == 1) {
        dirs = {make_vec({1.0}), make_vec({-1.0})};
        weights = {1.0, 1.0};
        return;
    }
    if (dim == 2) {
        for (int k = 0; k < angular; ++k) {
            const double phi = 2.0 * std::numbers::pi * (k + 0.5) / angular;
            dirs.push_back(make_vec({std::cos(phi), std::sin(phi)}));
            weights.push_back(2.0 * std::numbers::pi / angular);
        }
        return;
    }
    const auto mu = detail::gauss_panels(-1.0, 1.0, std::max(1, angular / 8));
    for (std::size_t i = 0; i < mu.nodes.size(); ++i) {
        const double ct = mu.nodes[i];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int k = 0; k < angular; ++k) {
            const double phi = 2.0 * std::numbers::pi * (k + 0.5) / angular;
            dirs.push_back(make_vec({st * std::cos(phi), st * std::sin(phi), ct}));
            weights.push_back(mu.weights[i] * 2.0 * std::numbers::pi / angular);
        }
    }
}

}  // namespace

KillingRate KillingRate::zero() { return uniform(0.0); }

KillingRate KillingRate::uniform(double value) {
    if (value < 0.0) throw ContractViolation("killing rate must be non-negative");
    KillingRate c;
    c.fn = [value](const Vec&) { return value; };
    c.upper = value;
    c.lower = value;
    c.constant = value;
    return c;
}

KillingRate KillingRate::ball_indicator(const Vec& center, double radius, double value) {
    if (value < 0.0) throw ContractViolation("killing rate must be non-negative");
    KillingRate c;
    c.fn = [center, radius, value](const Vec& x) {
        return (x - center).norm() < radius ? value : 0.0;
    };
    c.upper = value;
    c.lower = 0.0;
    return c;
}

CoefficientField CoefficientField::constant(const Mat& q, const Vec& b, KillingRate c) {
    if (q.rows() != q.cols() || q.rows() != b.size())
        throw ContractViolation("coefficient dimensions disagree");
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-14)
        throw ContractViolation("Q must be symmetric");
    CoefficientField f;
    f.dim = static_cast<int>(b.size());
    f.q = [q](const Vec&) { return q; };
    f.b = [b](const Vec&) { return b; };
    f.c = std::move(c);
    f.q_constant = q;
    f.b_constant = b;
    f.sup.q = q.cwiseAbs();
    f.sup.b = b.cwiseAbs();
    f.sup.trace_q = std::abs(q.trace());
    f.sup.b_norm = b.norm();
    return f;
}

double FiniteActivityKernel::support_radius() const {
    if (!atomic()) return ball_radius;
    double r = 0.0;
    for (const auto& a : atoms) r = std::max(r, a.y.norm());
    return r;
}

FiniteActivityKernel FiniteActivityKernel::atomic_law(double intensity, std::vector<Atom> atoms) {
    if (atoms.empty()) throw ContractViolation("atomic law needs at least one atom");
    double total = 0.0;
    for (const auto& a : atoms) {
        if (a.prob < 0.0) throw ContractViolation("atom probability must be non-negative");
        total += a.prob;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ContractViolation("atom probabilities must sum to 1");
    FiniteActivityKernel k;
    k.intensity = [intensity](const Vec&) { return intensity; };
    k.intensity_bound = intensity;
    k.intensity_constant = intensity;
    k.atoms = std::move(atoms);
    return k;
}

FiniteActivityKernel FiniteActivityKernel::uniform_ball(double intensity, double radius) {
    if (radius <= 0.0) throw ContractViolation("uniform jump radius must be positive");
    FiniteActivityKernel k;
    k.intensity = [intensity](const Vec&) { return intensity; };
    k.intensity_bound = intensity;
    k.intensity_constant = intensity;
    k.ball_radius = radius;
    return k;
}

double unit_sphere_area(int dim) {
    switch (dim) {
        case 1: return 2.0;
        case 2: return 2.0 * std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi;
        default: throw ContractViolation("dimension must be 1, 2 or 3");
    }
}

double kernel_n_star(const LevyKernelSpec& kernel, int dim) {
    return std::visit(
        overloaded{
            [](const ZeroKernel&) { return 0.0; },
            [dim](const FiniteActivityKernel& k) {
                if (k.atomic()) {
                    double s = 0.0;
                    for (const auto& a : k.atoms) s += a.prob * std::min(1.0, a.y.squaredNorm());
                    return k.intensity_bound * s;
                }
                // E min(1,|Y|²) for Y uniform on B(0,ρ)
                const double rho = k.ball_radius;
                const double m = std::min(1.0, rho);
                const double inner = dim / (dim + 2.0) * std::pow(m, dim + 2) / std::pow(rho, dim);
                const double outer = 1.0 - std::pow(m / rho, dim);
                return k.intensity_bound * (inner + outer);
            },
            [dim](const TruncatedStableKernel& k) {
                const double s = k.index;
                const double m = std::min(1.0, k.truncation);
                double v = std::pow(m, 2.0 - s) / (2.0 - s);
                if (k.truncation > 1.0) v += (1.0 - std::pow(k.truncation, -s)) / s;
                return k.scale * unit_sphere_area(dim) * v;
            }},
        kernel);
}

double kernel_total_mass(const LevyKernelSpec& kernel, int dim) {
    return std::visit(
        overloaded{[](const ZeroKernel&) { return 0.0; },
                   [](const FiniteActivityKernel& k) { return k.intensity_bound; },
                   [dim](const TruncatedStableKernel& k) {
                       const double s = k.index;
                       return k.scale * unit_sphere_area(dim) *
                              (std::pow(k.inner_cutoff, -s) - std::pow(k.truncation, -s)) / s;
                   }},
        kernel);
}

double kernel_small_ball_mass(const LevyKernelSpec& kernel, int dim, double r) {
    return std::visit(
        overloaded{[](const ZeroKernel&) { return 0.0; },
                   [dim, r](const FiniteActivityKernel& k) {
                       if (k.atomic()) {
                           double s = 0.0;
                           for (const auto& a : k.atoms)
                               if (a.y.norm() < r) s += a.prob;
                           return k.intensity_bound * s;
                       }
                       return k.intensity_bound * std::min(1.0, std::pow(r / k.ball_radius, dim));
                   },
                   [dim, r](const TruncatedStableKernel& k) {
                       if (r <= k.inner_cutoff) return 0.0;
                       const double top = std::min(r, k.truncation);
                       const double s = k.index;
                       return k.scale * unit_sphere_area(dim) *
                              (std::pow(k.inner_cutoff, -s) - std::pow(top, -s)) / s;
                   }},
        kernel);
}

double kernel_support_radius(const LevyKernelSpec& kernel) {
    return std::visit(overloaded{[](const ZeroKernel&) { return 0.0; },
                                 [](const FiniteActivityKernel& k) { return k.support_radius(); },
                                 [](const TruncatedStableKernel& k) { return k.truncation; }},
                      kernel);
}

Vec kernel_compensator(const LevyKernelSpec& kernel, int dim, const Vec& x) {
    Vec out = Vec::Zero(dim);
    if (const auto* k = std::get_if<FiniteActivityKernel>(&kernel); k && k->atomic()) {
        const double rate = k->rate(x);
        for (const auto& a : k->atoms) out += rate * a.prob * a.y / (1.0 + a.y.squaredNorm());
    }
    // uniform-ball and truncated-stable laws are symmetric
    return out;
}

Mat kernel_small_jump_covariance(const LevyKernelSpec& kernel, int dim) {
    Mat cov = Mat::Zero(dim, dim);
    if (const auto* k = std::get_if<TruncatedStableKernel>(&kernel)) {
        const double s = k->index;
        const double v = k->scale * unit_sphere_area(dim) / dim *
                         std::pow(k->inner_cutoff, 2.0 - s) / (2.0 - s);
        cov.diagonal().setConstant(v);
    }
    return cov;
}

bool kernel_is_zero(const LevyKernelSpec& kernel) {
    if (std::holds_alternative<ZeroKernel>(kernel)) return true;
    if (const auto* k = std::get_if<FiniteActivityKernel>(&kernel)) return k->intensity_bound == 0.0;
    return std::get<TruncatedStableKernel>(kernel).scale == 0.0;
}

std::vector<WeightedJump> kernel_jumps(const LevyKernelSpec& kernel, int dim, const Vec& x,
                                       int radial_panels, int angular_nodes) {
    std::vector<WeightedJump> jumps;
    std::vector<Vec> dirs;
    std::vector<double> dir_w;
    std::visit(
        overloaded{
            [](const ZeroKernel&) {},
            [&](const FiniteActivityKernel& k) {
                const double rate = k.rate(x);
                if (k.atomic()) {
                    for (const auto& a : k.atoms) jumps.push_back({a.y, rate * a.prob});
                    return;
                }
                const double density = rate / (unit_ball_volume(dim) * std::pow(k.ball_radius, dim));
                const auto radial = detail::gauss_panels(0.0, k.ball_radius, radial_panels);
                sphere_rule(dim, angular_nodes, dirs, dir_w);
                for (std::size_t i = 0; i < radial.nodes.size(); ++i) {
                    const double r = radial.nodes[i];
                    const double wr = radial.weights[i] * std::pow(r, dim - 1) * density;
                    for (std::size_t j = 0; j < dirs.size(); ++j)
                        jumps.push_back({r * dirs[j], wr * dir_w[j]});
                }
            },
            [&](const TruncatedStableKernel& k) {
                // s = log r turns r^{-1-σ} dr into r^{-σ} ds
                const auto radial = detail::gauss_panels(std::log(k.inner_cutoff),
                                                         std::log(k.truncation), radial_panels);
                sphere_rule(dim, angular_nodes, dirs, dir_w);
                for (std::size_t i = 0; i < radial.nodes.size(); ++i) {
                    const double r = std::exp(radial.nodes[i]);
                    const double wr = radial.weights[i] * k.scale * std::pow(r, -k.index);
                    for (std::size_t j = 0; j < dirs.size(); ++j)
                        jumps.push_back({r * dirs[j], wr * dir_w[j]});
                }
            }},
        kernel);
    return jumps;
}

Mat OperatorSpec::diffusion(const Vec& x) const {
    Mat q = coeffs.diffusion(x);
    if (std::holds_alternative<TruncatedStableKernel>(kernel))
        q += kernel_small_jump_covariance(kernel, dim());
    return q;
}

OperatorSpec OperatorSpec::with_killing(KillingRate c) const {
    OperatorSpec out = *this;
    out.coeffs.c = std::move(c);
    return out;
}

OperatorSpec OperatorSpec::scaled(double s) const {
    if (s <= 0.0) throw ContractViolation("operator scale must be positive");
    OperatorSpec out = *this;
    auto& cf = out.coeffs;
    auto q = coeffs.q;
    auto b = coeffs.b;
    cf.q = [q, s](const Vec& x) { return Mat(s * q(x)); };
    cf.b = [b, s](const Vec& x) { return Vec(s * b(x)); };
    if (cf.q_constant) cf.q_constant = Mat(s * *cf.q_constant);
    if (cf.b_constant) cf.b_constant = Vec(s * *cf.b_constant);
    cf.sup.q *= s;
    cf.sup.b *= s;
    cf.sup.trace_q *= s;
    cf.sup.b_norm *= s;
    std::visit(overloaded{[](ZeroKernel&) {},
                          [s](FiniteActivityKernel& k) {
                              auto f = k.intensity;
                              k.intensity = [f, s](const Vec& x) { return s * f(x); };
                              k.intensity_bound *= s;
                              if (k.intensity_constant) *k.intensity_constant *= s;
                          },
                          [s](TruncatedStableKernel& k) { k.scale *= s; }},
               out.kernel);
    return out;
}

double OperatorSpec::m_a() const {
    return coeffs.sup.q.sum() + coeffs.sup.b.sum() + n_star();
}

double apply_local(const OperatorSpec& op, const SmoothField& u, const Vec& x) {
    if (!u.hessian) throw ContractViolation("apply_local needs a Hessian oracle");
    if (!u.gradient) throw ContractViolation("apply_local needs a gradient oracle");
    const Mat q = op.diffusion(x);
    const Mat h = u.hessian(x);
    return 0.5 * q.cwiseProduct(h).sum() + op.drift(x).dot(u.gradient(x));
}

namespace {

double sum_jumps(const std::vector<WeightedJump>& jumps, const SmoothField& u, const Vec& x) {
    const double ux = u.value(x);
    Vec comp = Vec::Zero(x.size());
    double scale = 0.0;
    double total = 0.0;
    for (const auto& j : jumps) {
        total += j.weight * (u.value(x + j.y) - ux);
        comp += j.weight * j.y / (1.0 + j.y.squaredNorm());
        scale += j.weight * j.y.norm();
    }
    if (u.gradient) {
        total -= comp.dot(u.gradient(x));
    } else if (comp.norm() > 1e-12 * std::max(1.0, scale)) {
        throw ContractViolation("kernel has a nonzero compensator; gradient oracle required");
    }
    return total;
}

}  // namespace

NonlocalResult apply_nonlocal_detailed(const OperatorSpec& op, const SmoothField& u,
                                       const Vec& x, const QuadratureConfig& quad) {
    NonlocalResult res;
    if (kernel_is_zero(op.kernel)) return res;
    const auto* fa = std::get_if<FiniteActivityKernel>(&op.kernel);
    if (fa && fa->atomic()) {
        res.value = sum_jumps(kernel_jumps(op.kernel, op.dim(), x, 1, 1), u, x);
        return res;
    }
    if (quad.radial_panels < 1 || quad.angular_nodes < 1)
        throw ContractViolation("quadrature resolution must be positive");
    int panels = quad.radial_panels;
    int angular = quad.angular_nodes;
    double prev = sum_jumps(kernel_jumps(op.kernel, op.dim(), x, panels, angular), u, x);
    double diff = std::numeric_limits<double>::infinity();
    for (int level = 1; level <= quad.max_levels; ++level) {
        panels *= 2;
        angular *= 2;
        const double cur = sum_jumps(kernel_jumps(op.kernel, op.dim(), x, panels, angular), u, x);
        diff = std::abs(cur - prev);
        if (diff <= quad.rel_tol * std::abs(cur) + quad.abs_tol) {
            res.value = cur;
            res.achieved_tol = diff;
            res.levels = level;
            return res;
        }
        prev = cur;
    }
    std::ostringstream msg;
    msg << "nonlocal quadrature did not converge; last level change " << diff;
    throw NumericalError(msg.str(), diff);
}

double apply_nonlocal(const OperatorSpec& op, const SmoothField& u, const Vec& x,
                      const QuadratureConfig& quad) {
    return apply_nonlocal_detailed(op, u, x, quad).value;
}

double apply(const OperatorSpec& op, const SmoothField& u, const Vec& x,
             const QuadratureConfig& quad) {
    return apply_local(op, u, x) + apply_nonlocal(op, u, x, quad);
}

std::vector<Vec> box_lattice(const BoxRegion& region, int per_axis) {
    const int d = static_cast<int>(region.lo.size());
    if (per_axis < 1) throw ContractViolation("lattice needs at least one point per axis");
    std::vector<Vec> pts;
    std::vector<int> idx(d, 0);
    while (true) {
        Vec p(d);
        for (int k = 0; k < d; ++k) {
            const double t = per_axis == 1 ? 0.5 : static_cast<double>(idx[k]) / (per_axis - 1);
            p(k) = region.lo(k) + t * (region.hi(k) - region.lo(k));
        }
        pts.push_back(p);
        int k = 0;
        while (k < d && ++idx[k] == per_axis) idx[k++] = 0;
        if (k == d) break;
    }
    return pts;
}

OperatorBounds operator_bounds(const OperatorSpec& op, const std::vector<Vec>& samples) {
    if (samples.empty()) throw ContractViolation("compact set K has no samples");
    double lambda = std::numeric_limits<double>::infinity();
    for (const auto& x : samples) {
        const Mat q = op.coeffs.diffusion(x);
        if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw ContractViolation("Q(x) is not symmetric at a sampled point");
        Eigen::SelfAdjointEigenSolver<Mat> es(q, Eigen::EigenvaluesOnly);
        lambda = std::min(lambda, es.eigenvalues().minCoeff());
    }
    if (lambda <= 0.0) {
        std::ostringstream msg;
        msg << "ellipticity violated: sampled minimum eigenvalue " << lambda;
        throw EllipticityError(msg.str());
    }
    OperatorBounds b;
    b.lambda = lambda;
    b.n_star = op.n_star();
    b.m_a = op.m_a();
    b.trace_q = op.coeffs.sup.trace_q;
    b.b_norm = op.coeffs.sup.b_norm;
    b.c_sup = op.c().upper;
    b.n_total = kernel_total_mass(op.kernel, op.dim());
    b.samples = samples.size();
    return b;
}

OperatorBounds operator_bounds(const OperatorSpec& op, const BoxRegion& region, int per_axis) {
    return operator_bounds(op, box_lattice(region, per_axis));
}

namespace {

double mean_oscillation(const std::function<double(const Vec&)>& f, const Vec& center,
                        double radius, int cells) {
    const int d = static_cast<int>(center.size());
    const double width = 2.0 * radius / cells;
    std::vector<double> vals;
    std::vector<int> idx(d, 0);
    while (true) {
        Vec p(d);
        for (int k = 0; k < d; ++k) p(k) = center(k) - radius + (idx[k] + 0.5) * width;
        if ((p - center).norm() < radius) vals.push_back(f(p));
        int k = 0;
        while (k < d && ++idx[k] == cells) idx[k++] = 0;
        if (k == d) break;
    }
    if (vals.empty()) return 0.0;
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double osc = 0.0;
    for (double v : vals) osc += std::abs(v - mean);
    return osc / static_cast<double>(vals.size());
}

double vmo_eta(const std::function<double(const Vec&)>& f, double r, const BoxRegion& region,
               const VmoConfig& cfg, int cells) {
    double eta = 0.0;
    for (const auto& c : box_lattice(region, cfg.centers_per_axis))
        for (int k = 1; k <= cfg.radii; ++k)
            eta = std::max(eta, mean_oscillation(f, c, r * k / cfg.radii, cells));
    return eta;
}

}  // namespace

VmoResult vmo_modulus(const std::function<double(const Vec&)>& f, double r,
                      const BoxRegion& region, const VmoConfig& cfg) {
    if (r <= 0.0) throw ContractViolation("VMO radius must be positive");
    VmoResult res;
    res.eta = vmo_eta(f, r, region, cfg, cfg.cells_per_axis);
    const double coarse = vmo_eta(f, r, region, cfg, std::max(2, cfg.cells_per_axis / 2));
    res.sampling_error = std::abs(res.eta - coarse);
    return res;
}

}  // namespace hopflab
