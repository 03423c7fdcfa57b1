#pragma once

#include "hopflab/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace hopflab {

/// Scalar field with optional derivative oracles.
///
/// apply_local needs gradient and Hessian; apply_nonlocal needs the gradient
/// only when the kernel has a nonzero compensator.
struct SmoothField {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    std::function<Mat(const Vec&)> hessian;

    double operator()(const Vec& x) const { return value(x); }
};

/// Killing rate c >= 0 with recorded bounds.
///
/// `lower` is a lower bound of c over the domain of interest and `upper`
/// the sup norm; both are supplied, never inferred from samples.
struct KillingRate {
    std::function<double(const Vec&)> fn;
    double upper = 0.0;
    double lower = 0.0;
    std::optional<double> constant;

    double operator()(const Vec& x) const { return constant ? *constant : fn(x); }
    bool identically_zero() const { return constant && *constant == 0.0; }

    static KillingRate zero();
    static KillingRate uniform(double value);
    /// value on the open ball B(center, radius), 0 elsewhere.
    static KillingRate ball_indicator(const Vec& center, double radius, double value);
};

/// Recorded sup norms of the coefficients.
struct SupNorms {
    Mat q;                 ///< entrywise ‖q_ij‖∞
    Vec b;                 ///< entrywise ‖b_i‖∞
    double trace_q = 0.0;  ///< ‖Tr Q‖∞
    double b_norm = 0.0;   ///< sup_x |b(x)| (Euclidean)
};

struct CoefficientField {
    int dim = 1;
    std::function<Mat(const Vec&)> q;
    std::function<Vec(const Vec&)> b;
    KillingRate c = KillingRate::zero();
    SupNorms sup;
    std::optional<Mat> q_constant;
    std::optional<Vec> b_constant;

    Mat diffusion(const Vec& x) const { return q_constant ? *q_constant : q(x); }
    Vec drift(const Vec& x) const { return b_constant ? *b_constant : b(x); }

    /// Constant Q and b; sup norms recorded exactly.
    static CoefficientField constant(const Mat& q, const Vec& b,
                                     KillingRate c = KillingRate::zero());
};

/// Displacement atom of a finite-activity kernel: jump by `y` with probability `prob`.
struct Atom {
    Vec y;
    double prob = 1.0;
};

struct ZeroKernel {};

/// N(x, dy) = intensity(x) * nu(dy), nu a probability law.
///
/// nu is either a finite list of atoms or, when `atoms` is empty, the uniform
/// density on the ball B(0, ball_radius).
struct FiniteActivityKernel {
    std::function<double(const Vec&)> intensity;
    double intensity_bound = 0.0;
    std::optional<double> intensity_constant;
    std::vector<Atom> atoms;
    double ball_radius = 0.0;

    double rate(const Vec& x) const {
        return intensity_constant ? *intensity_constant : intensity(x);
    }
    bool atomic() const { return !atoms.empty(); }
    double support_radius() const;

    static FiniteActivityKernel atomic_law(double intensity, std::vector<Atom> atoms);
    static FiniteActivityKernel uniform_ball(double intensity, double radius);
};

/// Density scale * |y|^{-d-index} on 0 < |y| <= truncation. Jumps below
/// inner_cutoff are replaced by a Gaussian correction added to Q.
struct TruncatedStableKernel {
    double index = 1.0;
    double scale = 1.0;
    double truncation = 1.0;
    double inner_cutoff = 0.1;
};

using LevyKernelSpec = std::variant<ZeroKernel, FiniteActivityKernel, TruncatedStableKernel>;

/// Surface area of the unit sphere in R^d (2 for d = 1).
double unit_sphere_area(int dim);

/// sup_x ∫ min(1,|y|²) N(x,dy).
double kernel_n_star(const LevyKernelSpec& kernel, int dim);
/// sup_x N(x, R^d); for TruncatedStable the mass of the simulated part |y| > inner_cutoff.
double kernel_total_mass(const LevyKernelSpec& kernel, int dim);
/// n(r) = sup_x N(x, B(0,r)); TruncatedStable uses the cutoff-truncated kernel.
double kernel_small_ball_mass(const LevyKernelSpec& kernel, int dim, double r);
/// Largest jump size; 0 for Zero, +inf never occurs for the supported families.
double kernel_support_radius(const LevyKernelSpec& kernel);
/// ∫ y/(1+|y|²) N(x,dy) over the simulated jumps.
Vec kernel_compensator(const LevyKernelSpec& kernel, int dim, const Vec& x);
/// Covariance of the removed small jumps (zero unless TruncatedStable).
Mat kernel_small_jump_covariance(const LevyKernelSpec& kernel, int dim);
bool kernel_is_zero(const LevyKernelSpec& kernel);

/// Polar quadrature control for density kernels.
struct QuadratureConfig {
    int radial_panels = 2;    ///< 8-point Gauss-Legendre panels in the radial variable
    int angular_nodes = 16;   ///< midpoint nodes in the periodic angle (d >= 2)
    int max_levels = 6;
    double rel_tol = 1e-6;
    double abs_tol = 1e-12;
};

/// Weighted jump y with mass `weight` (already multiplied by the intensity).
struct WeightedJump {
    Vec y;
    double weight = 0.0;
};

/// Discrete representation of N(x, ·) restricted to the simulated jumps.
/// Exact for atomic kernels, one quadrature level for densities.
std::vector<WeightedJump> kernel_jumps(const LevyKernelSpec& kernel, int dim, const Vec& x,
                                       int radial_panels, int angular_nodes);

struct OperatorSpec {
    CoefficientField coeffs;
    LevyKernelSpec kernel = ZeroKernel{};
    std::string name;

    int dim() const { return coeffs.dim; }
    /// Q(x) plus the recorded small-jump correction.
    Mat diffusion(const Vec& x) const;
    Vec drift(const Vec& x) const { return coeffs.drift(x); }
    double killing(const Vec& x) const { return coeffs.c(x); }
    const KillingRate& c() const { return coeffs.c; }

    OperatorSpec with_killing(KillingRate c) const;
    /// Operator multiplied by s > 0 (Q, b, kernel intensity; c unchanged).
    OperatorSpec scaled(double s) const;

    /// M_A = Σ‖q_ij‖∞ + Σ‖b_i‖∞ + N*.
    double m_a() const;
    double n_star() const { return kernel_n_star(kernel, dim()); }
};

/// ½ Σ q_ij ∂²_ij u + Σ b_i ∂_i u at x (Q includes the small-jump correction).
double apply_local(const OperatorSpec& op, const SmoothField& u, const Vec& x);

struct NonlocalResult {
    double value = 0.0;
    double achieved_tol = 0.0;
    int levels = 0;
};

/// ∫ (u(x+y) - u(x) - y·∇u(x)/(1+|y|²)) N(x,dy).
/// Throws NumericalError when successive refinement levels disagree beyond tolerance.
NonlocalResult apply_nonlocal_detailed(const OperatorSpec& op, const SmoothField& u,
                                       const Vec& x, const QuadratureConfig& quad = {});
double apply_nonlocal(const OperatorSpec& op, const SmoothField& u, const Vec& x,
                      const QuadratureConfig& quad = {});
/// Au(x) = Lu(x) + Su(x).
double apply(const OperatorSpec& op, const SmoothField& u, const Vec& x,
             const QuadratureConfig& quad = {});

struct BoxRegion {
    Vec lo;
    Vec hi;
};

struct OperatorBounds {
    double lambda = 0.0;   ///< sampled minimum eigenvalue of Q on K
    double m_a = 0.0;
    double n_star = 0.0;
    double trace_q = 0.0;
    double b_norm = 0.0;
    double c_sup = 0.0;
    double n_total = 0.0;  ///< ‖N_{R^d}‖∞
    std::size_t samples = 0;
};

/// Structural constants; λ_K sampled over the given points of K.
OperatorBounds operator_bounds(const OperatorSpec& op, const std::vector<Vec>& samples);
/// Same on a lattice with `per_axis` points per axis over the box K.
OperatorBounds operator_bounds(const OperatorSpec& op, const BoxRegion& region, int per_axis);

std::vector<Vec> box_lattice(const BoxRegion& region, int per_axis);

struct VmoConfig {
    int centers_per_axis = 21;
    int radii = 4;
    int cells_per_axis = 64;  ///< quadrature cells across each ball's bounding cube
};

struct VmoResult {
    double eta = 0.0;
    double sampling_error = 0.0;  ///< |eta(cells) - eta(cells/2)|
};

/// Sup over sampled balls of radius <= r (centres in `region`) of the mean oscillation.
VmoResult vmo_modulus(const std::function<double(const Vec&)>& f, double r,
                      const BoxRegion& region, const VmoConfig& cfg = {});

}  // namespace hopflab
