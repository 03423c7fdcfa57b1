#pragma once

#include "hopflab/geometry.hpp"
#include "hopflab/grid.hpp"
#include "hopflab/operator.hpp"

#include <optional>
#include <vector>

namespace hopflab {

/// η(x) = e^{-α|x-ȳ|²} - e^{-αr²}, with α r² = γ* stored together.
struct BarrierParams {
    double alpha = 0.0;
    Vec ybar;
    double r = 0.0;
    double gamma_star = 0.0;
};

double eta(const BarrierParams& p, const Vec& x);
/// η with exact gradient and Hessian oracles.
SmoothField eta_field(const BarrierParams& p);

/// Inputs of the constant selection.
struct ConstantInputs {
    double lambda = 1.0;     ///< ellipticity constant on the closure of V
    double trace_q = 0.0;    ///< ‖Tr Q‖∞
    double b_sup = 0.0;      ///< ‖b‖∞ (Euclidean)
    double n_total = 0.0;    ///< ‖N_{R^d}‖∞
    double c_sup = 0.0;      ///< ‖c‖∞
    std::function<double(double)> n_small;  ///< n(r) = sup_x N(x, B(0,r))

    static ConstantInputs from(const OperatorSpec& op, double lambda);
};

struct BarrierConstants {
    double gamma_star = 0.0;  ///< = C
    double C = 0.0;
    double M = 0.0;
    double alpha0 = 0.0;
    double r0 = 0.0;
    double K = 0.0;
    double lower_bound = 0.0;  ///< value of the bracketed estimate at (M, α0)
    int m_doublings = 0;
    int alpha_doublings = 0;

    /// Params for an interior ball B(ȳ, r), r <= min(r0, 1).
    BarrierParams at(const Vec& ybar, double r) const;
};

/// γ* = (4/λ)(‖Tr Q‖∞ + 3/2 ‖b‖∞).
double barrier_gamma_star(const ConstantInputs& in);

/// Right-hand side of the (A - c)η lower estimate for given (α, M).
double barrier_lower_bound(const ConstantInputs& in, double gamma_star, double alpha, double M);

/// γ* = (4/λ)(‖Tr Q‖∞ + 3/2 ‖b‖∞); M, α0 by doubling until the estimate exceeds K.
BarrierConstants choose_constants(const ConstantInputs& in, double K_target);

struct BarrierSample {
    Vec x;
    double value = 0.0;  ///< (A - c)η(x)
};

struct BarrierVerification {
    double margin = 0.0;  ///< min over samples of (A - c)η
    Vec worst;
    double K = 0.0;
    double tol = 0.0;
    bool pass = false;
    std::vector<BarrierSample> samples;
};

struct BarrierSampling {
    int per_unit_length = 32;  ///< lattice points per unit length (in units of r) per axis
    int quasi_random = 10000;  ///< Sobol points in the bounding cube of V*
    double tol = 1e-9;
};

/// Sample (A - c)η over V*(ȳ; r).
BarrierVerification verify_barrier(const OperatorSpec& op, const BarrierParams& p, double K_target,
                                   const BarrierSampling& sampling = {});

/// ψ = scale (r^{-σ} - s^{-σ}), s = |x - y0| clamped to [r/10, M_out].
struct ExteriorBarrier {
    Vec y0;
    double r = 1.0;
    double sigma = 1.0;
    double scale = 1.0;
    double m_out = 10.0;

    double operator()(const Vec& x) const;
    SmoothField field() const;
};

ExteriorBarrier exterior_barrier(const Vec& x_hat, const Vec& y0, double r, double sigma,
                                 double scale, double m_out);

struct ExteriorVerification {
    double margin = 0.0;  ///< min over samples in D of -Aψ
    Vec worst;
    bool pass = false;
    std::size_t samples = 0;
};
ExteriorVerification verify_exterior_barrier(const OperatorSpec& op, const DomainSpec& dom,
                                             const ExteriorBarrier& psi, int per_axis = 41,
                                             double tol = 1e-9);

struct RhoEntry {
    double r = 0.0;
    double rho = 0.0;
    std::size_t nodes = 0;  ///< interior nodes in D_r (0: D_r empty on the grid)
};
/// ρ_{c,A,D}(r) = inf over grid nodes in D_r of w.
std::vector<RhoEntry> rho_modulus(const Vector& w, const Grid& grid, const DomainSpec& dom,
                                  const std::vector<double>& r_values);

struct ExitProbabilityBound {
    double a = 0.0;         ///< inf over B^c of 1 - ρ
    double sup_neg = 0.0;   ///< sup over B(x̄,r) of (Aρ)^-
    std::vector<double> t_grid;
    std::vector<double> bound;  ///< t sup_neg / a, per t
    double a_star = 0.0;
    double t_star = 0.0;
    bool vacuous = false;
};

/// Upper bound on P(τ_B ≤ t) with ρ = e^{-|x-x̄|²/r²}, and a* for killing lower bound c_lower.
ExitProbabilityBound exit_probability_bound(const OperatorSpec& op, const Vec& xbar, double r,
                                            const std::vector<double>& t_grid, double c_lower,
                                            int per_axis = 41);

}  // namespace hopflab
