#pragma once

#include "hopflab/geometry.hpp"
#include "hopflab/operator.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace hopflab {

struct PathConfig {
    double dt = 1e-3;
    double T_max = 0.0;  ///< 0: use default_horizon
    std::size_t n_paths = 1000;
    std::uint64_t seed = 0;
    bool antithetic = false;  ///< paths 2k and 2k+1 share a stream with negated Gaussian increments
    bool record_paths = false;

    void validate() const;
};

struct PathOutcome {
    double tau = 0.0;  ///< exit time, or T_max when hit_horizon
    Vec x_tau;
    double c_integral = 0.0;  ///< trapezoid ∫₀^τ c(X_s) ds
    bool hit_horizon = false;
    double overshoot = 0.0;  ///< signed distance of X_tau to ∂D (> 0 outside)
    std::size_t steps = 0;
};

/// 50 (diam D)² / λ, λ the sampled ellipticity on the bounding box of D.
/// Throws ConfigError when λ = 0 (an explicit T_max is needed then).
double default_horizon(const OperatorSpec& op, const DomainSpec& dom);

/// One Euler path of the jump diffusion started at x0, killed on exit from D.
PathOutcome simulate_path(const OperatorSpec& op, const DomainSpec& dom, const Vec& x0,
                          const PathConfig& cfg, std::uint64_t path_index);

/// Sum with pairwise reduction (blocks of 8).
double pairwise_sum(const double* x, std::size_t n);

struct Estimate {
    double mean = 0.0;
    double ci = 0.0;  ///< 95% half-width, normal approximation
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_used = 0;  ///< paths that exited before the horizon
    double horizon_fraction = 0.0;
    bool bias_flag = false;  ///< some path hit the horizon
    double dt = 0.0;
    std::vector<PathOutcome> paths;  ///< filled when cfg.record_paths
};

struct GaugeEstimate {
    Estimate v;  ///< E exp(-∫₀^τ c)
    double w = 0.0;  ///< 1 - v, same CI
};

GaugeEstimate estimate_gauge(const OperatorSpec& op, const KillingRate& c, const DomainSpec& dom,
                             const Vec& x0, const PathConfig& cfg);

/// E[e_c(τ) g(X_τ) + ∫₀^τ e_c(s) f(X_s) ds], f taken as 0 outside D.
Estimate estimate_feynman_kac(const OperatorSpec& op, const KillingRate& c, const DomainSpec& dom,
                              const Vec& x0, const std::function<double(const Vec&)>& f,
                              const std::function<double(const Vec&)>& g, const PathConfig& cfg);

struct SurvivalPoint {
    double t = 0.0;
    double p = 0.0;
    double ci = 0.0;
};

/// Empirical P(τ_D > t); the horizon is raised to max(t_grid) when needed.
std::vector<SurvivalPoint> estimate_survival(const OperatorSpec& op, const DomainSpec& dom,
                                             const Vec& x0, const std::vector<double>& t_grid,
                                             const PathConfig& cfg);

}  // namespace hopflab
