#include "hopflab/mc.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

namespace hopflab {

namespace {

constexpr double kZ95 = 1.959963984540054;

using Engine = std::mt19937_64;

Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Engine(seq);
}

Mat sqrt_psd(const Mat& q, const Vec& x) {
    Eigen::SelfAdjointEigenSolver<Mat> es(q);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < -1e-12 * scale) {
        std::ostringstream msg;
        msg << "diffusion matrix is not positive semidefinite at x = " << x.transpose();
        throw EllipticityError(msg.str());
    }
    const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

/// Per-operator data shared by every path.
struct Stepper {
    const OperatorSpec& op;
    const DomainSpec& dom;
    const KillingRate& c;
    int d;
    std::optional<Mat> sigma;  ///< constant square root of Q
    std::optional<Vec> drift;  ///< constant b - compensator
    Vec unit_compensator;      ///< atomic kernels: Σ p y/(1+|y|²)
    double jump_bound = 0.0;   ///< thinning rate
    std::vector<double> atom_cdf;

    Stepper(const OperatorSpec& o, const DomainSpec& D, const KillingRate& k)
        : op(o), dom(D), c(k), d(o.dim()), unit_compensator(Vec::Zero(o.dim())) {
        if (dom.dim() != d) throw ContractViolation("domain and operator dimensions differ");
        if (const auto* fa = std::get_if<FiniteActivityKernel>(&op.kernel)) {
            jump_bound = fa->intensity_bound;
            double acc = 0.0;
            for (const auto& a : fa->atoms) {
                unit_compensator += a.prob * a.y / (1.0 + a.y.squaredNorm());
                acc += a.prob;
                atom_cdf.push_back(acc);
            }
        } else if (std::holds_alternative<TruncatedStableKernel>(op.kernel)) {
            jump_bound = kernel_total_mass(op.kernel, d);
        }
        const bool const_rate = jump_rate_constant();
        if (op.coeffs.q_constant) sigma = sqrt_psd(op.diffusion(Vec::Zero(d)), Vec::Zero(d));
        if (op.coeffs.b_constant && const_rate)
            drift = Vec(*op.coeffs.b_constant - rate(Vec::Zero(d)) * unit_compensator);
    }

    bool jump_rate_constant() const {
        const auto* fa = std::get_if<FiniteActivityKernel>(&op.kernel);
        return !fa || fa->intensity_constant.has_value();
    }

    double rate(const Vec& x) const {
        if (const auto* fa = std::get_if<FiniteActivityKernel>(&op.kernel)) return fa->rate(x);
        return jump_bound;
    }

    Vec drift_at(const Vec& x) const { return drift ? *drift : Vec(op.drift(x) - rate(x) * unit_compensator); }
    Mat sigma_at(const Vec& x) const { return sigma ? *sigma : sqrt_psd(op.diffusion(x), x); }

    template <class U>
    Vec sample_jump(U& uniform, Engine& eng, boost::random::normal_distribution<double>& normal) const {
        if (const auto* fa = std::get_if<FiniteActivityKernel>(&op.kernel)) {
            if (fa->atomic()) {
                const double u = uniform(eng);
                for (std::size_t i = 0; i < atom_cdf.size(); ++i)
                    if (u < atom_cdf[i]) return fa->atoms[i].y;
                return fa->atoms.back().y;
            }
            return random_direction(eng, normal) * fa->ball_radius * std::pow(uniform(eng), 1.0 / d);
        }
        const auto& ts = std::get<TruncatedStableKernel>(op.kernel);
        const double s = ts.index;
        const double lo = std::pow(ts.inner_cutoff, -s), hi = std::pow(ts.truncation, -s);
        const double r = std::pow(lo - uniform(eng) * (lo - hi), -1.0 / s);
        return random_direction(eng, normal) * r;
    }

    Vec random_direction(Engine& eng, boost::random::normal_distribution<double>& normal) const {
        Vec z(d);
        do {
            for (int k = 0; k < d; ++k) z(k) = normal(eng);
        } while (z.squaredNorm() == 0.0);
        return z / z.norm();
    }
};

struct PathExtras {
    const std::function<double(const Vec&)>* f = nullptr;
    double fk_integral = 0.0;
};

PathOutcome run_path(const Stepper& st, const Vec& x0, const PathConfig& cfg, double T,
                     std::uint64_t path_index, PathExtras* extras) {
    if (x0.size() != st.d) throw ContractViolation("start point has wrong dimension");
    if (!st.dom.contains(x0)) throw ContractViolation("start point must lie in D");
    const std::uint64_t stream = cfg.antithetic ? path_index / 2 : path_index;
    const double sign = cfg.antithetic && (path_index % 2 == 1) ? -1.0 : 1.0;
    Engine eng = make_engine(cfg.seed, stream);
    boost::random::normal_distribution<double> normal;
    boost::random::uniform_01<double> uniform;
    auto exponential = [&]() { return -std::log1p(-uniform(eng)); };

    const auto* f = extras ? extras->f : nullptr;
    auto killing = [&](const Vec& x) { return st.c.constant ? *st.c.constant : st.c.fn(x); };

    PathOutcome out;
    Vec x = x0;
    double t = 0.0;
    double c_prev = killing(x);
    double e_prev = 1.0;
    double f_prev = f ? (*f)(x) : 0.0;
    double next_jump = st.jump_bound > 0.0 ? exponential() / st.jump_bound
                                            : std::numeric_limits<double>::infinity();
    // constant-coefficient fast path: the full-step increment is fixed
    const bool fixed = st.sigma && st.drift;
    const Vec mu = fixed ? Vec(*st.drift * cfg.dt) : Vec();
    const Mat S = fixed ? Mat(*st.sigma * std::sqrt(cfg.dt)) : Mat();
    Vec z(st.d);
    Vec x_new(st.d);
    bool exited = false;
    while (!exited) {
        if (t >= T) {
            out.hit_horizon = true;
            break;
        }
        const double step = std::min(cfg.dt, T - t);
        for (int k = 0; k < st.d; ++k) z(k) = sign * normal(eng);
        if (fixed && step == cfg.dt)
            x_new.noalias() = x + mu + S * z;
        else
            x_new = x + st.drift_at(x) * step + st.sigma_at(x) * z * std::sqrt(step);
        double t_new = t + step;
        exited = !st.dom.contains(x_new);
        if (!exited) {
            while (next_jump <= t_new) {
                const double s = next_jump;
                next_jump += exponential() / st.jump_bound;
                if (uniform(eng) * st.jump_bound >= st.rate(x_new)) continue;
                x_new += st.sample_jump(uniform, eng, normal);
                if (!st.dom.contains(x_new)) {
                    exited = true;
                    t_new = std::max(s, t);
                    break;
                }
            }
        }
        const double c_new = killing(x_new);
        out.c_integral += 0.5 * (c_prev + c_new) * (t_new - t);
        if (f) {
            const double e_new = std::exp(-out.c_integral);
            const double f_new = exited ? 0.0 : (*f)(x_new);
            extras->fk_integral += 0.5 * (e_prev * f_prev + e_new * f_new) * (t_new - t);
            e_prev = e_new;
            f_prev = f_new;
        }
        c_prev = c_new;
        x.swap(x_new);
        t = t_new;
        ++out.steps;
    }
    out.tau = std::min(t, T);
    out.x_tau = x;
    out.overshoot = st.dom.signed_distance(x);
    return out;
}

double resolve_horizon(const OperatorSpec& op, const DomainSpec& dom, const PathConfig& cfg) {
    cfg.validate();
    return cfg.T_max > 0.0 ? cfg.T_max : default_horizon(op, dom);
}

/// Mean and CI over path values; horizon paths (and their antithetic partners) excluded.
Estimate summarize(const std::vector<double>& values, const std::vector<PathOutcome>& paths,
                   const PathConfig& cfg) {
    Estimate est;
    est.n_paths = values.size();
    est.dt = cfg.dt;
    std::size_t hits = 0;
    for (const auto& p : paths) hits += p.hit_horizon ? 1 : 0;
    est.horizon_fraction = static_cast<double>(hits) / static_cast<double>(values.size());
    est.bias_flag = hits > 0;
    std::vector<double> samples;
    const std::size_t group = cfg.antithetic ? 2 : 1;
    for (std::size_t i = 0; i + group <= values.size(); i += group) {
        bool ok = true;
        double s = 0.0;
        for (std::size_t j = i; j < i + group; ++j) {
            ok = ok && !paths[j].hit_horizon;
            s += values[j];
        }
        if (ok) samples.push_back(s / static_cast<double>(group));
    }
    est.n_used = samples.size() * group;
    if (samples.empty()) {
        est.mean = std::numeric_limits<double>::quiet_NaN();
        est.ci = std::numeric_limits<double>::infinity();
        return est;
    }
    const double n = static_cast<double>(samples.size());
    est.mean = pairwise_sum(samples.data(), samples.size()) / n;
    std::vector<double> sq(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) sq[i] = (samples[i] - est.mean) * (samples[i] - est.mean);
    const double var = samples.size() > 1 ? pairwise_sum(sq.data(), sq.size()) / (n - 1.0) : 0.0;
    est.std_error = std::sqrt(var / n);
    est.ci = kZ95 * est.std_error;
    return est;
}

}  // namespace

void PathConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("mc.dt must be positive");
    if (n_paths < 1) throw ConfigError("mc.n_paths must be at least 1");
    if (!(T_max >= 0.0)) throw ConfigError("mc.T_max must be positive (0 selects the default)");
    if (antithetic && n_paths % 2 != 0) throw ConfigError("mc.n_paths must be even with antithetic pairing");
}

double default_horizon(const OperatorSpec& op, const DomainSpec& dom) {
    const BoxRegion bb = dom.bounding_box();
    const double lambda = operator_bounds(op, bb, 5).lambda;
    if (!(lambda > 0.0)) throw ConfigError("degenerate diffusion: set mc.T_max explicitly");
    const double diam = (bb.hi - bb.lo).norm();
    return 50.0 * diam * diam / lambda;
}

PathOutcome simulate_path(const OperatorSpec& op, const DomainSpec& dom, const Vec& x0,
                          const PathConfig& cfg, std::uint64_t path_index) {
    const double T = resolve_horizon(op, dom, cfg);
    const Stepper st(op, dom, op.c());
    return run_path(st, x0, cfg, T, path_index, nullptr);
}

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

GaugeEstimate estimate_gauge(const OperatorSpec& op, const KillingRate& c, const DomainSpec& dom,
                             const Vec& x0, const PathConfig& cfg) {
    const double T = resolve_horizon(op, dom, cfg);
    const Stepper st(op, dom, c);
    std::vector<double> values(cfg.n_paths);
    std::vector<PathOutcome> paths(cfg.n_paths);
    for (std::size_t i = 0; i < cfg.n_paths; ++i) {
        paths[i] = run_path(st, x0, cfg, T, i, nullptr);
        values[i] = std::exp(-paths[i].c_integral);
    }
    GaugeEstimate g;
    g.v = summarize(values, paths, cfg);
    g.w = 1.0 - g.v.mean;
    if (cfg.record_paths) g.v.paths = std::move(paths);
    return g;
}

Estimate estimate_feynman_kac(const OperatorSpec& op, const KillingRate& c, const DomainSpec& dom,
                              const Vec& x0, const std::function<double(const Vec&)>& f,
                              const std::function<double(const Vec&)>& g, const PathConfig& cfg) {
    const double T = resolve_horizon(op, dom, cfg);
    const Stepper st(op, dom, c);
    std::vector<double> values(cfg.n_paths);
    std::vector<PathOutcome> paths(cfg.n_paths);
    for (std::size_t i = 0; i < cfg.n_paths; ++i) {
        PathExtras extras;
        extras.f = f ? &f : nullptr;
        paths[i] = run_path(st, x0, cfg, T, i, &extras);
        const double terminal = g ? std::exp(-paths[i].c_integral) * g(paths[i].x_tau) : 0.0;
        values[i] = terminal + extras.fk_integral;
    }
    Estimate est = summarize(values, paths, cfg);
    if (cfg.record_paths) est.paths = std::move(paths);
    return est;
}

std::vector<SurvivalPoint> estimate_survival(const OperatorSpec& op, const DomainSpec& dom,
                                             const Vec& x0, const std::vector<double>& t_grid,
                                             const PathConfig& cfg) {
    double T = resolve_horizon(op, dom, cfg);
    for (double t : t_grid) {
        if (t < 0.0) throw ContractViolation("survival times must be non-negative");
        T = std::max(T, t);
    }
    const Stepper st(op, dom, KillingRate::zero());
    std::vector<double> taus(cfg.n_paths);
    std::vector<bool> horizon(cfg.n_paths);
    for (std::size_t i = 0; i < cfg.n_paths; ++i) {
        const auto p = run_path(st, x0, cfg, T, i, nullptr);
        taus[i] = p.tau;
        horizon[i] = p.hit_horizon;
    }
    std::vector<SurvivalPoint> out;
    const double n = static_cast<double>(cfg.n_paths);
    for (double t : t_grid) {
        std::vector<double> alive(cfg.n_paths);
        for (std::size_t i = 0; i < cfg.n_paths; ++i) alive[i] = (horizon[i] || taus[i] > t) ? 1.0 : 0.0;
        const double p = pairwise_sum(alive.data(), alive.size()) / n;
        out.push_back({t, p, kZ95 * std::sqrt(p * (1.0 - p) / n)});
    }
    return out;
}

}  // namespace hopflab
