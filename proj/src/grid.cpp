#include "hopflab/grid.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace hopflab {

namespace {

constexpr int kPackOffset = 1 << 20;

std::string node_name(const Grid& g, const LatticeIndex& k) {
    std::ostringstream s;
    const Vec p = g.point(k);
    s << "node (";
    for (int a = 0; a < g.dim; ++a) s << (a ? "," : "") << p(a);
    s << ")";
    return s.str();
}

std::vector<std::size_t> reach(const std::vector<std::vector<std::size_t>>& adj,
                               const std::vector<std::size_t>& seeds, std::size_t n) {
    std::vector<bool> seen(n, false);
    std::deque<std::size_t> queue;
    for (auto s : seeds) {
        if (!seen[s]) {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    std::vector<std::size_t> out;
    while (!queue.empty()) {
        const auto i = queue.front();
        queue.pop_front();
        out.push_back(i);
        for (auto j : adj[i]) {
            if (!seen[j]) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    return out;
}

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

std::uint64_t pack_lattice(const LatticeIndex& k) {
    std::uint64_t key = 0;
    for (int a = 0; a < 3; ++a) {
        const auto v = static_cast<std::uint64_t>(k[a] + kPackOffset) & ((1u << 21) - 1);
        key = (key << 21) | v;
    }
    return key;
}

Vec Grid::point(const LatticeIndex& k) const {
    Vec p(dim);
    for (int a = 0; a < dim; ++a) p(a) = origin(a) + h * k[a];
    return p;
}

double Grid::cell_volume() const { return std::pow(h, dim); }

std::optional<long> Grid::lookup(const LatticeIndex& k) const {
    const auto it = index.find(pack_lattice(k));
    if (it == index.end()) return std::nullopt;
    return it->second;
}

std::size_t Grid::nearest_interior(const Vec& x) const {
    if (interior_points.empty()) throw ContractViolation("grid has no interior nodes");
    std::size_t best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < interior_points.size(); ++i) {
        const double d = (interior_points[i] - x).squaredNorm();
        if (d < dist) {
            dist = d;
            best = i;
        }
    }
    return best;
}

DiscreteOperator DiscreteOperator::with_killing(const Vector& c_new) const {
    if (c_new.size() != c.size()) throw ContractViolation("killing vector has wrong size");
    DiscreteOperator out = *this;
    out.c = c_new;
    out.cert = certify(out.A_int, out.B_ext, out.c);
    return out;
}

MonotonicityCertificate certify(const SparseMatrix& A_int, const SparseMatrix& B_ext,
                                const Vector& c, double tol) {
    MonotonicityCertificate cert;
    const auto n = static_cast<std::size_t>(A_int.rows());
    double min_off = std::numeric_limits<double>::infinity();
    double max_row = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<std::size_t>> fwd(n), rev(n);
    std::vector<std::size_t> strict;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0, diag = 0.0, ext = 0.0;
        for (SparseMatrix::InnerIterator it(A_int, static_cast<Eigen::Index>(i)); it; ++it) {
            row += it.value();
            const auto j = static_cast<std::size_t>(it.col());
            if (j == i) {
                diag = it.value();
                continue;
            }
            min_off = std::min(min_off, it.value());
            if (it.value() > 0.0) {
                fwd[i].push_back(j);
                rev[j].push_back(i);
            }
        }
        if (B_ext.cols() > 0) {
            for (SparseMatrix::InnerIterator it(B_ext, static_cast<Eigen::Index>(i)); it; ++it) {
                ext += it.value();
                min_off = std::min(min_off, it.value());
            }
        }
        max_row = std::max(max_row, row + ext);
        if (-row + c(static_cast<Eigen::Index>(i)) > tol * std::max(1.0, std::abs(diag)))
            strict.push_back(i);
    }
    cert.min_offdiag = std::isfinite(min_off) ? min_off : 0.0;
    cert.max_row_sum = std::isfinite(max_row) ? max_row : 0.0;
    cert.strict_rows = strict.size();
    cert.weakly_chained = n > 0 && reach(rev, strict, n).size() == n;
    cert.irreducible = n > 0 && reach(fwd, {0}, n).size() == n && reach(rev, {0}, n).size() == n;
    return cert;
}

DiscreteOperator assemble(const OperatorSpec& op, const DomainSpec& dom, double h,
                          const AssemblyConfig& cfg) {
    if (!(h > 0.0)) throw ContractViolation("grid spacing must be positive");
    if (dom.empty()) throw ContractViolation("cannot assemble on an empty domain");
    const int d = dom.dim();
    if (d != op.dim()) throw ContractViolation("operator and domain dimensions differ");

    DiscreteOperator disc;
    Grid& g = disc.grid;
    g.dim = d;
    g.h = h;
    const BoxRegion bb = dom.bounding_box();
    g.origin = bb.lo;
    LatticeIndex n{0, 0, 0};
    for (int a = 0; a < d; ++a) n[a] = static_cast<int>(std::ceil((bb.hi(a) - bb.lo(a)) / h - 1e-9));

    LatticeIndex k{0, 0, 0};
    for (k[0] = 0; k[0] <= n[0]; ++k[0])
        for (k[1] = 0; k[1] <= n[1]; ++k[1])
            for (k[2] = 0; k[2] <= n[2]; ++k[2]) {
                const Vec p = g.point(k);
                if (dom.signed_distance(p) < -1e-12) {
                    g.index.emplace(pack_lattice(k), static_cast<long>(g.interior.size()));
                    g.interior.push_back(k);
                    g.interior_points.push_back(p);
                }
            }
    const std::size_t ni = g.interior.size();
    if (ni == 0) throw ContractViolation("no interior grid nodes; reduce h");

    auto node = [&g](const LatticeIndex& kk) -> long {
        const auto key = pack_lattice(kk);
        const auto it = g.index.find(key);
        if (it != g.index.end()) return it->second;
        const long id = -static_cast<long>(g.exterior.size()) - 1;
        g.index.emplace(key, id);
        g.exterior.push_back(kk);
        g.exterior_points.push_back(g.point(kk));
        return id;
    };

    // register the 3^d halo so exterior nodes exist for every stencil
    for (std::size_t i = 0; i < ni; ++i) {
        const LatticeIndex base = g.interior[i];
        LatticeIndex off{0, 0, 0};
        for (off[0] = -1; off[0] <= 1; ++off[0])
            for (off[1] = (d > 1 ? -1 : 0); off[1] <= (d > 1 ? 1 : 0); ++off[1])
                for (off[2] = (d > 2 ? -1 : 0); off[2] <= (d > 2 ? 1 : 0); ++off[2]) {
                    LatticeIndex kk = base;
                    for (int a = 0; a < 3; ++a) kk[a] += off[a];
                    node(kk);
                }
    }
    g.boundary_adjacent.assign(ni, false);

    std::vector<Eigen::Triplet<double>> a_trip, b_trip;
    disc.c.resize(static_cast<Eigen::Index>(ni));
    const double h2 = h * h;

    for (std::size_t i = 0; i < ni; ++i) {
        const LatticeIndex base = g.interior[i];
        const Vec x = g.interior_points[i];
        std::map<long, double> row;
        auto shifted = [&](int a, int sa, int b2 = 0, int sb = 0) {
            LatticeIndex kk = base;
            kk[a] += sa;
            if (sb != 0) kk[b2] += sb;
            return node(kk);
        };

        const Mat q = op.diffusion(x);
        if (((q - q.transpose()).cwiseAbs().maxCoeff()) > 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff()))
            throw EllipticityError("diffusion matrix not symmetric at " + node_name(g, base));
        for (int a = 0; a < d; ++a) {
            row[shifted(a, 1)] += 0.5 * q(a, a) / h2;
            row[shifted(a, -1)] += 0.5 * q(a, a) / h2;
            for (int b2 = a + 1; b2 < d; ++b2) {
                const double qab = q(a, b2);
                if (qab == 0.0) continue;
                const double w = std::abs(qab) / (2.0 * h2);
                const int sb = qab > 0.0 ? 1 : -1;
                row[shifted(a, 1, b2, sb)] += w;
                row[shifted(a, -1, b2, -sb)] += w;
                row[shifted(a, 1)] -= w;
                row[shifted(a, -1)] -= w;
                row[shifted(b2, 1)] -= w;
                row[shifted(b2, -1)] -= w;
            }
        }

        Vec b = op.drift(x);
        const auto jumps = kernel_jumps(op.kernel, d, x, cfg.radial_panels, cfg.angular_nodes);
        for (const auto& jmp : jumps) {
            b -= jmp.weight * jmp.y / (1.0 + jmp.y.squaredNorm());
            // multilinear distribution onto the 2^d surrounding nodes
            LatticeIndex lo{0, 0, 0};
            double frac[3] = {0.0, 0.0, 0.0};
            for (int a = 0; a < d; ++a) {
                const double s = (x(a) + jmp.y(a) - g.origin(a)) / h;
                double fl = std::floor(s);
                double fr = s - fl;
                if (fr < 1e-9) fr = 0.0;
                if (fr > 1.0 - 1e-9) {
                    fl += 1.0;
                    fr = 0.0;
                }
                lo[a] = static_cast<int>(fl);
                frac[a] = fr;
            }
            for (int corner = 0; corner < (1 << d); ++corner) {
                double w = jmp.weight;
                LatticeIndex kk = lo;
                for (int a = 0; a < d; ++a) {
                    const bool up = (corner >> a) & 1;
                    w *= up ? frac[a] : 1.0 - frac[a];
                    kk[a] += up ? 1 : 0;
                }
                if (w > 0.0) row[node(kk)] += w;
            }
        }
        for (int a = 0; a < d; ++a) {
            if (b(a) > 0.0) row[shifted(a, 1)] += b(a) / h;
            if (b(a) < 0.0) row[shifted(a, -1)] += -b(a) / h;
        }

        const long self = static_cast<long>(i);
        double total = 0.0;
        for (const auto& [col, v] : row) total += v;
        row[self] -= total;

        for (const auto& [col, v] : row) {
            if (col != self && v < -cfg.monotone_tol) {
                std::ostringstream msg;
                msg << "non-monotone stencil at " << node_name(g, base) << ": off-diagonal " << v
                    << "; use a smaller h or a diagonally dominant Q (q_ii >= sum |q_ij|)";
                throw MonotonicityError(msg.str());
            }
            if (col >= 0) {
                if (v != 0.0 || col == self) a_trip.emplace_back(static_cast<int>(i), static_cast<int>(col), v);
            } else if (v != 0.0) {
                b_trip.emplace_back(static_cast<int>(i), static_cast<int>(-col - 1), v);
            }
        }
        for (int a = 0; a < d && !g.boundary_adjacent[i]; ++a)
            if (shifted(a, 1) < 0 || shifted(a, -1) < 0) g.boundary_adjacent[i] = true;
        disc.c(static_cast<Eigen::Index>(i)) = op.killing(x);
    }

    const auto nn = static_cast<Eigen::Index>(ni);
    disc.A_int.resize(nn, nn);
    disc.A_int.setFromTriplets(a_trip.begin(), a_trip.end());
    disc.B_ext.resize(nn, static_cast<Eigen::Index>(g.exterior.size()));
    disc.B_ext.setFromTriplets(b_trip.begin(), b_trip.end());
    disc.cert = certify(disc.A_int, disc.B_ext, disc.c, cfg.monotone_tol);
    return disc;
}

Vector exterior_values(const Grid& grid, const std::function<double(const Vec&)>& g) {
    Vector out(static_cast<Eigen::Index>(grid.n_exterior()));
    for (std::size_t i = 0; i < grid.n_exterior(); ++i) out(static_cast<Eigen::Index>(i)) = g(grid.exterior_points[i]);
    return out;
}

Vector interior_values(const Grid& grid, const std::function<double(const Vec&)>& f) {
    Vector out(static_cast<Eigen::Index>(grid.n_interior()));
    for (std::size_t i = 0; i < grid.n_interior(); ++i) out(static_cast<Eigen::Index>(i)) = f(grid.interior_points[i]);
    return out;
}

Vector apply_discrete(const DiscreteOperator& disc, const Vector& u, const Vector& g) {
    Vector out = disc.A_int * u - disc.c.cwiseProduct(u);
    if (g.size() > 0) out += disc.B_ext * g;
    return out;
}

struct ResolventSolver::Impl {
    Eigen::SparseMatrix<double> M;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    mutable std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_t;
    Eigen::SparseMatrix<double> Mt;
    double norm_M = 0.0;
};

ResolventSolver::ResolventSolver(const DiscreteOperator& disc, double alpha, bool with_killing)
    : disc_(&disc), alpha_(alpha), impl_(std::make_unique<Impl>()) {
    if (alpha < 0.0) throw ContractViolation("resolvent needs alpha >= 0");
    const auto n = static_cast<Eigen::Index>(disc.size());
    Vector diag = Vector::Constant(n, alpha);
    if (with_killing) diag += disc.c;
    if (alpha == 0.0) {
        const auto cert = certify(disc.A_int, disc.B_ext, with_killing ? disc.c : Vector::Zero(n));
        if (!cert.monotone() || !cert.weakly_chained)
            throw ContractViolation(
                "alpha = 0 resolvent needs a monotone, weakly chained diagonally dominant operator");
    }
    Eigen::SparseMatrix<double> I(n, n);
    I.setIdentity();
    impl_->M = Eigen::SparseMatrix<double>(-disc.A_int);
    impl_->M += Eigen::SparseMatrix<double>(diag.asDiagonal() * I);
    impl_->M.makeCompressed();
    impl_->lu.compute(impl_->M);
    if (impl_->lu.info() != Eigen::Success) throw NumericalError("sparse factorisation failed", 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(impl_->M, i); it; ++it) s += std::abs(it.value());
        impl_->norm_M = std::max(impl_->norm_M, s);
    }
}

ResolventSolver::~ResolventSolver() = default;
ResolventSolver::ResolventSolver(ResolventSolver&&) noexcept = default;
ResolventSolver& ResolventSolver::operator=(ResolventSolver&&) noexcept = default;

namespace {

template <class Solver, class Mat_>
Vector refined_solve(const Solver& lu, const Mat_& M, double norm_M, const Vector& rhs, double& rel) {
    Vector u = lu.solve(rhs);
    for (int pass = 0; pass < 3; ++pass) {
        const Vector r = rhs - M * u;
        rel = inf_norm(r) / (norm_M * inf_norm(u) + inf_norm(rhs) + 1e-300);
        if (rel <= 0.01 * kSolverTol) break;
        u += lu.solve(r);
    }
    if (rel > kSolverTol) throw NumericalError("linear solve residual above tolerance", rel);
    return u;
}

}  // namespace

Vector ResolventSolver::solve(const Vector& f, const Vector& g) const {
    if (f.size() != static_cast<Eigen::Index>(disc_->size())) throw ContractViolation("source has wrong size");
    Vector rhs = f;
    if (g.size() > 0) {
        if (g.size() != disc_->B_ext.cols()) throw ContractViolation("exterior data has wrong size");
        rhs += disc_->B_ext * g;
    }
    if (inf_norm(rhs) == 0.0) return Vector::Zero(rhs.size());
    return refined_solve(impl_->lu, impl_->M, impl_->norm_M, rhs, last_residual_);
}

Vector ResolventSolver::solve_transpose(const Vector& f) const {
    if (!impl_->lu_t) {
        impl_->Mt = impl_->M.transpose();
        impl_->Mt.makeCompressed();
        impl_->lu_t = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
        impl_->lu_t->compute(impl_->Mt);
        if (impl_->lu_t->info() != Eigen::Success) throw NumericalError("sparse factorisation failed", 0.0);
    }
    if (inf_norm(f) == 0.0) return Vector::Zero(f.size());
    double norm_t = 0.0;
    for (Eigen::Index i = 0; i < impl_->Mt.outerSize(); ++i) {
        double s = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(impl_->M, i); it; ++it) s += std::abs(it.value());
        norm_t = std::max(norm_t, s);
    }
    return refined_solve(*impl_->lu_t, impl_->Mt, norm_t, f, last_residual_);
}

Vector resolvent(const DiscreteOperator& disc, double alpha, const Vector& f, const Vector& g) {
    return ResolventSolver(disc, alpha).solve(f, g);
}

Vector semigroup(const DiscreteOperator& disc, double t, const Vector& f, const Vector& g) {
    if (t < 0.0) throw ContractViolation("semigroup time must be non-negative");
    const auto n = static_cast<Eigen::Index>(disc.size());
    if (f.size() != n) throw ContractViolation("initial data has wrong size");
    if (t == 0.0) return f;
    double lambda = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) lambda = std::max(lambda, -disc.A_int.coeff(i, i) + disc.c(i));
    if (lambda == 0.0) return f;

    // P = I + G/Λ with G = A_int - diag c; exterior states absorb with value g
    SparseMatrix P = disc.A_int / lambda;
    for (Eigen::Index i = 0; i < n; ++i) P.coeffRef(i, i) += 1.0 - disc.c(i) / lambda;
    Vector source = Vector::Zero(n);
    if (g.size() > 0) source = disc.B_ext * g / lambda;

    const double total = lambda * t;
    const int substeps = total > 500.0 ? static_cast<int>(std::ceil(total / 500.0)) : 1;
    const double mu = total / substeps;
    const int k_max = static_cast<int>(std::ceil(mu + 12.0 * std::sqrt(mu) + 40.0));
    std::vector<double> weights(static_cast<std::size_t>(k_max) + 1);
    for (int k = 0; k <= k_max; ++k)
        weights[static_cast<std::size_t>(k)] = std::exp(-mu + k * std::log(mu) - std::lgamma(k + 1.0));

    Vector v = f;
    for (int s = 0; s < substeps; ++s) {
        Vector w = v;
        Vector acc = weights[0] * w;
        for (int k = 1; k <= k_max; ++k) {
            w = P * w + source;
            acc += weights[static_cast<std::size_t>(k)] * w;
        }
        v = acc;
    }
    return v;
}

EigenPair principal_eigenpair(const DiscreteOperator& disc, double tol, int max_iterations) {
    if (!disc.cert.monotone()) throw ContractViolation("eigenpair needs a monotone operator");
    if (!disc.cert.irreducible) throw ContractViolation("eigenpair needs an irreducible operator");
    const ResolventSolver r1(disc, 1.0);
    const auto n = static_cast<Eigen::Index>(disc.size());
    Vector v = Vector::Ones(n);
    double rho = 0.0;
    EigenPair out;
    for (int it = 1; it <= max_iterations; ++it) {
        const Vector w = r1.solve(v);
        const double rho_new = v.dot(w) / v.dot(v);
        const Vector v_new = w / inf_norm(w);
        const double change = inf_norm(v_new - v);
        const bool done = std::abs(rho_new - rho) <= tol * std::abs(rho_new) && change <= 1e-3 * std::sqrt(tol);
        v = v_new;
        rho = rho_new;
        out.iterations = it;
        if (done) break;
        if (it == max_iterations) throw NumericalError("power iteration did not converge", change);
    }
    out.phi = v;
    out.lambda = 1.0 / rho - 1.0;
    out.residual = inf_norm(r1.solve(v) - rho * v);
    if (v.minCoeff() <= 0.0)
        throw NumericalError("principal eigenvector not strictly positive (irreducibility failure)", v.minCoeff());
    return out;
}

Matrix resolvent_kernel(const DiscreteOperator& disc, double alpha, bool with_killing) {
    const ResolventSolver s(disc, alpha, with_killing);
    const auto n = static_cast<Eigen::Index>(disc.size());
    Matrix K(n, n);
    Vector e = Vector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        e(j) = 1.0;
        K.col(j) = s.solve(e);
        e(j) = 0.0;
    }
    K /= disc.grid.cell_volume();
    if (K.minCoeff() <= 0.0)
        throw NumericalError("resolvent kernel has a non-positive entry (irreducibility failure)", K.minCoeff());
    return K;
}

Minorization minorization(const DiscreteOperator& disc, double alpha, std::size_t x0, bool with_killing) {
    if (x0 >= disc.size()) throw ContractViolation("reference node out of range");
    Minorization m;
    m.alpha = alpha;
    m.x0 = x0;
    const Matrix r = resolvent_kernel(disc, alpha, with_killing);
    const auto n = r.rows();
    m.phi_bar = r.row(static_cast<Eigen::Index>(x0)).transpose();
    m.psi_bar.resize(n);
    for (Eigen::Index x = 0; x < n; ++x) m.psi_bar(x) = (r.row(x).transpose().array() / m.phi_bar.array()).minCoeff();
    if (m.psi_bar.maxCoeff() <= 0.0) throw NumericalError("minorization: psi_bar vanishes", 0.0);
    m.rank_one_slack = (r - m.psi_bar * m.phi_bar.transpose()).minCoeff();
    const ResolventSolver s(disc, alpha + 1.0, with_killing);
    m.psi = s.solve(m.psi_bar);
    m.chi = s.solve_transpose(m.phi_bar);
    m.resolvent_slack = (r - m.psi * m.chi.transpose()).minCoeff();
    return m;
}

GaugeResult gauge_grid(const DiscreteOperator& disc) {
    GaugeResult out;
    const auto n = static_cast<Eigen::Index>(disc.size());
    if (inf_norm(disc.c) == 0.0) {
        out.w = Vector::Zero(n);
        return out;
    }
    out.w = ResolventSolver(disc, 0.0, true).solve(disc.c);
    const Vector load = disc.c.cwiseProduct(Vector::Ones(n) - out.w);
    out.cross_check = inf_norm(out.w - ResolventSolver(disc, 0.0, false).solve(load));
    return out;
}

DiscreteOperator transpose_adjoint(const DiscreteOperator& disc) {
    DiscreteOperator out;
    out.grid = disc.grid;
    out.A_int = disc.A_int.transpose();
    out.B_ext.resize(disc.A_int.rows(), disc.B_ext.cols());
    out.c = disc.c;
    out.cert = certify(out.A_int, out.B_ext, out.c);
    return out;
}

DualityResult duality_check(const DiscreteOperator& disc, const DiscreteOperator& disc_hat,
                            double alpha, int trials, std::uint64_t seed) {
    if (disc.size() != disc_hat.size()) throw ContractViolation("adjoint assembled on a different grid");
    const ResolventSolver r(disc, alpha), r_hat(disc_hat, alpha);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(disc.size());
    const double vol = disc.grid.cell_volume();
    DualityResult out;
    out.trials = trials;
    for (int t = 0; t < trials; ++t) {
        Vector f(n), g(n);
        for (Eigen::Index i = 0; i < n; ++i) f(i) = unif(rng);
        for (Eigen::Index i = 0; i < n; ++i) g(i) = unif(rng);
        const double lhs = r_hat.solve(f).dot(g) * vol;
        const double rhs = f.dot(r.solve(g)) * vol;
        out.max_residual = std::max(out.max_residual, std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)));
    }
    return out;
}

}  // namespace hopflab
