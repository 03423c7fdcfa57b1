#pragma once

#include "hopflab/geometry.hpp"
#include "hopflab/operator.hpp"

#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

namespace hopflab {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using LatticeIndex = std::array<int, 3>;

/// Uniform lattice anchored at the lower corner of the domain's bounding box.
struct Grid {
    int dim = 1;
    double h = 0.1;
    Vec origin;
    std::vector<LatticeIndex> interior;
    std::vector<LatticeIndex> exterior;
    std::vector<Vec> interior_points;
    std::vector<Vec> exterior_points;
    std::vector<bool> boundary_adjacent;  ///< interior node with an exterior axis neighbour

    Vec point(const LatticeIndex& k) const;
    double cell_volume() const;
    std::size_t n_interior() const { return interior.size(); }
    std::size_t n_exterior() const { return exterior.size(); }

    /// >= 0: interior index; < 0: exterior index -(i+1); nullopt if unknown.
    std::optional<long> lookup(const LatticeIndex& k) const;
    /// Interior node closest to x (linear scan).
    std::size_t nearest_interior(const Vec& x) const;

    std::unordered_map<std::uint64_t, long> index;
};

std::uint64_t pack_lattice(const LatticeIndex& k);

struct MonotonicityCertificate {
    double min_offdiag = 0.0;         ///< over A_int off-diagonals and B_ext entries
    double max_row_sum = 0.0;         ///< of [A_int | B_ext]
    std::size_t strict_rows = 0;      ///< rows with mass leaving the interior
    bool weakly_chained = false;      ///< every node reaches a strict row
    bool irreducible = false;         ///< A_int off-diagonal graph strongly connected
    bool monotone() const { return min_offdiag >= 0.0; }
};

struct AssemblyConfig {
    int radial_panels = 2;
    int angular_nodes = 16;
    double monotone_tol = 1e-12;
};

struct DiscreteOperator {
    Grid grid;
    SparseMatrix A_int;  ///< interior x interior
    SparseMatrix B_ext;  ///< interior x exterior
    Vector c;            ///< killing rate at interior nodes
    MonotonicityCertificate cert;

    std::size_t size() const { return grid.n_interior(); }
    /// Same matrices with the killing vector replaced.
    DiscreteOperator with_killing(const Vector& c_new) const;
};

/// Monotone finite-difference / quadrature discretisation of A on D.
DiscreteOperator assemble(const OperatorSpec& op, const DomainSpec& dom, double h,
                          const AssemblyConfig& cfg = {});

/// Recompute the certificate (after editing matrices by hand).
MonotonicityCertificate certify(const SparseMatrix& A_int, const SparseMatrix& B_ext,
                                const Vector& c, double tol = 1e-12);

/// Sample a field on the exterior / interior nodes.
Vector exterior_values(const Grid& grid, const std::function<double(const Vec&)>& g);
Vector interior_values(const Grid& grid, const std::function<double(const Vec&)>& f);

/// (A_int - diag c) u + B_ext g.
Vector apply_discrete(const DiscreteOperator& disc, const Vector& u, const Vector& g);

/// Factorised (alpha I - A_int + diag c) for repeated solves.
class ResolventSolver {
public:
    ResolventSolver(const DiscreteOperator& disc, double alpha, bool with_killing = true);
    ~ResolventSolver();
    ResolventSolver(ResolventSolver&&) noexcept;
    ResolventSolver& operator=(ResolventSolver&&) noexcept;

    /// u = M^{-1}(f + B g); g may be empty (zero exterior data).
    Vector solve(const Vector& f, const Vector& g = {}) const;
    /// M^{-T} f.
    Vector solve_transpose(const Vector& f) const;
    double alpha() const { return alpha_; }
    double last_residual() const { return last_residual_; }

private:
    struct Impl;
    const DiscreteOperator* disc_;
    double alpha_;
    std::unique_ptr<Impl> impl_;
    mutable double last_residual_ = 0.0;
};

inline constexpr double kSolverTol = 1e-10;

Vector resolvent(const DiscreteOperator& disc, double alpha, const Vector& f, const Vector& g = {});

/// P_t^D f with exterior data g frozen, by uniformisation.
Vector semigroup(const DiscreteOperator& disc, double t, const Vector& f, const Vector& g = {});

struct EigenPair {
    double lambda = 0.0;
    Vector phi;  ///< ‖φ‖∞ = 1, positive
    double residual = 0.0;
    int iterations = 0;
};

EigenPair principal_eigenpair(const DiscreteOperator& disc, double tol = 1e-10,
                              int max_iterations = 10000);

/// Dense r_α(x, y) = (αI - A + C)^{-1}_{xy} / h^d.
Matrix resolvent_kernel(const DiscreteOperator& disc, double alpha, bool with_killing = true);

struct Minorization {
    double alpha = 0.0;
    std::size_t x0 = 0;
    Vector psi_bar;  ///< ψ̄(x) = min_y r_α(x,y)/φ̄(y), ψ̄(x0) = 1
    Vector phi_bar;  ///< φ̄(y) = r_α(x0,y)
    Vector psi;      ///< R_{α+1} ψ̄
    Vector chi;      ///< density of ν(B) = ∫ φ̄ R_{α+1} 1_B
    double rank_one_slack = 0.0;  ///< min_{x,y} r - ψ̄φ̄ᵀ
    double resolvent_slack = 0.0; ///< min_{x,z} r_α - ψ χᵀ
};

/// Rank-one minorization of r_α; kernels use the operator without killing
/// unless `with_killing` is set.
Minorization minorization(const DiscreteOperator& disc, double alpha, std::size_t x0,
                          bool with_killing = false);

struct GaugeResult {
    Vector w;
    double cross_check = 0.0;  ///< ‖w - R_0(c(1-w))‖∞
};
GaugeResult gauge_grid(const DiscreteOperator& disc);

/// Discrete adjoint: A_intᵀ, no exterior coupling, same killing.
DiscreteOperator transpose_adjoint(const DiscreteOperator& disc);

struct DualityResult {
    double max_residual = 0.0;  ///< max |<R̂f,g> - <f,Rg>| / max(|<R̂f,g>|, |<f,Rg>|)
    int trials = 0;
};
DualityResult duality_check(const DiscreteOperator& disc, const DiscreteOperator& disc_hat,
                            double alpha, int trials, std::uint64_t seed);

}  // namespace hopflab
