#pragma once

#include "hopflab/barrier.hpp"
#include "hopflab/geometry.hpp"
#include "hopflab/grid.hpp"
#include "hopflab/mc.hpp"
#include "hopflab/operator.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace hopflab {

enum class Verdict { Pass, Fail, Vacuous, NotApplicable, Info, ExpectedFail };

std::string to_string(Verdict v);
/// Fail is the only verdict that counts against a run.
inline bool is_failure(Verdict v) { return v == Verdict::Fail; }

/// FNV-1a over the raw bytes of the inputs.
class Digest {
public:
    Digest& add(double x);
    Digest& add(std::uint64_t x);
    Digest& add(const Vector& v);
    Digest& add(const std::string& s);
    std::string hex() const;

private:
    std::uint64_t h_ = 1469598103934665603ULL;
    void bytes(const void* p, std::size_t n);
};

struct VerificationReport {
    std::string check;
    std::string digest;
    double margin = 0.0;
    double tolerance = 0.0;
    Verdict verdict = Verdict::NotApplicable;
    std::string tolerance_note;
    std::string note;
    std::vector<std::pair<std::string, double>> values;
    std::vector<std::string> artifacts;

    void set(const std::string& key, double v);
    /// NaN when absent.
    double value(const std::string& key) const;
    /// Pass iff margin >= -tolerance, else Fail.
    void decide();
};

/// u with its exterior data and the recomputed residual (A - c)u.
struct SubsolutionCase {
    std::shared_ptr<const DiscreteOperator> disc;
    Vector u;
    Vector g;
    Vector f;
    Vector residual;
    std::uint64_t seed = 0;
    std::string source;
    bool supersolution = false;  ///< residual <= tol instead of >= -tol
    double cert_tol = 0.0;
    double worst_residual = 0.0;  ///< min residual (sub) or -max residual (super)
    bool certified = false;

    std::string digest() const;
};

/// Recompute the residual from the matrices and set the certificate.
void recertify(SubsolutionCase& c);
/// Wrap a hand-built u; certification is recomputed, never assumed.
SubsolutionCase make_case(std::shared_ptr<const DiscreteOperator> disc, Vector u, Vector g,
                          bool supersolution, std::string source);

/// Solve (A - c)u = f, u = g outside; f >= 0 gives a subsolution.
SubsolutionCase gen_subsolution(std::shared_ptr<const DiscreteOperator> disc, const Vector& f,
                                const Vector& g, std::uint64_t seed);
/// Solve (A - c)u = -f with f >= 0.
SubsolutionCase gen_supersolution(std::shared_ptr<const DiscreteOperator> disc, const Vector& f,
                                  const Vector& g, std::uint64_t seed);

struct RandomData {
    Vector f;  ///< >= 0 on interior nodes
    Vector g;  ///< on exterior nodes
};

/// f = s·U³ per node with s ~ U(0, f_scale); g ~ U(g_lo, g_hi) per exterior node.
RandomData make_random_data(const Grid& grid, std::uint64_t seed, double f_scale = 1.0, double g_lo = -1.0,
                       double g_hi = 1.0);

/// Multilinear interpolation of interior values u and exterior values g.
std::function<double(const Vec&)> grid_interpolant(const Grid& grid, const Vector& u, const Vector& g);

/// Exterior nodes that the interior rows actually couple to.
std::vector<std::size_t> coupled_exterior(const DiscreteOperator& disc);

struct BoundaryMax {
    Vec x_hat;             ///< projection of the node onto ∂D
    double value = 0.0;    ///< max over interior and coupled exterior nodes
    long node = 0;         ///< >= 0 interior index, < 0 exterior -(i+1)
    bool on_exterior = false;
};
BoundaryMax boundary_max(const SubsolutionCase& c, const DomainSpec& dom);

VerificationReport check_weak_max(const SubsolutionCase& c, const DomainSpec& dom,
                                  const LevyKernelSpec& kernel, double tol = 1e-9);

VerificationReport check_strong_max(const SubsolutionCase& c, double tol_const = 1e-8);

/// Au = A_int u + B g (no killing) near an interior maximum.
VerificationReport check_bony(const Vector& u, const Vector& g, const DiscreteOperator& disc,
                              std::size_t x_hat_node, const std::vector<double>& radii,
                              const LevyKernelSpec& kernel, const DomainSpec& dom, double tol = 1e-9);

/// Interior ball used at a boundary point: r = min(r0, 𝔯(x̂), 1), ȳ = x̂ - r n.
struct HopfGeometry {
    Vec x_hat;
    Vec normal;
    Vec ybar;
    double r = 0.0;
    double r_domain = 0.0;
};
HopfGeometry hopf_geometry(const DomainSpec& dom, const Vec& x_hat, const BarrierConstants& consts);

/// u given as a function with its value M at x̂ and sample points of D.
struct FieldInputs {
    std::function<double(const Vec&)> u;
    double u_hat = 0.0;
    std::vector<Vec> samples;
};
FieldInputs field_inputs(const SubsolutionCase& c, const Vec& x_hat, double u_hat);

/// ∂̲_n u(x̂) >= α r e^{-αr²} inf_{D_{r/2}}(u(x̂) - u).
VerificationReport check_hopf(const FieldInputs& in, const DomainSpec& dom, const Vec& x_hat,
                              const BarrierConstants& consts, double tol = 1e-9);
VerificationReport check_hopf(const SubsolutionCase& c, const DomainSpec& dom, const BarrierConstants& consts,
                              double tol = 1e-9);

/// Exit-probability factor a* for balls of radius r_ball around ȳ.
ExitProbabilityBound qhl_exit_factor(const OperatorSpec& op, const Vec& center, double r_ball, double c_lower);

/// ∂̲_n u(x̂) > (2C a*/r) e^{-C} u(x̂).
VerificationReport check_qhl_IA(const SubsolutionCase& c, const DomainSpec& dom, const OperatorSpec& op,
                                const BarrierConstants& consts, double c_lower, double tol = 1e-9);

/// ∂̲_n u(x̂) >= (2C/r) e^{-C} ρ(r/2) u(x̂) with ρ from the grid gauge w.
VerificationReport check_qhl_IB(const SubsolutionCase& c, const DomainSpec& dom, const Vector& gauge,
                                const BarrierConstants& consts, double tol = 1e-9);

/// Nodewise u(x̂) - u(x) >= c̲φu(x̂)/(2e‖φ‖(λ+c̲)) + ψ(x) Σ (Au - cu)χ h^d.
/// `eigen` is the pair without killing, `minor` a minorization at α >= ‖c‖∞.
VerificationReport check_qhl_IIA(const SubsolutionCase& c, const EigenPair& eigen, const Minorization& minor,
                                 double tol = 1e-9);

/// Nodewise u(x̂) - u(x) >= φ/(2e‖φ‖)[c̲u(x̂)/(λ+c̲) + min(Au - cu)/(λ+c̄)].
VerificationReport check_qhl_IIB(const SubsolutionCase& c, const EigenPair& eigen, double tol = 1e-9);

/// a_fit = min over nodes of R_α f / δ_D; Pass iff a_fit >= threshold.
VerificationReport check_delta_bound(const DiscreteOperator& disc, const DomainSpec& dom, const Vector& f,
                                     double alpha, double threshold = 1e-6);

struct DeltaRefinement {
    std::vector<double> h;
    std::vector<double> a_fit;
    std::vector<std::size_t> nodes;
    bool degrading = false;  ///< a_fit strictly decreasing and halved over the range
};
DeltaRefinement delta_bound_refinement(const OperatorSpec& op, const DomainSpec& dom,
                                       const std::function<double(const Vec&)>& f, double alpha,
                                       const std::vector<double>& hs);

/// V = interior nodes with δ_D > v_margin. `minor` taken at α >= ‖c‖∞ + 1.
VerificationReport check_weak_harnack(const SubsolutionCase& c, const DomainSpec& dom, double v_margin,
                                      const Minorization& minor);

/// Ratio ∂̲_n u(x̂)/(u(x̂) - u(x0)); informational, Fail only when it is not positive.
VerificationReport check_harnack_corollary(const FieldInputs& in, const DomainSpec& dom, const Vec& x_hat,
                                           const Vec& x0, double h_max);

struct GridTolerance {
    double solver = 0.0;
    double richardson = 0.0;
    double monitoring = 0.0;
    double floor = 0.0;
    double total() const { return solver + richardson + monitoring + floor; }
};

/// |MC - grid(x0)| <= 3 CI + tol_grid(h, dt).
/// `grid_c` replaces c on the grid side only (negative controls).
VerificationReport mc_vs_grid(const OperatorSpec& op, const KillingRate& c, const DomainSpec& dom,
                              const std::function<double(const Vec&)>& f,
                              const std::function<double(const Vec&)>& g, const Vec& x0,
                              const PathConfig& cfg, const DiscreteOperator& disc, double floor = 2e-3,
                              const KillingRate* grid_c = nullptr);

}  // namespace hopflab
