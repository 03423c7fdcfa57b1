#pragma once

#include "hopflab/operator.hpp"
#include "hopflab/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace hopflab {

struct Ball {
    Vec center;
    double radius = 1.0;
};

struct Box {
    Vec lo;
    Vec hi;
};

struct Annulus {
    Vec center;
    double r_in = 0.5;
    double r_out = 1.0;
};

/// Domain given by a 1-Lipschitz signed-distance oracle (negative inside).
/// Inside the domain the oracle is the exact distance to the complement for
/// every registered shape; outside it may underestimate.
struct Implicit {
    std::string name;
    std::function<double(const Vec&)> sdf;
    Vec lo;
    Vec hi;
};

class DomainSpec {
public:
    using Shape = std::variant<Ball, Box, Annulus, Implicit>;

    DomainSpec() = default;
    DomainSpec(Shape shape);  // NOLINT(google-explicit-constructor)

    static DomainSpec empty_of(int dim);

    const Shape& shape() const { return shape_; }
    bool empty() const { return empty_; }
    int dim() const { return dim_; }

    /// Negative inside, zero on the boundary, positive outside.
    double signed_distance(const Vec& x) const;
    bool contains(const Vec& x) const { return !empty_ && signed_distance(x) < 0.0; }
    bool in_closure(const Vec& x, double tol = 0.0) const {
        return !empty_ && signed_distance(x) <= tol;
    }
    BoxRegion bounding_box() const;
    std::string describe() const;

private:
    Shape shape_;
    int dim_ = 0;
    bool empty_ = false;
};

/// dist(x, D^c); 0 outside D.
double delta_D(const DomainSpec& dom, const Vec& x);

struct BallCertification {
    int sphere_samples = 128;   ///< directions per shell (d >= 2)
    int shells = 4;
    double boundary_tol = 1e-6; ///< |sd(x̂)| allowed for a boundary point
    double min_radius = 1e-6;
    int bisection_steps = 48;
    int directions = 64;        ///< candidate normal directions swept for Implicit shapes
};

struct InteriorBallRadius {
    double radius = 0.0;  ///< in [0, 1]
    bool found = false;
    int certification_points = 0;
};

/// Largest radius <= 1 of an interior ball tangent at the boundary point x̂.
InteriorBallRadius interior_ball_radius(const DomainSpec& dom, const Vec& x_hat,
                                        const BallCertification& cert = {});

/// Unit vectors (x̂ - y)/r over interior balls B(y, r) at x̂ found at this resolution.
std::vector<Vec> generalized_normals(const DomainSpec& dom, const Vec& x_hat,
                                     const BallCertification& cert = {});

/// z ∈ S(D) ∪ D̄ for the kernel's support (exact for atomic laws).
bool reachable_set_contains(const DomainSpec& dom, const LevyKernelSpec& kernel, const Vec& z);

/// D_r = {x ∈ D : dist(x, ∂D) > r}; flagged empty when nothing remains.
DomainSpec shrink(const DomainSpec& dom, double r);

struct AnnulusPair {
    DomainSpec inner;  ///< V_* = B(ȳ,r) \ B̄(ȳ,r/2)
    DomainSpec outer;  ///< V^* = B(ȳ,3r/2) \ B̄(ȳ,r/2)
};
AnnulusPair annuli(const Vec& center, double r);

struct ExteriorBall {
    Vec center;
    double radius = 0.0;
};

/// A ball in D^c tangent at x̂ (radius capped at 1), if one is certified.
std::optional<ExteriorBall> exterior_ball(const DomainSpec& dom, const Vec& x_hat,
                                          const BallCertification& cert = {});

struct NormalDerivative {
    double value = 0.0;
    std::vector<double> h;
    std::vector<double> quotients;
};

/// min over h ∈ {h_max, h_max/2, ...} ∩ [h_min, h_max] of (u(x̂) - u(x̂ - h n))/h.
/// When `dom` is given, only h with x̂ - h n ∈ D are used.
NormalDerivative lower_normal_derivative(const std::function<double(const Vec&)>& u,
                                         const Vec& x_hat, const Vec& n, double h_min,
                                         double h_max, const DomainSpec* dom = nullptr);

/// Outward unit normal (exact for analytic shapes, sdf gradient for Implicit).
Vec outward_normal(const DomainSpec& dom, const Vec& x_hat);
/// Closest boundary point (Newton projection for Implicit shapes).
Vec project_to_boundary(const DomainSpec& dom, const Vec& x);

/// Registered Implicit shapes: "tangent-disks-cusp", "l-shape", "inward-cusp", "disk".
DomainSpec implicit_domain(const std::string& name);
std::vector<std::string> implicit_domain_names();

}  // namespace hopflab
