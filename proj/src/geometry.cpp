#include "hopflab/geometry.hpp"

#include <algorithm>
#include <cmath>
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

double box_sdf(const Vec& x, const Vec& lo, const Vec& hi) {
    const Vec mid = 0.5 * (lo + hi);
    const Vec half = 0.5 * (hi - lo);
    const Vec q = (x - mid).cwiseAbs() - half;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

/// Deterministic unit directions covering S^{d-1}.
std::vector<Vec> sphere_directions(int dim, int count) {
    std::vector<Vec> dirs;
    if (dim == 1) return {make_vec({1.0}), make_vec({-1.0})};
    if (dim == 2) {
        for (int k = 0; k < count; ++k) {
            const double a = 2.0 * std::numbers::pi * k / count;
            dirs.push_back(make_vec({std::cos(a), std::sin(a)}));
        }
        return dirs;
    }
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
        const double z = 1.0 - 2.0 * (k + 0.5) / count;
        const double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
        dirs.push_back(make_vec({rr * std::cos(golden * k), rr * std::sin(golden * k), z}));
    }
    return dirs;
}

Vec sdf_gradient(const DomainSpec& dom, const Vec& x) {
    const double eps = 1e-7;
    Vec g(x.size());
    for (int k = 0; k < x.size(); ++k) {
        Vec xp = x, xm = x;
        xp(k) += eps;
        xm(k) -= eps;
        g(k) = (dom.signed_distance(xp) - dom.signed_distance(xm)) / (2.0 * eps);
    }
    return g;
}

/// Sample the ball B(center, r) on concentric shells; inside=true requires
/// sd <= tol everywhere, inside=false requires sd >= -tol.
bool certify_ball(const DomainSpec& dom, const Vec& center, double r, bool inside,
                  const BallCertification& cert, int* points) {
    const double tol = 1e-12 + 1e-9 * r;
    const auto dirs = sphere_directions(dom.dim(), cert.sphere_samples);
    auto ok = [&](const Vec& p) {
        const double sd = dom.signed_distance(p);
        return inside ? sd <= tol : sd >= -tol;
    };
    int n = 1;
    if (!ok(center)) return false;
    for (int s = 1; s <= cert.shells; ++s) {
        const double rad = r * s / cert.shells;
        for (const auto& d : dirs) {
            ++n;
            if (!ok(center + rad * d)) {
                if (points) *points = n;
                return false;
            }
        }
    }
    if (points) *points = n;
    return true;
}

/// Largest r in [min_radius, 1] with B(x̂ + sign*r*n, r) certified; 0 if none.
double bisect_tangent_ball(const DomainSpec& dom, const Vec& x_hat, const Vec& n, bool inside,
                           const BallCertification& cert, int* points) {
    const double sign = inside ? -1.0 : 1.0;
    auto good = [&](double r) {
        return certify_ball(dom, x_hat + sign * r * n, r, inside, cert, points);
    };
    if (good(1.0)) return 1.0;
    if (!good(cert.min_radius)) return 0.0;
    double lo = cert.min_radius, hi = 1.0;
    for (int i = 0; i < cert.bisection_steps; ++i) {
        const double mid = std::sqrt(lo * hi);
        (good(mid) ? lo : hi) = mid;
        if (hi / lo < 1.0 + 1e-6) break;
    }
    return lo;
}

void require_boundary_point(const DomainSpec& dom, const Vec& x_hat, double tol) {
    if (std::abs(dom.signed_distance(x_hat)) > tol) {
        std::ostringstream msg;
        msg << "point is not on the boundary (sd = " << dom.signed_distance(x_hat) << ")";
        throw ContractViolation(msg.str());
    }
}

/// Face axis of a box boundary point, or -1 on edges/corners.
int box_face_axis(const Box& b, const Vec& x, double tol, int* side) {
    int axis = -1;
    int count = 0;
    for (int k = 0; k < x.size(); ++k) {
        if (std::abs(x(k) - b.lo(k)) <= tol) {
            axis = k;
            *side = -1;
            ++count;
        } else if (std::abs(x(k) - b.hi(k)) <= tol) {
            axis = k;
            *side = 1;
            ++count;
        }
    }
    return count == 1 ? axis : -1;
}

}  // namespace

DomainSpec::DomainSpec(Shape shape) : shape_(std::move(shape)) {
    dim_ = std::visit(overloaded{[](const Ball& b) { return static_cast<int>(b.center.size()); },
                                 [](const Box& b) { return static_cast<int>(b.lo.size()); },
                                 [](const Annulus& a) { return static_cast<int>(a.center.size()); },
                                 [](const Implicit& i) { return static_cast<int>(i.lo.size()); }},
                      shape_);
    if (dim_ < 1 || dim_ > kMaxDim) throw ContractViolation("domain dimension must be 1..3");
    std::visit(overloaded{[](const Ball& b) {
                              if (b.radius <= 0.0) throw ContractViolation("ball radius must be positive");
                          },
                          [](const Box& b) {
                              if ((b.hi - b.lo).minCoeff() <= 0.0)
                                  throw ContractViolation("box must have hi > lo");
                          },
                          [](const Annulus& a) {
                              if (!(0.0 <= a.r_in && a.r_in < a.r_out))
                                  throw ContractViolation("annulus needs 0 <= r_in < r_out");
                          },
                          [](const Implicit& i) {
                              if (!i.sdf) throw ContractViolation("implicit domain needs an oracle");
                          }},
               shape_);
}

DomainSpec DomainSpec::empty_of(int dim) {
    DomainSpec d(Ball{Vec::Zero(dim), 1.0});
    d.empty_ = true;
    return d;
}

double DomainSpec::signed_distance(const Vec& x) const {
    if (empty_) return std::numeric_limits<double>::infinity();
    return std::visit(
        overloaded{[&](const Ball& b) { return (x - b.center).norm() - b.radius; },
                   [&](const Box& b) { return box_sdf(x, b.lo, b.hi); },
                   [&](const Annulus& a) {
                       const double rho = (x - a.center).norm();
                       return std::max(rho - a.r_out, a.r_in - rho);
                   },
                   [&](const Implicit& i) { return i.sdf(x); }},
        shape_);
}

BoxRegion DomainSpec::bounding_box() const {
    return std::visit(
        overloaded{[](const Ball& b) {
                       return BoxRegion{Vec(b.center.array() - b.radius), Vec(b.center.array() + b.radius)};
                   },
                   [](const Box& b) { return BoxRegion{b.lo, b.hi}; },
                   [](const Annulus& a) {
                       return BoxRegion{Vec(a.center.array() - a.r_out), Vec(a.center.array() + a.r_out)};
                   },
                   [](const Implicit& i) { return BoxRegion{i.lo, i.hi}; }},
        shape_);
}

std::string DomainSpec::describe() const {
    if (empty_) return "empty";
    std::ostringstream s;
    auto vec = [&s](const Vec& v) {
        s << '(';
        for (int k = 0; k < v.size(); ++k) s << (k ? "," : "") << v(k);
        s << ')';
    };
    std::visit(overloaded{[&](const Ball& b) {
                              s << "Ball";
                              vec(b.center);
                              s << " r=" << b.radius;
                          },
                          [&](const Box& b) {
                              s << "Box";
                              vec(b.lo);
                              vec(b.hi);
                          },
                          [&](const Annulus& a) {
                              s << "Annulus";
                              vec(a.center);
                              s << " " << a.r_in << ".." << a.r_out;
                          },
                          [&](const Implicit& i) { s << "Implicit:" << i.name; }},
               shape_);
    return s.str();
}

double delta_D(const DomainSpec& dom, const Vec& x) {
    if (dom.empty()) return 0.0;
    return std::max(0.0, -dom.signed_distance(x));
}

InteriorBallRadius interior_ball_radius(const DomainSpec& dom, const Vec& x_hat,
                                        const BallCertification& cert) {
    require_boundary_point(dom, x_hat, cert.boundary_tol);
    InteriorBallRadius out;
    out.radius = std::visit(
        overloaded{[](const Ball& b) { return std::min(b.radius, 1.0); },
                   [&](const Box& b) {
                       int side = 0;
                       const int axis = box_face_axis(b, x_hat, cert.boundary_tol, &side);
                       if (axis < 0) return 0.0;
                       double r = std::min(1.0, 0.5 * (b.hi(axis) - b.lo(axis)));
                       for (int j = 0; j < x_hat.size(); ++j)
                           if (j != axis)
                               r = std::min({r, x_hat(j) - b.lo(j), b.hi(j) - x_hat(j)});
                       return std::max(r, 0.0);
                   },
                   [](const Annulus& a) { return std::min(0.5 * (a.r_out - a.r_in), 1.0); },
                   [&](const Implicit&) {
                       const Vec g = sdf_gradient(dom, x_hat);
                       if (g.norm() == 0.0) return 0.0;
                       return bisect_tangent_ball(dom, x_hat, g.normalized(), true, cert,
                                                  &out.certification_points);
                   }},
        dom.shape());
    out.found = out.radius > 0.0;
    return out;
}

std::vector<Vec> generalized_normals(const DomainSpec& dom, const Vec& x_hat,
                                     const BallCertification& cert) {
    require_boundary_point(dom, x_hat, cert.boundary_tol);
    if (!std::holds_alternative<Implicit>(dom.shape())) {
        if (interior_ball_radius(dom, x_hat, cert).radius <= 0.0) return {};
        return {outward_normal(dom, x_hat)};
    }
    std::vector<Vec> candidates;
    const Vec g = sdf_gradient(dom, x_hat);
    if (g.norm() > 0.0) candidates.push_back(g.normalized());
    for (const auto& d : sphere_directions(dom.dim(), cert.directions)) candidates.push_back(d);
    std::vector<Vec> normals;
    for (const auto& n : candidates) {
        if (bisect_tangent_ball(dom, x_hat, n, true, cert, nullptr) <= 0.0) continue;
        const bool dup = std::any_of(normals.begin(), normals.end(),
                                     [&](const Vec& m) { return (m - n).norm() < 1e-9; });
        if (!dup) normals.push_back(n.normalized());
    }
    return normals;
}

bool reachable_set_contains(const DomainSpec& dom, const LevyKernelSpec& kernel, const Vec& z) {
    if (dom.in_closure(z)) return true;
    if (kernel_is_zero(kernel)) return false;
    if (const auto* k = std::get_if<FiniteActivityKernel>(&kernel); k && k->atomic()) {
        for (const auto& a : k->atoms)
            if (a.prob > 0.0 && dom.contains(z - a.y)) return true;
        return false;
    }
    // Minkowski sum with the closed support ball
    return dom.signed_distance(z) <= kernel_support_radius(kernel);
}

DomainSpec shrink(const DomainSpec& dom, double r) {
    if (r < 0.0) throw ContractViolation("shrink radius must be non-negative");
    if (dom.empty()) return dom;
    const int d = dom.dim();
    return std::visit(
        overloaded{[&](const Ball& b) {
                       return b.radius - r > 0.0 ? DomainSpec(Ball{b.center, b.radius - r})
                                                 : DomainSpec::empty_of(d);
                   },
                   [&](const Box& b) {
                       if ((b.hi - b.lo).minCoeff() <= 2.0 * r) return DomainSpec::empty_of(d);
                       return DomainSpec(Box{Vec(b.lo.array() + r), Vec(b.hi.array() - r)});
                   },
                   [&](const Annulus& a) {
                       if (a.r_out - a.r_in <= 2.0 * r) return DomainSpec::empty_of(d);
                       return DomainSpec(Annulus{a.center, a.r_in + r, a.r_out - r});
                   },
                   [&](const Implicit& i) {
                       auto sdf = i.sdf;
                       Implicit out{i.name + "-shrunk", [sdf, r](const Vec& x) { return sdf(x) + r; },
                                    i.lo, i.hi};
                       for (const auto& p : box_lattice({i.lo, i.hi}, d == 1 ? 1025 : 129))
                           if (out.sdf(p) < 0.0) return DomainSpec(out);
                       return DomainSpec::empty_of(d);
                   }},
        dom.shape());
}

AnnulusPair annuli(const Vec& center, double r) {
    if (r <= 0.0) throw ContractViolation("annulus radius must be positive");
    return {DomainSpec(Annulus{center, 0.5 * r, r}), DomainSpec(Annulus{center, 0.5 * r, 1.5 * r})};
}

std::optional<ExteriorBall> exterior_ball(const DomainSpec& dom, const Vec& x_hat,
                                          const BallCertification& cert) {
    require_boundary_point(dom, x_hat, cert.boundary_tol);
    std::vector<Vec> candidates;
    const Vec g = sdf_gradient(dom, x_hat);
    if (g.norm() > 0.0) candidates.push_back(g.normalized());
    for (const auto& d : sphere_directions(dom.dim(), cert.directions)) candidates.push_back(d);
    std::optional<ExteriorBall> best;
    for (const auto& n : candidates) {
        const double r = bisect_tangent_ball(dom, x_hat, n, false, cert, nullptr);
        if (r > 0.0 && (!best || r > best->radius)) best = ExteriorBall{x_hat + r * n, r};
        if (best && best->radius >= 1.0) break;
    }
    return best;
}

NormalDerivative lower_normal_derivative(const std::function<double(const Vec&)>& u,
                                         const Vec& x_hat, const Vec& n, double h_min,
                                         double h_max, const DomainSpec* dom) {
    if (!(h_min > 0.0 && h_min <= h_max)) throw ContractViolation("need 0 < h_min <= h_max");
    NormalDerivative out;
    const double ux = u(x_hat);
    for (double h = h_max; h >= h_min * (1.0 - 1e-12); h *= 0.5) {
        const Vec p = x_hat - h * n;
        if (dom && !dom->contains(p)) continue;
        out.h.push_back(h);
        out.quotients.push_back((ux - u(p)) / h);
    }
    if (out.h.empty()) throw ContractViolation("no admissible step for the normal difference quotient");
    out.value = *std::min_element(out.quotients.begin(), out.quotients.end());
    return out;
}

Vec outward_normal(const DomainSpec& dom, const Vec& x_hat) {
    return std::visit(
        overloaded{[&](const Ball& b) { return Vec((x_hat - b.center).normalized()); },
                   [&](const Annulus& a) {
                       const Vec z = x_hat - a.center;
                       const double rho = z.norm();
                       const double sign = std::abs(rho - a.r_out) <= std::abs(rho - a.r_in) ? 1.0 : -1.0;
                       return Vec(sign * z / rho);
                   },
                   [&](const Box& b) {
                       Vec n = Vec::Zero(x_hat.size());
                       for (int k = 0; k < x_hat.size(); ++k) {
                           if (std::abs(x_hat(k) - b.lo(k)) <= 1e-9) n(k) = -1.0;
                           if (std::abs(x_hat(k) - b.hi(k)) <= 1e-9) n(k) = 1.0;
                       }
                       if (n.norm() == 0.0) throw ContractViolation("point is not on the box boundary");
                       return Vec(n.normalized());
                   },
                   [&](const Implicit&) { return Vec(sdf_gradient(dom, x_hat).normalized()); }},
        dom.shape());
}

Vec project_to_boundary(const DomainSpec& dom, const Vec& x) {
    return std::visit(
        overloaded{[&](const Ball& b) {
                       const Vec z = x - b.center;
                       if (z.norm() == 0.0) return Vec(b.center + b.radius * unit_vec(x.size(), 0));
                       return Vec(b.center + b.radius * z.normalized());
                   },
                   [&](const Annulus& a) {
                       const Vec z = x - a.center;
                       const double rho = z.norm();
                       const double target = std::abs(rho - a.r_out) <= std::abs(rho - a.r_in) ? a.r_out : a.r_in;
                       return Vec(a.center + target * z / rho);
                   },
                   [&](const Box& b) {
                       Vec p = x.cwiseMax(b.lo).cwiseMin(b.hi);
                       if (box_sdf(x, b.lo, b.hi) < 0.0) {
                           int best = 0;
                           double dist = std::numeric_limits<double>::infinity();
                           bool hi_side = false;
                           for (int k = 0; k < x.size(); ++k) {
                               if (x(k) - b.lo(k) < dist) { dist = x(k) - b.lo(k); best = k; hi_side = false; }
                               if (b.hi(k) - x(k) < dist) { dist = b.hi(k) - x(k); best = k; hi_side = true; }
                           }
                           p(best) = hi_side ? b.hi(best) : b.lo(best);
                       }
                       return p;
                   },
                   [&](const Implicit&) {
                       Vec p = x;
                       for (int it = 0; it < 60; ++it) {
                           const double sd = dom.signed_distance(p);
                           if (std::abs(sd) < 1e-13) break;
                           const Vec g = sdf_gradient(dom, p);
                           if (g.squaredNorm() == 0.0) break;
                           p -= sd * g / g.squaredNorm();
                       }
                       return p;
                   }},
        dom.shape());
}

namespace {

double sd_circle_outside(const Vec& x, const Vec& c, double r) { return r - (x - c).norm(); }

}  // namespace

DomainSpec implicit_domain(const std::string& name) {
    if (name == "disk") {
        return DomainSpec(Implicit{name, [](const Vec& x) { return x.norm() - 1.0; },
                                   make_vec({-1, -1}), make_vec({1, 1})});
    }
    if (name == "tangent-disks-cusp") {
        // B(0,1) minus the closed disk B̄((1/2,0),1/2): two outward cusps at (1,0)
        const Vec c2 = make_vec({0.5, 0.0});
        return DomainSpec(Implicit{name,
                                   [c2](const Vec& x) {
                                       return std::max(x.norm() - 1.0, sd_circle_outside(x, c2, 0.5));
                                   },
                                   make_vec({-1, -1}), make_vec({1, 1})});
    }
    if (name == "l-shape") {
        const Vec lo = make_vec({-1, -1}), hi = make_vec({1, 1});
        return DomainSpec(Implicit{name,
                                   [lo, hi](const Vec& x) {
                                       // signed distance of the closed first quadrant
                                       double sq;
                                       if (x(0) >= 0.0 && x(1) >= 0.0) sq = -std::min(x(0), x(1));
                                       else if (x(0) < 0.0 && x(1) < 0.0) sq = x.norm();
                                       else sq = x(0) < 0.0 ? -x(0) : -x(1);
                                       return std::max(box_sdf(x, lo, hi), -sq);
                                   },
                                   lo, hi});
    }
    if (name == "inward-cusp") {
        // B(0,2) minus the closure of a cusp K = {x>0, |y|<1} outside B((0,±1),1);
        // K has its tip at the origin, pointing into D
        const Vec c1 = make_vec({0.0, 1.0}), c2 = make_vec({0.0, -1.0});
        return DomainSpec(Implicit{name,
                                   [c1, c2](const Vec& x) {
                                       const double sk = std::max({-x(0), std::abs(x(1)) - 1.0,
                                                                   sd_circle_outside(x, c1, 1.0),
                                                                   sd_circle_outside(x, c2, 1.0)});
                                       return std::max(x.norm() - 2.0, -sk);
                                   },
                                   make_vec({-2, -2}), make_vec({2, 2})});
    }
    throw ConfigError("unknown implicit domain '" + name + "'");
}

std::vector<std::string> implicit_domain_names() {
    return {"disk", "tangent-disks-cusp", "l-shape", "inward-cusp"};
}

}  // namespace hopflab
