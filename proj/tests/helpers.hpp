#pragma once

#include "hopflab/operator.hpp"

#include <cmath>

namespace testing_helpers {

using namespace hopflab;

/// ½Δ in dimension d.
inline OperatorSpec half_laplacian(int d) {
    OperatorSpec op;
    op.coeffs = CoefficientField::constant(Mat::Identity(d, d), Vec::Zero(d));
    op.name = "half-laplacian";
    return op;
}

inline OperatorSpec with_drift(int d, const Vec& b) {
    OperatorSpec op;
    op.coeffs = CoefficientField::constant(Mat::Identity(d, d), b);
    return op;
}

/// Unit atoms at ±e1 with total intensity `rate`.
inline OperatorSpec two_point(int d, double diffusion, double rate, double jump = 1.0) {
    OperatorSpec op;
    op.coeffs = CoefficientField::constant(diffusion * Mat::Identity(d, d), Vec::Zero(d));
    op.kernel = FiniteActivityKernel::atomic_law(
        rate, {Atom{jump * unit_vec(d, 0), 0.5}, Atom{-jump * unit_vec(d, 0), 0.5}});
    return op;
}

inline SmoothField quadratic(int d) {
    return {[](const Vec& x) { return x.squaredNorm(); },
            [](const Vec& x) { return Vec(2.0 * x); },
            [d](const Vec&) { return Mat(2.0 * Mat::Identity(d, d)); }};
}

inline SmoothField constant_field(int d, double v) {
    return {[v](const Vec&) { return v; }, [d](const Vec&) { return Vec(Vec::Zero(d)); },
            [d](const Vec&) { return Mat(Mat::Zero(d, d)); }};
}

}  // namespace testing_helpers
