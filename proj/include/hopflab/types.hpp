#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hopflab {

/// Spatial dimensions supported by every module.
inline constexpr int kMaxDim = 3;

/// Position / displacement vector. Dynamic size, stack storage (d <= 3).
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
/// Small square matrix (diffusion coefficients, Hessians).
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline Vec make_vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

inline Vec unit_vec(int dim, int axis) {
    Vec v = Vec::Zero(dim);
    v(axis) = 1.0;
    return v;
}

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Q(x) failed positive (semi)definiteness where it was required.
class EllipticityError : public Error {
public:
    using Error::Error;
};

/// Assembled matrix has a negative off-diagonal entry.
class MonotonicityError : public Error {
public:
    using Error::Error;
};

/// Quadrature or iterative method did not reach its tolerance.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double achieved)
        : Error(what), achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// Barrier constant search hit its cap.
class ConstantSelectionError : public Error {
public:
    using Error::Error;
};

/// Invalid or unknown configuration key/value.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace hopflab
