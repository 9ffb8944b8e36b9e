#pragma once

#include <functional>
#include <memory>
#include <string>

#include "roughbsde/vector_field.hpp"

namespace rbsde {

using CoefficientFn = std::function<double(double t, double x)>;
using DriverFn = std::function<double(double t, double x, double u, double z)>;
using TerminalFn = std::function<double(double x)>;

/// Declared assumption constants of a problem.
struct DeclaredConstants {
    double c_sigma = 1.0;
    double c_b = 0.0;
    double c1f = 0.0;  // |f| <= c1f (1 + |z|^2), |d_z f| <= c1f (1 + |z|)
    double c2f = 0.0;  // d_u f <= c2f
    double c3f = 0.0;  // |d_x f| <= c3f (1 + |z|^2)
};

/// Markovian forward-backward problem with one space and one noise dimension:
///   dX = b(t, X) dt + sigma(t, X) dW,
///   Y_t = g(X_T) + int_t^T f(r, X, Y, Z) dr + int_t^T H(X, Y) dzeta - int_t^T Z dW.
struct ProblemSpec {
    std::string name;
    double horizon = 1.0;
    double t0 = 0.0;
    double x0 = 0.0;
    CoefficientFn sigma;
    CoefficientFn drift;
    DriverFn driver;
    TerminalFn terminal;
    std::shared_ptr<const VectorFieldFamily> field;
    DeclaredConstants constants;

    std::size_t dim() const { return field ? field->dim() : 0; }

    /// Samples the declared bounds on [t0, T] x [x_lo, x_hi] x [-u_max, u_max] x [-10, 10]
    /// (u and z ranges) and throws DomainError naming the first violated constant.
    void validate(double x_lo, double x_hi, double u_max = 4.0) const;

    /// sup |g| over [x_lo, x_hi] (sampled on `points` nodes).
    double terminal_sup(double x_lo, double x_hi, std::size_t points = 401) const;
};

}  // namespace rbsde
