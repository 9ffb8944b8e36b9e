#pragma once

#include <cstddef>
#include <vector>

#include <roughbsde/rough_path.hpp>

// Reference computations that share no code with the library.
namespace oracle {

/// Levy area 1/2 int (x^i dx^j - x^j dx^i) of a piecewise-linear path by a midpoint
/// Riemann-Stieltjes sum with `sub` subdivisions per segment.
double levy_area(const rbsde::PiecewiseLinearPath& path, std::size_t i, std::size_t j,
                 std::size_t sub = 64);

/// Homogeneous p-variation of the level-1 increments over all partitions drawn from the
/// knots, by exhaustive subset enumeration (knots <= 16).
double brute_force_p_variation(const std::vector<double>& values, double p);

/// phi(t, x, y) = y exp(x (T - t)) for H(x, y) = x y and zeta(t) = t, with the jet the
/// transformed driver uses.
struct XyJet {
    double phi, px, py, pxx, pxy, pyy;
};
XyJet xy_flow(double t, double x, double y, double horizon);

/// f~ for f = 0, sigma = 1, b = 0 written out by hand from the closed-form xy flow.
double xy_transformed_driver(double t, double x, double yt, double zt, double horizon);

}  // namespace oracle
