#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "roughbsde/problem.hpp"
#include "roughbsde/rough_path.hpp"
#include "roughbsde/transform.hpp"

namespace rbsde {

/// Default sup-norm tolerance attributed to the finite-difference scheme at default grids.
inline constexpr double kFdTolerance = 1e-2;

struct PdeGrids {
    std::size_t nx = 161;
    std::size_t nt = 200;
    double half_width = 0.0;  // 0: 4 C_sigma sqrt(T) + C_b T around x0
    std::size_t ny = 41;      // y~ nodes of each window's flow table
    double flow_max_step = 0.02;
    double window = 0.0;      // > 0 overrides the comparison window h (rounded to time steps)
    std::size_t sample_points = 41;
    double z_radius = 10.0;

    std::pair<double, double> x_range(const ProblemSpec& spec) const;
    std::vector<double> time_grid(const ProblemSpec& spec) const;
    std::vector<double> x_grid(const ProblemSpec& spec) const;
    void validate() const;
};

/// One stitched window of a rough PDE solve.
struct PdeWindow {
    double t_start = 0.0;
    double t_end = 0.0;
    double m_bound = 0.0;   // sup |v| bound used for the flow's y~ range
    double y_lo = 0.0;
    double y_hi = 0.0;
    double roundtrip_residual = 0.0;  // max |psi(t, x, u) - v| at t_start
    double u_bound = 0.0;   // max_x |phi(t_start, x, +-min(m_bound, y_hi))|
    double max_abs_v = 0.0; // max |v| over the window's (t, x) nodes
    bool rebuilt = false;   // the data-sized y~ range had to be widened
};

/// Values on a (t, x) grid; values are stored time-major.
struct GridSolution {
    std::string representation = "u";
    std::vector<double> times;
    std::vector<double> xs;
    std::vector<double> values;
    std::vector<PdeWindow> windows;
    std::optional<ComparisonConstants> constants;
    double m_bound = std::numeric_limits<double>::quiet_NaN();

    std::size_t nt() const { return times.size(); }
    std::size_t nx() const { return xs.size(); }
    double at(std::size_t it, std::size_t ix) const { return values[it * xs.size() + ix]; }
    std::span<const double> slice(std::size_t it) const {
        return {values.data() + it * xs.size(), xs.size()};
    }
    /// Linear interpolation in x at time node `it`.
    double interpolate(std::size_t it, double x) const;
    /// Value at (t, x) with t a time node (within 1e-12) and x interpolated linearly.
    double value_at(double t, double x) const;
    std::size_t time_index(double t) const;
};

/// Backward finite differences for d_t u + 1/2 sigma^2 u_xx + b u_x + f(t, x, u, sigma u_x)
/// + H(x, u) dzeta = 0, u(T) = g. Diffusion and drift are implicit, f explicit, and the H term is
/// applied by Strang splitting as the exact transport along each half step of zeta.
GridSolution solve_pde_smooth(const ProblemSpec& spec, const PiecewiseLinearPath& zeta,
                              const PdeGrids& grids);

/// Rough PDE through the flow transformation on stitched windows of length h.
GridSolution solve_rpde(const ProblemSpec& spec, const RoughPath2& rp, const PdeGrids& grids);

/// Global comparison constants used by the stitched solvers (built on a coarse global flow).
struct GlobalSetup {
    ComparisonConstants constants;
    double h = 0.0;                 // window length after rounding / override
    std::size_t steps_per_window = 1;
};
GlobalSetup rpde_setup(const ProblemSpec& spec, const std::vector<DriverPiece>& pieces,
                       const PdeGrids& grids, ComparisonRoute route,
                       std::pair<double, double> x_range);

/// sup over all time nodes and |x - center| <= radius of |a - b| (same grids required).
double sup_distance(const GridSolution& a, const GridSolution& b, double center, double radius);

/// Same as above but only over the time nodes that coincide with one of `at_times`.
double sup_distance(const GridSolution& a, const GridSolution& b, double center, double radius,
                    std::span<const double> at_times);

struct ConvergenceRow {
    std::string label;
    double rough_distance = std::numeric_limits<double>::quiet_NaN();
    double distance_to_limit = std::numeric_limits<double>::quiet_NaN();
    double distance_to_previous = std::numeric_limits<double>::quiet_NaN();
    double all_times_distance_to_previous = std::numeric_limits<double>::quiet_NaN();
    double value_at_x0 = 0.0;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    double limit_value_at_x0 = std::numeric_limits<double>::quiet_NaN();
    bool successive_monotone = true;  // distance_to_previous decreasing
    bool limit_monotone = true;       // distance_to_limit decreasing
    std::size_t first_non_monotone = 0;
};

/// Solves the smooth PDE for each driver and, if given, the rough PDE for the limit; distances
/// are sup-norms over |x - x0| <= radius and the time nodes in `at_times` (all nodes when
/// empty). The all-times distance between successive drivers is reported alongside.
/// Rough-path distances are reported when every driver knot is a node of the limit's grid.
ConvergenceReport convergence_study(const ProblemSpec& spec,
                                    std::span<const PiecewiseLinearPath> drivers,
                                    std::span<const std::string> labels,
                                    const RoughPath2* limit, const PdeGrids& grids,
                                    double radius = 1.0,
                                    std::span<const double> at_times = {});

}  // namespace rbsde
