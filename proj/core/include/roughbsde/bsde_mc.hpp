#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "roughbsde/flow.hpp"
#include "roughbsde/problem.hpp"
#include "roughbsde/rough_path.hpp"
#include "roughbsde/rpde.hpp"
#include "roughbsde/transform.hpp"

namespace rbsde {

/// Simulated forward paths and the backward processes along them. Every per-path array is
/// stored time-major: entry (k, p) lives at k * n_paths + p.
struct BsdePaths {
    std::vector<double> times;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::vector<double> x;       // (nt + 1) x n_paths
    std::vector<double> dw;      // nt x n_paths
    std::vector<double> y_tilde; // (nt + 1) x n_paths
    std::vector<double> z_tilde; // nt x n_paths
    std::vector<double> y;       // (nt + 1) x n_paths
    std::vector<double> z;       // nt x n_paths

    std::size_t steps() const { return times.size() - 1; }
    std::span<const double> x_at(std::size_t k) const { return {x.data() + k * n_paths, n_paths}; }
};

/// Euler-Maruyama for dX = b dt + sigma dW from (0, x0); path p draws from its own stream.
BsdePaths simulate_forward(const ProblemSpec& spec, std::span<const double> grid,
                           std::size_t n_paths, std::uint64_t seed);

struct RegressionSpec {
    int degree = 4;
    int picard = 1;  // extra fixed-point passes with the fitted Y~_k as driver argument
    /// Truncate each fitted Y~_k to [min, max] of its regression targets; a conditional
    /// expectation cannot leave that range, a global polynomial fit can.
    bool range_truncation = true;
};

struct RegressionReport {
    int degree_used = 0;              // smallest degree used where X_k is not constant
    bool degree_reduced = false;
    double max_abs_raw = 0.0;         // largest |Y~| straight from the polynomial fit
    double range_truncated_fraction = 0.0;
    double clipped_fraction = 0.0;    // share of (k, path) values that hit [-clip, clip]
};

/// Backward regression on steps [k_start, k_end) of `paths`, starting from Y~_{k_end} =
/// terminal. Z~_k fits Y~_{k+1} dW_k / dt and Y~_k fits Y~_{k+1} + f~(t_k, X_k, proxy, Z~_k) dt
/// on global polynomials in X_k; Y~ is truncated to the target range (optional) and then
/// clipped to [-clip, clip].
RegressionReport solve_bsde_regression(const TransformedDriver& td, std::span<const double> terminal,
                                       BsdePaths& paths, std::size_t k_start, std::size_t k_end,
                                       const RegressionSpec& reg, double clip);

/// Y = phi(t, X, Y~), Z = d_y phi Z~ + d_x phi sigma on steps [k_start, k_end]. Returns the
/// fraction of Y~ values that had to be clipped into the flow table.
double untransform_solution(const FlowEnsemble& flow, const ProblemSpec& spec, BsdePaths& paths,
                            std::size_t k_start, std::size_t k_end);

struct McConfig {
    std::size_t n_paths = 10000;
    std::size_t nt = 100;
    std::uint64_t seed = 1;
    RegressionSpec regression;
    std::size_t flow_nx = 81;
    std::size_t flow_ny = 41;
    double flow_max_step = 0.02;
    double window = 0.0;  // > 0 overrides the comparison window
    std::size_t sample_points = 21;
    double z_radius = 10.0;

    void validate() const;
};

struct McWindow {
    double t_start = 0.0;
    double t_end = 0.0;
    double m_bound = 0.0;  // sup |terminal| + (t_end - t_start) C~1f; Y~ is clipped at m_bound + 1
    double x_lo = 0.0;
    double x_hi = 0.0;
    RegressionReport regression;
    double untransform_clipped = 0.0;
    double max_abs_y_tilde = 0.0;
    bool rebuilt = false;  // the data-sized y~ table had to be widened to m_bound + 1
};

struct BsdeSolution {
    BsdePaths paths;
    std::vector<McWindow> windows;
    ComparisonConstants constants;
    double h = 0.0;
    double y0 = 0.0;
    double y0_se = 0.0;  // standard error of the pathwise estimator on the first window
    double z0 = 0.0;
};

/// Stitched regression solve. The window length is `h_override` when given, else `mc.window`,
/// else the comparison window from the BSDE route.
BsdeSolution solve_bsde(const ProblemSpec& spec, const PiecewiseLinearPath& zeta,
                        const McConfig& mc, std::optional<double> h_override = std::nullopt);
BsdeSolution solve_bsde(const ProblemSpec& spec, const RoughPath2& rp, const McConfig& mc,
                        std::optional<double> h_override = std::nullopt);

struct FeynmanKacReport {
    double mc_value = 0.0;
    double mc_standard_error = 0.0;
    double fd_value = 0.0;
    double discrepancy = 0.0;
    double tolerance = 0.0;  // 3 SE + FD tolerance
    bool pass = false;
    double h = 0.0;
    std::size_t windows = 0;
};

/// Compares Y_{t0} from the regression route with u(t0, x0) from the finite-difference route,
/// both stitched with the PDE solver's window.
FeynmanKacReport feynman_kac_check(const ProblemSpec& spec, const PiecewiseLinearPath& zeta,
                                   const PdeGrids& grids, const McConfig& mc,
                                   double fd_tolerance = kFdTolerance);
FeynmanKacReport feynman_kac_check(const ProblemSpec& spec, const RoughPath2& rp,
                                   const PdeGrids& grids, const McConfig& mc,
                                   double fd_tolerance = kFdTolerance);

}  // namespace rbsde
