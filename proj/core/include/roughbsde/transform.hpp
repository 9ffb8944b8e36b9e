#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "roughbsde/flow.hpp"
#include "roughbsde/problem.hpp"

namespace rbsde {

/// f~(t, x, y~, z~) = (1 / d_y phi) { f(t, x, phi, d_y phi z~ + d_x phi sigma) + d_x phi b
///                     + 1/2 d_xx phi sigma^2 + z~ d_xy phi sigma + 1/2 d_yy phi z~^2 },
/// with phi and its derivatives taken at (t, x, y~).
class TransformedDriver {
public:
    TransformedDriver(ProblemSpec spec, std::shared_ptr<const FlowEnsemble> flow);

    const ProblemSpec& spec() const noexcept { return spec_; }
    const FlowEnsemble& flow() const noexcept { return *flow_; }
    std::shared_ptr<const FlowEnsemble> flow_ptr() const noexcept { return flow_; }

    double operator()(double t, double x, double yt, double zt) const;
    /// Same value with (t, x) pinned to table node (it, ix); interpolates in y~ only.
    double at_node(std::size_t it, std::size_t ix, double yt, double zt) const;
    /// Uses the re-integrated flow instead of the table.
    double exact(double t, double x, double yt, double zt) const;

    double from_jet(const FlowJet& j, double t, double x, double zt) const;
    /// d f~ / d z~ for a given flow jet (d_z f by central differences).
    double dz_from_jet(const FlowJet& j, double t, double x, double zt) const;

private:
    ProblemSpec spec_;
    std::shared_ptr<const FlowEnsemble> flow_;
};

/// Sampling grid for the growth constants. Time and space samples are drawn from the flow
/// table nodes (at most `points` of each); y~ and z~ are uniform with `points` nodes.
struct SampleWindow {
    double y_lo = -1.0;
    double y_hi = 1.0;
    double z_radius = 10.0;
    std::size_t points = 41;

    static SampleWindow covering(const FlowEnsemble& flow, std::size_t points = 41,
                                 double z_radius = 10.0);
};

struct GrowthConstants {
    double c1f_tilde = 0.0;     // |f~| <= C (1 + z~^2), |d_z~ f~| <= C (1 + |z~|)
    double c_unif_tilde = 0.0;  // d_y~ f~ <= C_unif + kappa(t) z~^2
    double c3f_tilde = 0.0;     // |d_x f~| <= C (1 + z~^2)
};

GrowthConstants estimate_growth_constants(const TransformedDriver& td, const SampleWindow& w);

/// Coefficient kappa(t) in front of |z~|^2 in the bound on d_y~ f~, as a sup over the table's
/// x nodes and y~ nodes at time node `it`; clamped at 0.
double quadratic_y_coefficient(const TransformedDriver& td, std::size_t it);
double quadratic_y_coefficient(const TransformedDriver& td, double t);

/// Exponential tilt lambda(C) = 36 C + sqrt(1296 C^2 + 2) of the BSDE comparison argument.
double comparison_lambda(double c);
/// delta(C, M) = exp(-2 lambda(C) M) / 72 (transformation base B = 6).
double comparison_delta(double c, double m);

struct PdeComparison {
    double k0 = 0.0;
    double k = 0.0;
    double lambda = 0.0;
    double a = 0.0;
    double delta = 0.0;
    double exponent = 0.0;  // 2 lambda M e^{K T}
    bool degenerate = false;
};

/// K0 = C^2 + C + 1, K = max(K0, C_unif) + 1, lambda = 4 C + 4, A = e^{2 lambda M e^{K T}} + 1,
/// delta = 1 / A. When the exponent overflows, A = inf, delta = the smallest positive double
/// and `degenerate` is set.
PdeComparison pde_comparison_constants(double c, double c_unif, double m, double horizon);

enum class ComparisonRoute { bsde, pde };

struct ComparisonConstants {
    ComparisonRoute route = ComparisonRoute::pde;
    double terminal_sup = 0.0;  // ||xi||_inf
    double m = 0.0;
    double b = 6.0;
    double lambda = 0.0;
    double delta = 0.0;
    double k0 = 0.0;
    double k = 0.0;
    double a = 0.0;
    double epsilon = 0.0;
    double h = 0.0;
    GrowthConstants growth;
    bool degenerate = false;
    std::string degenerate_constant;
    bool below_resolution = false;  // h floored at one table step
};

/// M = ||xi|| + T C~1f, epsilon = delta / 2 and the largest h (aligned with the flow's time
/// nodes, measured back from its terminal time) with kappa <= epsilon on [T_e - h, T_e].
ComparisonConstants step_size(const TransformedDriver& td, double terminal_sup, double horizon,
                              ComparisonRoute route, const GrowthConstants& growth);
ComparisonConstants step_size(const TransformedDriver& td, double terminal_sup, double horizon,
                              ComparisonRoute route, const SampleWindow& w);

std::string to_string(ComparisonRoute r);

}  // namespace rbsde
