#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "roughbsde/rough_path.hpp"
#include "roughbsde/vector_field.hpp"

namespace rbsde {

/// phi and the derivative family the transformed driver is written in, at one (t, x, y).
struct FlowJet {
    double phi = 0.0;
    double px = 0.0;
    double py = 1.0;
    double pxx = 0.0;
    double pxy = 0.0;
    double pyy = 0.0;
    double pyyy = 0.0;
    double pxyy = 0.0;
    double pxxy = 0.0;

    static constexpr std::size_t size = 9;

    static FlowJet identity(double y) { return FlowJet{y}; }
    std::array<double, size> to_array() const;
    static FlowJet from_array(const std::array<double, size>& a);
};

/// One step of the driving signal, expressed through its log-signature: the increment
/// and the antisymmetric area over [t_start, t_end] (area is zero for linear pieces).
struct DriverPiece {
    double t_start = 0.0;
    double t_end = 0.0;
    std::vector<double> increment;
    std::vector<double> area;  // d x d, row-major
    bool has_area = false;
};

/// Pieces covering [t0, te], split at every knot/grid point and every breakpoint.
/// Pieces that cut a rough-path interval inherit a proportional share of its increment
/// and area (log-linear interpolation).
std::vector<DriverPiece> driver_pieces(const PiecewiseLinearPath& path, double t0, double te,
                                       std::span<const double> breakpoints = {});
std::vector<DriverPiece> driver_pieces(const RoughPath2& rp, double t0, double te,
                                       std::span<const double> breakpoints = {});

/// Tabulation layout and integrator settings for a flow.
struct FlowGridSpec {
    std::vector<double> times;  // ascending; front() = window start, back() = terminal time
    double x_lo = -1.0;
    double x_hi = 1.0;
    std::size_t nx = 21;
    double y_lo = -1.0;
    double y_hi = 1.0;
    std::size_t ny = 21;
    double max_step = 0.02;  // RK4 sub-step cap, in units of C_H * (|increment| + 2|area|)
    bool self_check = true;
    double self_check_tol = 1e-7;
};

/// Tabulated backward flow phi(t, x, y) = y + int_t^{T_e} H(x, phi(r, x, y)) dzeta(r) on a
/// window [t0, T_e], together with its x/y derivative family.
///
/// Off-node evaluation uses tensor-product 4-point Lagrange interpolation in (t, x, y).
/// `eval_exact` re-integrates the extended system at one point instead; the discrete
/// derivatives it returns are exact derivatives of the discrete phi.
class FlowEnsemble {
public:
    double t0() const noexcept { return times_.front(); }
    double te() const noexcept { return times_.back(); }
    std::span<const double> times() const noexcept { return times_; }
    double x_lo() const noexcept { return x_lo_; }
    double x_hi() const noexcept { return x_hi_; }
    std::size_t nx() const noexcept { return nx_; }
    double dx() const noexcept { return dx_; }
    double x_node(std::size_t ix) const noexcept { return x_lo_ + dx_ * static_cast<double>(ix); }
    double y_lo() const noexcept { return y_lo_; }
    double y_hi() const noexcept { return y_hi_; }
    std::size_t ny() const noexcept { return ny_; }
    double dy() const noexcept { return dy_; }
    double y_node(std::size_t iy) const noexcept { return y_lo_ + dy_ * static_cast<double>(iy); }
    bool is_identity() const noexcept { return identity_; }
    std::size_t dim() const noexcept { return field_->dim(); }
    const VectorFieldFamily& field() const noexcept { return *field_; }

    FlowJet node(std::size_t it, std::size_t ix, std::size_t iy) const;
    FlowJet eval(double t, double x, double y) const;
    /// Interpolates in y only; (it, ix) must be table nodes.
    FlowJet eval_node(std::size_t it, std::size_t ix, double y) const;
    FlowJet eval_exact(double t, double x, double y) const;

    std::optional<std::size_t> time_index(double t) const;
    bool contains_y(double y) const noexcept { return y >= y_lo_ && y <= y_hi_; }
    bool contains_x(double x) const noexcept { return x >= x_lo_ - 1e-12 && x <= x_hi_ + 1e-12; }

    /// max over the table of |px|, |py|, 1/py, |pxx|, |pxy|, |pyy|, |pyyy|, |pxyy|, |pxxy|.
    double uniform_bound() const noexcept { return uniform_bound_; }
    double min_py() const noexcept { return min_py_; }

    /// max over (x, y) nodes at time node `it` of the eight deviations that vanish at T_e.
    double deviation_at(std::size_t it) const;

private:
    friend class FlowBuilder;

    std::shared_ptr<const VectorFieldFamily> field_;
    std::vector<DriverPiece> pieces_;
    std::vector<double> times_;
    double x_lo_ = 0.0, x_hi_ = 0.0, dx_ = 1.0;
    double y_lo_ = 0.0, y_hi_ = 0.0, dy_ = 1.0;
    std::size_t nx_ = 1, ny_ = 1;
    double max_step_ = 0.02;
    bool identity_ = false;
    std::vector<double> data_;  // ((it * nx + ix) * ny + iy) * 9 + q
    double uniform_bound_ = 1.0;
    double min_py_ = 1.0;
};

FlowEnsemble solve_flow_smooth(std::shared_ptr<const VectorFieldFamily> field,
                               const PiecewiseLinearPath& zeta, FlowGridSpec grid);

/// Flow for pre-cut driver pieces; every table time must be a piece boundary and the pieces
/// must cover [times.front(), times.back()].
FlowEnsemble solve_flow(std::shared_ptr<const VectorFieldFamily> field,
                        std::vector<DriverPiece> pieces, FlowGridSpec grid);

/// Second-order (log-ODE) scheme on the rough path's intervals; p >= 3 is rejected.
FlowEnsemble solve_flow_rough(std::shared_ptr<const VectorFieldFamily> field,
                              const RoughPath2& rp, FlowGridSpec grid);

/// y-inverse psi(t, x, y) by Newton on y -> phi(t, x, y).
/// Throws DomainError when y is outside phi(t, x, [y_lo, y_hi]) and NumericError after
/// 100 iterations without reaching |phi - y| < 1e-10 (1 + |y|).
double invert_flow(const FlowEnsemble& flow, double t, double x, double y, bool exact = false);

struct IdentityResiduals {
    double psi_x = 0.0;   // psi_x  = -phi_x / phi_y
    double psi_y = 0.0;   // psi_y  = 1 / phi_y
    double psi_yy = 0.0;  // psi_yy = -phi_yy / phi_y^3
    double psi_xy = 0.0;  // psi_xy = phi_yy phi_x / phi_y^3 - phi_xy / phi_y^2
    double psi_xx = 0.0;  // psi_xx = -phi_yy phi_x^2 / phi_y^3 + 2 phi_x phi_xy / phi_y^2 - phi_xx / phi_y

    double max() const;
};

/// Samples are (t, x, y~) with y~ in the tabulated range; psi derivatives come from central
/// differences of the exact inverse around y = phi(t, x, y~).
IdentityResiduals derivative_identity_residuals(const FlowEnsemble& flow,
                                                std::span<const std::array<double, 3>> samples,
                                                double fd_step = 1e-3);

struct SmallnessWindow {
    double h = 0.0;
    double uniform_bound = 0.0;
    bool below_resolution = false;
};

/// Largest node-aligned h with all eight flow deviations below eps on [T_e - h, T_e].
SmallnessWindow flow_smallness_window(const FlowEnsemble& flow, double eps);

/// Scalar backward transport y -> phi(t_start(pieces.front()), x, y) over the given pieces,
/// integrated with the same scheme as the tabulated flow (no derivative family).
double transport_backward(const VectorFieldFamily& field, std::span<const DriverPiece> pieces,
                          double x, double y, double max_step = 0.02);

}  // namespace rbsde
