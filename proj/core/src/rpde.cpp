#include "roughbsde/rpde.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "roughbsde/errors.hpp"
#include "tridiagonal.hpp"

namespace rbsde {

namespace {

constexpr double kTimeTol = 1e-12;

// Explicit part evaluated at time node j for spatial node i.
using Source = std::function<double(std::size_t j, std::size_t i, double u, double z)>;
// Applies the H-transport of half step `upper` (true: [t_mid, t_{j+1}]) in place.
using Transport = std::function<void(std::size_t j, bool upper, std::vector<double>& u)>;

double sigma_gradient(const std::vector<double>& u, std::size_t i, double dx) {
    const std::size_t n = u.size();
    if (i == 0) return (u[1] - u[0]) / dx;
    if (i == n - 1) return (u[n - 1] - u[n - 2]) / dx;
    return (u[i + 1] - u[i - 1]) / (2.0 * dx);
}

// March values[jb] back to values[ja] on the (times, xs) grid.
void march(const ProblemSpec& spec, const std::vector<double>& times, const std::vector<double>& xs,
           std::size_t ja, std::size_t jb, std::vector<double>& values, const Source& source,
           const Transport& transport) {
    const std::size_t nx = xs.size();
    const double dx = xs[1] - xs[0];
    std::vector<double> u(values.begin() + static_cast<std::ptrdiff_t>(jb * nx),
                          values.begin() + static_cast<std::ptrdiff_t>((jb + 1) * nx));
    std::vector<double> lower(nx - 2), diag(nx - 2), upper(nx - 2), rhs(nx - 2);
    for (std::size_t j = jb; j-- > ja;) {
        const double t_next = times[j + 1];
        const double t = times[j];
        const double dt = t_next - t;
        if (transport) transport(j, true, u);

        double lu = 0.0, lz = 0.0;
        std::vector<double> src(nx);
        for (std::size_t i = 0; i < nx; ++i) {
            const double s = spec.sigma(t_next, xs[i]);
            const double z = s * sigma_gradient(u, i, dx);
            src[i] = source(j + 1, i, u[i], z);
            const double eu = 1e-6 * std::max(1.0, std::abs(u[i]));
            const double ez = 1e-6 * std::max(1.0, std::abs(z));
            lu = std::max(lu, std::abs(source(j + 1, i, u[i] + eu, z) -
                                       source(j + 1, i, u[i] - eu, z)) / (2.0 * eu));
            lz = std::max(lz, std::abs(source(j + 1, i, u[i], z + ez) -
                                       source(j + 1, i, u[i], z - ez)) / (2.0 * ez));
            if (!std::isfinite(src[i])) {
                throw NumericError("explicit source is not finite at t = " + std::to_string(t_next));
            }
        }
        if (dt * lu > 1.0 || dt * lz * lz > 1.0) {
            const double need = std::min(lu > 0.0 ? 1.0 / lu : dt, lz > 0.0 ? 1.0 / (lz * lz) : dt);
            throw StabilityError("explicit step unstable at t = " + std::to_string(t_next) +
                                     " (dt = " + std::to_string(dt) + ", required <= " +
                                     std::to_string(need) + ")",
                                 need);
        }

        // Interior rows 1..nx-2; the linear extrapolation u_0 = 2u_1 - u_2 (and its mirror)
        // is eliminated into the first and last rows.
        for (std::size_t r = 0; r < nx - 2; ++r) {
            const std::size_t i = r + 1;
            const double s = spec.sigma(t, xs[i]);
            const double b = spec.drift(t, xs[i]);
            const double diff = 0.5 * s * s / (dx * dx);
            const double adv = b / (2.0 * dx);
            const double a = dt * (diff - adv);
            const double e = dt * (diff + adv);
            lower[r] = -a;
            diag[r] = 1.0 + a + e;
            upper[r] = -e;
            rhs[r] = u[i] + dt * src[i];
        }
        if (nx - 2 == 1) {
            // Single interior node: both neighbours are extrapolated from it.
            diag[0] = 1.0;
            lower[0] = upper[0] = 0.0;
        } else {
            diag[0] += 2.0 * lower[0];
            upper[0] -= lower[0];
            lower[0] = 0.0;
            const std::size_t l = nx - 3;
            diag[l] += 2.0 * upper[l];
            lower[l] -= upper[l];
            upper[l] = 0.0;
        }
        detail::solve_tridiagonal(lower, diag, upper, rhs);
        for (std::size_t r = 0; r < nx - 2; ++r) u[r + 1] = rhs[r];
        u[0] = 2.0 * u[1] - u[2];
        u[nx - 1] = 2.0 * u[nx - 2] - u[nx - 3];

        if (transport) transport(j, false, u);
        std::copy(u.begin(), u.end(), values.begin() + static_cast<std::ptrdiff_t>(j * nx));
    }
}

GridSolution empty_solution(const ProblemSpec& spec, const PdeGrids& grids) {
    grids.validate();
    GridSolution sol;
    sol.times = grids.time_grid(spec);
    sol.xs = grids.x_grid(spec);
    sol.values.assign(sol.times.size() * sol.xs.size(), 0.0);
    const std::size_t last = sol.times.size() - 1;
    for (std::size_t i = 0; i < sol.xs.size(); ++i) {
        sol.values[last * sol.xs.size() + i] = spec.terminal(sol.xs[i]);
    }
    return sol;
}

std::vector<DriverPiece> window_pieces(const std::vector<DriverPiece>& all, double ta, double tb) {
    std::vector<DriverPiece> out;
    const double tol = kTimeTol * std::max(1.0, tb);
    for (const auto& p : all) {
        if (p.t_start >= ta - tol && p.t_end <= tb + tol) out.push_back(p);
    }
    return out;
}

}  // namespace

std::pair<double, double> PdeGrids::x_range(const ProblemSpec& spec) const {
    const double hw = half_width > 0.0
                          ? half_width
                          : 4.0 * spec.constants.c_sigma * std::sqrt(spec.horizon) +
                                spec.constants.c_b * spec.horizon;
    return {spec.x0 - hw, spec.x0 + hw};
}

std::vector<double> PdeGrids::time_grid(const ProblemSpec& spec) const {
    return uniform_grid(spec.horizon, nt);
}

std::vector<double> PdeGrids::x_grid(const ProblemSpec& spec) const {
    const auto [lo, hi] = x_range(spec);
    std::vector<double> xs(nx);
    for (std::size_t i = 0; i < nx; ++i) {
        xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(nx - 1);
    }
    return xs;
}

void PdeGrids::validate() const {
    if (nx < 5) throw DomainError("PDE grid needs nx >= 5");
    if (nt < 1) throw DomainError("PDE grid needs nt >= 1");
    if (ny < 4) throw DomainError("flow table needs ny >= 4");
    if (half_width < 0.0) throw DomainError("half_width must be non-negative");
    if (window < 0.0) throw DomainError("window must be non-negative");
    if (!(flow_max_step > 0.0)) throw DomainError("flow_max_step must be positive");
}

double GridSolution::interpolate(std::size_t it, double x) const {
    const std::size_t n = xs.size();
    if (x <= xs.front()) return at(it, 0);
    if (x >= xs.back()) return at(it, n - 1);
    const double dx = xs[1] - xs[0];
    auto i = static_cast<std::size_t>((x - xs.front()) / dx);
    i = std::min(i, n - 2);
    const double w = (x - xs[i]) / dx;
    return (1.0 - w) * at(it, i) + w * at(it, i + 1);
}

std::size_t GridSolution::time_index(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t - kTimeTol);
    if (it == times.end() || std::abs(*it - t) > kTimeTol * std::max(1.0, std::abs(t))) {
        throw DomainError("t = " + std::to_string(t) + " is not a node of the solution grid");
    }
    return static_cast<std::size_t>(it - times.begin());
}

double GridSolution::value_at(double t, double x) const { return interpolate(time_index(t), x); }

GridSolution solve_pde_smooth(const ProblemSpec& spec, const PiecewiseLinearPath& zeta,
                              const PdeGrids& grids) {
    if (!spec.field || spec.field->dim() != zeta.dim()) {
        throw DomainError("driver dimension does not match the vector field family");
    }
    GridSolution sol = empty_solution(spec, grids);
    const auto& times = sol.times;
    const auto& xs = sol.xs;
    const Source source = [&](std::size_t j, std::size_t i, double u, double z) {
        return spec.driver(times[j], xs[i], u, z);
    };
    Transport transport;
    if (!spec.field->is_zero()) {
        transport = [&](std::size_t j, bool upper, std::vector<double>& u) {
            const double mid = 0.5 * (times[j] + times[j + 1]);
            const auto pieces = upper ? driver_pieces(zeta, mid, times[j + 1])
                                      : driver_pieces(zeta, times[j], mid);
            for (std::size_t i = 0; i < u.size(); ++i) {
                u[i] = transport_backward(*spec.field, pieces, xs[i], u[i], grids.flow_max_step);
            }
        };
    }
    march(spec, times, xs, 0, times.size() - 1, sol.values, source, transport);
    return sol;
}

GlobalSetup rpde_setup(const ProblemSpec& spec, const std::vector<DriverPiece>& pieces,
                       const PdeGrids& grids, ComparisonRoute route,
                       std::pair<double, double> x_range) {
    const auto times = grids.time_grid(spec);
    const double gsup = spec.terminal_sup(x_range.first, x_range.second);
    double ylim = gsup + spec.horizon * spec.constants.c1f + 1.0;

    FlowGridSpec fg;
    fg.times = times;
    fg.x_lo = x_range.first;
    fg.x_hi = x_range.second;
    fg.nx = std::min<std::size_t>(grids.nx, 41);
    fg.ny = std::min<std::size_t>(grids.ny, 21);
    fg.max_step = grids.flow_max_step;

    GlobalSetup out;
    for (int attempt = 0; attempt < 2; ++attempt) {
        fg.y_lo = -ylim;
        fg.y_hi = ylim;
        auto flow = std::make_shared<const FlowEnsemble>(solve_flow(spec.field, pieces, fg));
        const TransformedDriver td(spec, flow);
        const GrowthConstants growth = estimate_growth_constants(
            td, SampleWindow::covering(*flow, grids.sample_points, grids.z_radius));
        out.constants = step_size(td, gsup, spec.horizon, route, growth);
        if (out.constants.m + 1.0 <= ylim) break;
        ylim = out.constants.m + 1.0;
    }

    const double dt = times[1] - times[0];
    const std::size_t nt = times.size() - 1;
    std::size_t steps;
    if (grids.window > 0.0) {
        steps = static_cast<std::size_t>(std::llround(grids.window / dt));
    } else {
        steps = static_cast<std::size_t>(std::llround(out.constants.h / dt));
        if (out.constants.degenerate && steps < nt) {
            throw DegenerateWindowError(
                "comparison constant " + out.constants.degenerate_constant +
                    " overflowed, so no admissible window below T can be derived; set an "
                    "explicit window to proceed",
                out.constants.degenerate_constant);
        }
    }
    out.steps_per_window = std::clamp<std::size_t>(steps, 1, nt);
    out.h = static_cast<double>(out.steps_per_window) * dt;
    return out;
}

GridSolution solve_rpde(const ProblemSpec& spec, const RoughPath2& rp, const PdeGrids& grids) {
    if (!(rp.p() < 3.0)) throw UnsupportedError("rough PDEs need p < 3");
    if (!spec.field || spec.field->dim() != rp.dim()) {
        throw DomainError("driver dimension does not match the vector field family");
    }
    GridSolution sol = empty_solution(spec, grids);
    const auto& times = sol.times;
    const auto& xs = sol.xs;
    const std::size_t nx = xs.size();
    const auto pieces = driver_pieces(rp, 0.0, spec.horizon, times);
    const GlobalSetup setup =
        rpde_setup(spec, pieces, grids, ComparisonRoute::pde, {xs.front(), xs.back()});
    sol.constants = setup.constants;
    sol.constants->h = setup.h;
    sol.m_bound = setup.constants.m;
    const double c1f = setup.constants.growth.c1f_tilde;

    // v is marched in its own buffer; u is written into sol.values window by window.
    std::vector<double> v(sol.values.size(), 0.0);
    std::size_t jb = times.size() - 1;
    while (jb > 0) {
        const std::size_t ja = jb >= setup.steps_per_window ? jb - setup.steps_per_window : 0;
        const double ta = times[ja];
        const double tb = times[jb];
        PdeWindow win;
        win.t_start = ta;
        win.t_end = tb;
        double usup = 0.0;
        for (std::size_t i = 0; i < nx; ++i) usup = std::max(usup, std::abs(sol.at(jb, i)));
        win.m_bound = usup + (tb - ta) * c1f;
        // |v| <= M on the window, but M can be far larger than the data when C~1f is a loose
        // sampled bound; a table sized to the data keeps the y spacing fine and is widened to
        // the full bound only if v leaves it.
        const double ylim_full = win.m_bound + 1.0;
        double ylim = std::min(win.m_bound, 2.0 * usup + 1.0) + 1.0;

        const std::vector<double> wtimes(times.begin() + static_cast<std::ptrdiff_t>(ja),
                                         times.begin() + static_cast<std::ptrdiff_t>(jb + 1));
        const auto wpieces = window_pieces(pieces, ta, tb);
        std::shared_ptr<const FlowEnsemble> flow;
        for (int attempt = 0;; ++attempt) {
            FlowGridSpec fg;
            fg.times = wtimes;
            fg.x_lo = xs.front();
            fg.x_hi = xs.back();
            fg.nx = nx;
            fg.y_lo = -ylim;
            fg.y_hi = ylim;
            fg.ny = grids.ny;
            fg.max_step = grids.flow_max_step;
            flow = std::make_shared<const FlowEnsemble>(solve_flow(spec.field, wpieces, fg));
            const TransformedDriver td(spec, flow);
            // At the restart time the flow is the identity, so v(tb) = u(tb).
            std::copy(sol.values.begin() + static_cast<std::ptrdiff_t>(jb * nx),
                      sol.values.begin() + static_cast<std::ptrdiff_t>((jb + 1) * nx),
                      v.begin() + static_cast<std::ptrdiff_t>(jb * nx));
            const Source source = [&](std::size_t j, std::size_t i, double y, double z) {
                return td.at_node(j - ja, i, y, z);
            };
            try {
                march(spec, times, xs, ja, jb, v, source, {});
                break;
            } catch (const DomainError&) {
                if (ylim > ylim_full) throw;
                ylim = ylim < ylim_full ? ylim_full : 2.0 * ylim + 1.0;
                win.rebuilt = true;
            }
        }
        win.y_lo = -ylim;
        win.y_hi = ylim;

        for (std::size_t j = ja; j <= jb; ++j) {
            for (std::size_t i = 0; i < nx; ++i) {
                win.max_abs_v = std::max(win.max_abs_v, std::abs(v[j * nx + i]));
            }
        }
        for (std::size_t j = ja; j < jb; ++j) {
            for (std::size_t i = 0; i < nx; ++i) {
                const double vv = v[j * nx + i];
                if (!flow->contains_y(vv)) {
                    throw DomainError("transformed solution left the flow table at t = " +
                                      std::to_string(times[j]));
                }
                sol.values[j * nx + i] = flow->eval_node(j - ja, i, vv).phi;
            }
        }
        for (std::size_t i = 0; i < nx; i += 4) {
            const double u = sol.at(ja, i);
            const double back = invert_flow(*flow, ta, xs[i], u);
            win.roundtrip_residual = std::max(win.roundtrip_residual, std::abs(back - v[ja * nx + i]));
            const double edge = std::min(win.m_bound, ylim);
            win.u_bound = std::max({win.u_bound, std::abs(flow->eval_node(0, i, edge).phi),
                                    std::abs(flow->eval_node(0, i, -edge).phi)});
        }
        sol.windows.push_back(win);
        jb = ja;
    }
    std::reverse(sol.windows.begin(), sol.windows.end());
    return sol;
}

namespace {

double sup_distance_impl(const GridSolution& a, const GridSolution& b, double center, double radius,
                         const std::span<const double>* at_times) {
    if (a.times.size() != b.times.size() || a.xs.size() != b.xs.size()) {
        throw DomainError("solutions live on different grids");
    }
    double d = 0.0;
    for (std::size_t it = 0; it < a.times.size(); ++it) {
        if (at_times) {
            const double t = a.times[it];
            const bool hit = std::any_of(at_times->begin(), at_times->end(),
                                         [t](double s) { return std::abs(s - t) <= 1e-12; });
            if (!hit) continue;
        }
        for (std::size_t ix = 0; ix < a.xs.size(); ++ix) {
            if (std::abs(a.xs[ix] - center) > radius + 1e-12) continue;
            d = std::max(d, std::abs(a.at(it, ix) - b.at(it, ix)));
        }
    }
    return d;
}

}  // namespace

double sup_distance(const GridSolution& a, const GridSolution& b, double center, double radius) {
    return sup_distance_impl(a, b, center, radius, nullptr);
}

double sup_distance(const GridSolution& a, const GridSolution& b, double center, double radius,
                    std::span<const double> at_times) {
    return sup_distance_impl(a, b, center, radius, &at_times);
}

namespace {

bool knots_on_grid(const PiecewiseLinearPath& path, std::span<const double> grid) {
    if (std::abs(path.horizon() - grid.back()) > kTimeTol) return false;
    for (double t : path.times()) {
        auto it = std::lower_bound(grid.begin(), grid.end(), t - kTimeTol);
        if (it == grid.end() || std::abs(*it - t) > kTimeTol) return false;
    }
    return true;
}

}  // namespace

ConvergenceReport convergence_study(const ProblemSpec& spec,
                                    std::span<const PiecewiseLinearPath> drivers,
                                    std::span<const std::string> labels, const RoughPath2* limit,
                                    const PdeGrids& grids, double radius,
                                    std::span<const double> at_times) {
    ConvergenceReport rep;
    auto dist = [&](const GridSolution& a, const GridSolution& b) {
        return at_times.empty() ? sup_distance(a, b, spec.x0, radius)
                                : sup_distance(a, b, spec.x0, radius, at_times);
    };
    std::optional<GridSolution> lim;
    if (limit) {
        lim = solve_rpde(spec, *limit, grids);
        rep.limit_value_at_x0 = lim->value_at(spec.t0, spec.x0);
    }
    std::optional<GridSolution> prev;
    for (std::size_t k = 0; k < drivers.size(); ++k) {
        ConvergenceRow row;
        row.label = k < labels.size() ? labels[k] : std::to_string(k);
        GridSolution u = solve_pde_smooth(spec, drivers[k], grids);
        row.value_at_x0 = u.value_at(spec.t0, spec.x0);
        if (lim) {
            row.distance_to_limit = dist(u, *lim);
            if (knots_on_grid(drivers[k], limit->times())) {
                const RoughPath2 lifted =
                    lift_smooth(drivers[k].resampled(limit->times()), limit->p());
                row.rough_distance = p_variation_distance(lifted, *limit);
            }
        }
        if (prev) {
            row.distance_to_previous = dist(u, *prev);
            row.all_times_distance_to_previous = sup_distance(u, *prev, spec.x0, radius);
        }
        rep.rows.push_back(row);
        prev = std::move(u);
    }
    for (std::size_t k = 2; k < rep.rows.size(); ++k) {
        if (!(rep.rows[k].distance_to_previous < rep.rows[k - 1].distance_to_previous)) {
            if (rep.successive_monotone) rep.first_non_monotone = k;
            rep.successive_monotone = false;
        }
    }
    if (lim) {
        for (std::size_t k = 1; k < rep.rows.size(); ++k) {
            if (!(rep.rows[k].distance_to_limit < rep.rows[k - 1].distance_to_limit)) {
                rep.limit_monotone = false;
            }
        }
    }
    return rep;
}

}  // namespace rbsde
