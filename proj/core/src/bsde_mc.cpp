#include "roughbsde/bsde_mc.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "roughbsde/errors.hpp"
#include "roughbsde/rng.hpp"

namespace rbsde {

BsdePaths simulate_forward(const ProblemSpec& spec, std::span<const double> grid,
                           std::size_t n_paths, std::uint64_t seed) {
    if (n_paths == 0) throw DomainError("need at least one path");
    if (grid.size() < 2) throw DomainError("time grid needs at least 2 nodes");
    BsdePaths p;
    p.times.assign(grid.begin(), grid.end());
    p.n_paths = n_paths;
    p.seed = seed;
    const std::size_t nt = p.steps();
    p.x.assign((nt + 1) * n_paths, 0.0);
    p.dw.assign(nt * n_paths, 0.0);
    p.y_tilde.assign((nt + 1) * n_paths, 0.0);
    p.z_tilde.assign(nt * n_paths, 0.0);
    p.y.assign((nt + 1) * n_paths, 0.0);
    p.z.assign(nt * n_paths, 0.0);
    for (std::size_t i = 0; i < n_paths; ++i) {
        CounterRng rng(seed, i);
        double x = spec.x0;
        p.x[i] = x;
        for (std::size_t k = 0; k < nt; ++k) {
            const double t = p.times[k];
            const double dt = p.times[k + 1] - t;
            const double dw = std::sqrt(dt) * rng.normal();
            x += spec.drift(t, x) * dt + spec.sigma(t, x) * dw;
            p.dw[k * n_paths + i] = dw;
            p.x[(k + 1) * n_paths + i] = x;
        }
    }
    return p;
}

namespace {

// Least-squares projection onto polynomials of the standardized regressor.
class Projector {
public:
    Projector(std::span<const double> x, int degree) {
        const auto n = static_cast<Eigen::Index>(x.size());
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(x.size());
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        var /= static_cast<double>(x.size());
        const double sd = std::sqrt(var);
        constant_ = !(sd > 1e-12 * (1.0 + std::abs(mean)));
        if (constant_) degree = 0;
        requested_ = degree;
        for (int d = degree; d >= 0; --d) {
            design_.resize(n, d + 1);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double s = d > 0 ? (x[static_cast<std::size_t>(i)] - mean) / sd : 0.0;
                double m = 1.0;
                for (int c = 0; c <= d; ++c) {
                    design_(i, c) = m;
                    m *= s;
                }
            }
            qr_.compute(design_);
            if (qr_.rank() == d + 1) {
                degree_ = d;
                return;
            }
        }
        throw NumericError("regression design has rank 0");
    }

    int degree() const { return degree_; }
    bool reduced() const { return degree_ < requested_; }
    bool constant_regressor() const { return constant_; }

    std::vector<double> fit(const std::vector<double>& target) const {
        const Eigen::Map<const Eigen::VectorXd> b(target.data(),
                                                  static_cast<Eigen::Index>(target.size()));
        const Eigen::VectorXd beta = qr_.solve(b);
        const Eigen::VectorXd fitted = design_ * beta;
        return {fitted.data(), fitted.data() + fitted.size()};
    }

private:
    Eigen::MatrixXd design_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
    int degree_ = 0;
    int requested_ = 0;
    bool constant_ = false;
};

}  // namespace

RegressionReport solve_bsde_regression(const TransformedDriver& td, std::span<const double> terminal,
                                       BsdePaths& paths, std::size_t k_start, std::size_t k_end,
                                       const RegressionSpec& reg, double clip) {
    const std::size_t n = paths.n_paths;
    if (terminal.size() != n) throw DomainError("terminal values do not match the path count");
    if (k_end > paths.steps() || k_start > k_end) throw DomainError("invalid regression range");
    RegressionReport rep;
    rep.degree_used = reg.degree;
    std::copy(terminal.begin(), terminal.end(), paths.y_tilde.begin() + static_cast<std::ptrdiff_t>(k_end * n));
    for (std::size_t i = 0; i < n; ++i) {
        rep.max_abs_raw = std::max(rep.max_abs_raw, std::abs(terminal[i]));
    }
    std::size_t clipped = 0;
    std::size_t truncated = 0;
    std::vector<double> target(n), zt(n);
    for (std::size_t k = k_end; k-- > k_start;) {
        const double t = paths.times[k];
        const double dt = paths.times[k + 1] - t;
        const double* xk = paths.x.data() + k * n;
        const double* ynext = paths.y_tilde.data() + (k + 1) * n;
        const double* dw = paths.dw.data() + k * n;
        const Projector proj({xk, n}, reg.degree);
        if (!proj.constant_regressor()) rep.degree_used = std::min(rep.degree_used, proj.degree());
        rep.degree_reduced = rep.degree_reduced || proj.reduced();

        for (std::size_t i = 0; i < n; ++i) target[i] = ynext[i] * dw[i] / dt;
        zt = proj.fit(target);

        std::vector<double> proxy(ynext, ynext + n);
        std::vector<double> yk;
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        for (int pass = 0; pass <= reg.picard; ++pass) {
            for (std::size_t i = 0; i < n; ++i) {
                target[i] = ynext[i] + td(t, xk[i], proxy[i], zt[i]) * dt;
            }
            yk = proj.fit(target);
            if (reg.range_truncation) {
                const auto [mn, mx] = std::minmax_element(target.begin(), target.end());
                lo = *mn;
                hi = *mx;
            }
            for (std::size_t i = 0; i < n; ++i) proxy[i] = std::clamp(std::clamp(yk[i], lo, hi), -clip, clip);
        }
        for (std::size_t i = 0; i < n; ++i) {
            rep.max_abs_raw = std::max(rep.max_abs_raw, std::abs(yk[i]));
            const double in_range = std::clamp(yk[i], lo, hi);
            if (in_range != yk[i]) ++truncated;
            if (std::abs(in_range) > clip) ++clipped;
            paths.y_tilde[k * n + i] = std::clamp(in_range, -clip, clip);
            paths.z_tilde[k * n + i] = zt[i];
        }
    }
    const std::size_t total = (k_end - k_start) * n;
    if (total > 0) {
        rep.clipped_fraction = static_cast<double>(clipped) / static_cast<double>(total);
        rep.range_truncated_fraction = static_cast<double>(truncated) / static_cast<double>(total);
    }
    return rep;
}

double untransform_solution(const FlowEnsemble& flow, const ProblemSpec& spec, BsdePaths& paths,
                            std::size_t k_start, std::size_t k_end) {
    const std::size_t n = paths.n_paths;
    std::size_t clipped = 0;
    for (std::size_t k = k_start; k <= k_end; ++k) {
        const double t = paths.times[k];
        for (std::size_t i = 0; i < n; ++i) {
            const double x = paths.x[k * n + i];
            double yt = paths.y_tilde[k * n + i];
            if (!flow.contains_y(yt)) {
                yt = std::clamp(yt, flow.y_lo(), flow.y_hi());
                ++clipped;
            }
            const FlowJet j = flow.eval(t, x, yt);
            paths.y[k * n + i] = j.phi;
            if (k < paths.steps()) {
                paths.z[k * n + i] = j.py * paths.z_tilde[k * n + i] + j.px * spec.sigma(t, x);
            }
        }
    }
    const std::size_t total = (k_end - k_start + 1) * n;
    return static_cast<double>(clipped) / static_cast<double>(total);
}

void McConfig::validate() const {
    if (n_paths < 2) throw ConfigError("mc.n_paths", "need at least 2 paths");
    if (nt < 1) throw ConfigError("mc.nt", "need at least 1 step");
    if (regression.degree < 0 || regression.degree > 8) {
        throw ConfigError("mc.degree", "polynomial degree must lie in [0, 8]");
    }
    if (regression.picard < 0) throw ConfigError("mc.picard", "must be non-negative");
    if (flow_nx < 4 || flow_ny < 4) throw ConfigError("mc.flow_nx", "flow tables need >= 4 nodes");
    if (window < 0.0) throw ConfigError("mc.window", "must be non-negative");
}

namespace {

BsdeSolution solve_bsde_pieces(const ProblemSpec& spec, const std::vector<DriverPiece>& pieces,
                               const McConfig& mc, std::optional<double> h_override) {
    mc.validate();
    BsdeSolution sol;
    const auto times = uniform_grid(spec.horizon, mc.nt);
    sol.paths = simulate_forward(spec, times, mc.n_paths, mc.seed);
    BsdePaths& paths = sol.paths;
    const std::size_t n = paths.n_paths;
    const std::size_t nt = paths.steps();

    auto x_span = [&](std::size_t ka, std::size_t kb) {
        const auto first = paths.x.begin() + static_cast<std::ptrdiff_t>(ka * n);
        const auto last = paths.x.begin() + static_cast<std::ptrdiff_t>((kb + 1) * n);
        const auto [lo, hi] = std::minmax_element(first, last);
        const double pad = std::max(1e-6, 1e-3 * (*hi - *lo));
        return std::pair<double, double>{*lo - pad, *hi + pad};
    };

    PdeGrids g;
    g.nt = mc.nt;
    g.nx = mc.flow_nx;
    g.ny = mc.flow_ny;
    g.flow_max_step = mc.flow_max_step;
    g.sample_points = mc.sample_points;
    g.z_radius = mc.z_radius;
    g.window = h_override ? *h_override : mc.window;
    const GlobalSetup setup = rpde_setup(spec, pieces, g, ComparisonRoute::bsde, x_span(0, nt));
    sol.constants = setup.constants;
    sol.h = setup.h;
    const double c1f = setup.constants.growth.c1f_tilde;

    std::vector<double> terminal(n);
    for (std::size_t i = 0; i < n; ++i) terminal[i] = spec.terminal(paths.x[nt * n + i]);
    for (std::size_t i = 0; i < n; ++i) paths.y[nt * n + i] = terminal[i];

    std::size_t kb = nt;
    while (kb > 0) {
        const std::size_t ka = kb >= setup.steps_per_window ? kb - setup.steps_per_window : 0;
        McWindow win;
        win.t_start = times[ka];
        win.t_end = times[kb];
        for (std::size_t i = 0; i < n; ++i) terminal[i] = paths.y[kb * n + i];
        double tsup = 0.0;
        for (double v : terminal) tsup = std::max(tsup, std::abs(v));
        win.m_bound = tsup + (win.t_end - win.t_start) * c1f;
        std::tie(win.x_lo, win.x_hi) = x_span(ka, kb);

        FlowGridSpec fg;
        fg.times.assign(times.begin() + static_cast<std::ptrdiff_t>(ka),
                        times.begin() + static_cast<std::ptrdiff_t>(kb + 1));
        fg.x_lo = win.x_lo;
        fg.x_hi = win.x_hi;
        fg.nx = mc.flow_nx;
        fg.ny = mc.flow_ny;
        fg.max_step = mc.flow_max_step;
        std::vector<DriverPiece> wp;
        for (const auto& p : pieces) {
            if (p.t_start >= win.t_start - 1e-12 && p.t_end <= win.t_end + 1e-12) wp.push_back(p);
        }
        // Same sizing as the PDE windows: a y~ table fitted to the data, widened to m_bound + 1
        // when the regression leaves it.
        const double ylim_full = win.m_bound + 1.0;
        double ylim = std::min(win.m_bound, 2.0 * tsup + 1.0) + 1.0;
        std::shared_ptr<const FlowEnsemble> flow;
        for (;;) {
            fg.y_lo = -ylim;
            fg.y_hi = ylim;
            flow = std::make_shared<const FlowEnsemble>(solve_flow(spec.field, wp, fg));
            const TransformedDriver trial(spec, flow);
            bool inside = true;
            try {
                win.regression = solve_bsde_regression(trial, terminal, paths, ka, kb, mc.regression,
                                                       win.m_bound + 1.0);
                for (std::size_t k = ka; k <= kb && inside; ++k) {
                    for (std::size_t i = 0; i < n; ++i) {
                        if (!flow->contains_y(paths.y_tilde[k * n + i])) {
                            inside = false;
                            break;
                        }
                    }
                }
            } catch (const DomainError&) {
                inside = false;
            }
            if (inside || ylim >= ylim_full) break;
            ylim = ylim_full;
            win.rebuilt = true;
        }
        const TransformedDriver td(spec, flow);

        win.untransform_clipped = untransform_solution(*flow, spec, paths, ka, kb - 1);
        for (std::size_t k = ka; k <= kb; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                win.max_abs_y_tilde = std::max(win.max_abs_y_tilde, std::abs(paths.y_tilde[k * n + i]));
            }
        }

        if (ka == 0) {
            // Plain pathwise estimator of Y~_0 on the first window, for the standard error.
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double v = terminal[i];
                for (std::size_t k = ka; k < kb; ++k) {
                    const double dt = times[k + 1] - times[k];
                    v += td(times[k], paths.x[k * n + i], paths.y_tilde[k * n + i],
                            paths.z_tilde[k * n + i]) * dt;
                }
                s1 += v;
                s2 += v * v;
            }
            const double mean = s1 / static_cast<double>(n);
            const double var = std::max(0.0, s2 / static_cast<double>(n) - mean * mean);
            const FlowJet j0 = flow->eval(times[0], paths.x[0], paths.y_tilde[0]);
            sol.y0_se = j0.py * std::sqrt(var / static_cast<double>(n - 1));
        }
        sol.windows.push_back(win);
        kb = ka;
    }
    std::reverse(sol.windows.begin(), sol.windows.end());

    double ys = 0.0, zs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ys += paths.y[i];
        zs += paths.z[i];
    }
    sol.y0 = ys / static_cast<double>(n);
    sol.z0 = zs / static_cast<double>(n);
    return sol;
}

FeynmanKacReport compare(const BsdeSolution& mc, const GridSolution& fd, const ProblemSpec& spec,
                         double fd_tolerance) {
    FeynmanKacReport r;
    r.mc_value = mc.y0;
    r.mc_standard_error = mc.y0_se;
    r.fd_value = fd.value_at(spec.t0, spec.x0);
    r.discrepancy = std::abs(r.mc_value - r.fd_value);
    r.tolerance = 3.0 * r.mc_standard_error + fd_tolerance;
    r.pass = r.discrepancy < r.tolerance;
    r.h = mc.h;
    r.windows = mc.windows.size();
    return r;
}

}  // namespace

BsdeSolution solve_bsde(const ProblemSpec& spec, const PiecewiseLinearPath& zeta, const McConfig& mc,
                        std::optional<double> h_override) {
    const auto times = uniform_grid(spec.horizon, mc.nt);
    return solve_bsde_pieces(spec, driver_pieces(zeta, 0.0, spec.horizon, times), mc, h_override);
}

BsdeSolution solve_bsde(const ProblemSpec& spec, const RoughPath2& rp, const McConfig& mc,
                        std::optional<double> h_override) {
    if (!(rp.p() < 3.0)) throw UnsupportedError("rough BSDEs need p < 3");
    const auto times = uniform_grid(spec.horizon, mc.nt);
    return solve_bsde_pieces(spec, driver_pieces(rp, 0.0, spec.horizon, times), mc, h_override);
}

FeynmanKacReport feynman_kac_check(const ProblemSpec& spec, const PiecewiseLinearPath& zeta,
                                   const PdeGrids& grids, const McConfig& mc, double fd_tolerance) {
    const GridSolution fd = solve_pde_smooth(spec, zeta, grids);
    const auto times = grids.time_grid(spec);
    const GlobalSetup setup =
        rpde_setup(spec, driver_pieces(zeta, 0.0, spec.horizon, times), grids, ComparisonRoute::pde,
                   grids.x_range(spec));
    return compare(solve_bsde(spec, zeta, mc, setup.h), fd, spec, fd_tolerance);
}

FeynmanKacReport feynman_kac_check(const ProblemSpec& spec, const RoughPath2& rp,
                                   const PdeGrids& grids, const McConfig& mc, double fd_tolerance) {
    const GridSolution fd = solve_rpde(spec, rp, grids);
    return compare(solve_bsde(spec, rp, mc, fd.constants->h), fd, spec, fd_tolerance);
}

}  // namespace rbsde
