#include "roughbsde/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "roughbsde/errors.hpp"

namespace rbsde {

TransformedDriver::TransformedDriver(ProblemSpec spec, std::shared_ptr<const FlowEnsemble> flow)
    : spec_(std::move(spec)), flow_(std::move(flow)) {
    if (!flow_) throw DomainError("transformed driver needs a flow");
    if (spec_.field && spec_.field->dim() != flow_->dim()) {
        throw DomainError("flow and problem use different driver dimensions");
    }
    if (flow_->t0() < -1e-12 || flow_->te() > spec_.horizon + 1e-12) {
        throw DomainError("flow window lies outside [0, T]");
    }
}

double TransformedDriver::from_jet(const FlowJet& j, double t, double x, double zt) const {
    const double s = spec_.sigma(t, x);
    const double b = spec_.drift(t, x);
    const double z = j.py * zt + j.px * s;
    const double f = spec_.driver(t, x, j.phi, z);
    return (f + j.px * b + 0.5 * j.pxx * s * s + zt * j.pxy * s + 0.5 * j.pyy * zt * zt) / j.py;
}

double TransformedDriver::dz_from_jet(const FlowJet& j, double t, double x, double zt) const {
    const double s = spec_.sigma(t, x);
    const double z = j.py * zt + j.px * s;
    const double e = 1e-6 * std::max(1.0, std::abs(z));
    const double fz = (spec_.driver(t, x, j.phi, z + e) - spec_.driver(t, x, j.phi, z - e)) / (2 * e);
    return (fz * j.py + j.pxy * s + j.pyy * zt) / j.py;
}

double TransformedDriver::operator()(double t, double x, double yt, double zt) const {
    return from_jet(flow_->eval(t, x, yt), t, x, zt);
}

double TransformedDriver::at_node(std::size_t it, std::size_t ix, double yt, double zt) const {
    return from_jet(flow_->eval_node(it, ix, yt), flow_->times()[it], flow_->x_node(ix), zt);
}

double TransformedDriver::exact(double t, double x, double yt, double zt) const {
    return from_jet(flow_->eval_exact(t, x, yt), t, x, zt);
}

SampleWindow SampleWindow::covering(const FlowEnsemble& flow, std::size_t points, double z_radius) {
    SampleWindow w;
    w.y_lo = flow.y_lo();
    w.y_hi = flow.y_hi();
    w.points = points;
    w.z_radius = z_radius;
    return w;
}

namespace {

// At most `count` indices spread evenly over [0, n), always including both ends.
std::vector<std::size_t> spread(std::size_t n, std::size_t count) {
    std::vector<std::size_t> idx;
    if (n <= count) {
        for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        return idx;
    }
    for (std::size_t i = 0; i < count; ++i) {
        idx.push_back(static_cast<std::size_t>(
            std::llround(static_cast<double>(i) * static_cast<double>(n - 1) /
                         static_cast<double>(count - 1))));
    }
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

double uniform(double lo, double hi, std::size_t i, std::size_t n) {
    return n == 1 ? 0.5 * (lo + hi)
                  : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

double kappa_of(const FlowJet& j, double sigma, double c2f) {
    const double q = std::abs(j.pyy / (j.py * j.py));
    const double s = std::abs(sigma);
    return q * 2.0 * c2f * j.py * j.py + q * std::abs(j.pxy) * s + 0.5 * q * std::abs(j.pyy) +
           std::abs(j.pxyy) * s / j.py + 0.5 * j.pyyy / j.py;
}

}  // namespace

double quadratic_y_coefficient(const TransformedDriver& td, std::size_t it) {
    const FlowEnsemble& fl = td.flow();
    if (fl.is_identity()) return 0.0;
    const double t = fl.times()[it];
    const double c2f = td.spec().constants.c2f;
    double k = 0.0;
    for (std::size_t ix = 0; ix < fl.nx(); ++ix) {
        const double x = fl.x_node(ix);
        const double s = td.spec().sigma(t, x);
        for (std::size_t iy = 0; iy < fl.ny(); ++iy) {
            k = std::max(k, kappa_of(fl.node(it, ix, iy), s, c2f));
        }
    }
    return k;
}

double quadratic_y_coefficient(const TransformedDriver& td, double t) {
    const FlowEnsemble& fl = td.flow();
    if (auto it = fl.time_index(t)) return quadratic_y_coefficient(td, *it);
    const auto times = fl.times();
    if (t < fl.t0() || t > fl.te()) throw DomainError("kappa requested outside the flow window");
    const auto up = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) -
                                             times.begin());
    return std::max(quadratic_y_coefficient(td, up - 1), quadratic_y_coefficient(td, up));
}

GrowthConstants estimate_growth_constants(const TransformedDriver& td, const SampleWindow& w) {
    const FlowEnsemble& fl = td.flow();
    const std::size_t n = std::max<std::size_t>(2, w.points);
    const auto t_idx = spread(fl.times().size(), n);
    const auto x_idx = spread(fl.nx(), n);
    const double y_lo = std::max(w.y_lo, fl.y_lo());
    const double y_hi = std::min(w.y_hi, fl.y_hi());
    const double ey = 1e-4 * std::max(1.0, y_hi - y_lo);
    const double ex = 1e-4 * std::max(1.0, fl.x_hi() - fl.x_lo());

    std::vector<double> zs(n);
    for (std::size_t i = 0; i < n; ++i) zs[i] = uniform(-w.z_radius, w.z_radius, i, n);

    GrowthConstants g;
    for (std::size_t it : t_idx) {
        const double t = fl.times()[it];
        const double kappa = quadratic_y_coefficient(td, it);
        for (std::size_t ix : x_idx) {
            const double x = fl.x_node(ix);
            const double xp = std::min(x + ex, fl.x_hi());
            const double xm = std::max(x - ex, fl.x_lo());
            for (std::size_t iy = 0; iy < n; ++iy) {
                const double y = uniform(y_lo + ey, y_hi - ey, iy, n);
                const FlowJet j = fl.eval_node(it, ix, y);
                const double yp = std::min(y + ey, y_hi);
                const double ym = std::max(y - ey, y_lo);
                const FlowJet jyp = fl.eval_node(it, ix, yp);
                const FlowJet jym = fl.eval_node(it, ix, ym);
                const FlowJet jxp = fl.eval(t, xp, y);
                const FlowJet jxm = fl.eval(t, xm, y);
                for (double z : zs) {
                    const double q = 1.0 + z * z;
                    const double f = td.from_jet(j, t, x, z);
                    const double fz = td.dz_from_jet(j, t, x, z);
                    const double fy =
                        (td.from_jet(jyp, t, x, z) - td.from_jet(jym, t, x, z)) / (yp - ym);
                    const double fx =
                        (td.from_jet(jxp, t, xp, z) - td.from_jet(jxm, t, xm, z)) / (xp - xm);
                    g.c1f_tilde = std::max({g.c1f_tilde, std::abs(f) / q,
                                            std::abs(fz) / (1.0 + std::abs(z))});
                    g.c_unif_tilde = std::max(g.c_unif_tilde, fy - kappa * z * z);
                    g.c3f_tilde = std::max(g.c3f_tilde, std::abs(fx) / q);
                }
            }
        }
    }
    return g;
}

double comparison_lambda(double c) { return 36.0 * c + std::sqrt(1296.0 * c * c + 2.0); }

double comparison_delta(double c, double m) {
    return std::exp(-2.0 * comparison_lambda(c) * m) / 72.0;
}

PdeComparison pde_comparison_constants(double c, double c_unif, double m, double horizon) {
    PdeComparison r;
    r.k0 = c * c + c + 1.0;
    r.k = std::max(r.k0, c_unif) + 1.0;
    r.lambda = 4.0 * c + 4.0;
    r.exponent = 2.0 * r.lambda * m * std::exp(r.k * horizon);
    constexpr double kMaxExponent = 709.0;
    if (!(r.exponent <= kMaxExponent)) {
        r.degenerate = true;
        r.a = std::numeric_limits<double>::infinity();
        r.delta = std::numeric_limits<double>::denorm_min();
        return r;
    }
    r.a = std::exp(r.exponent) + 1.0;
    r.delta = 1.0 / r.a;
    return r;
}

ComparisonConstants step_size(const TransformedDriver& td, double terminal_sup, double horizon,
                              ComparisonRoute route, const GrowthConstants& growth) {
    ComparisonConstants c;
    c.route = route;
    c.terminal_sup = terminal_sup;
    c.growth = growth;
    c.m = terminal_sup + horizon * growth.c1f_tilde;

    const PdeComparison pde = pde_comparison_constants(
        std::max(growth.c1f_tilde, growth.c3f_tilde), growth.c_unif_tilde, c.m, horizon);
    c.k0 = pde.k0;
    c.k = pde.k;
    c.a = pde.a;
    if (route == ComparisonRoute::pde) {
        c.lambda = pde.lambda;
        c.delta = pde.delta;
        if (pde.degenerate) {
            c.degenerate = true;
            c.degenerate_constant = "A";
        }
    } else {
        c.lambda = comparison_lambda(growth.c1f_tilde);
        c.delta = comparison_delta(growth.c1f_tilde, c.m);
        if (!(c.delta > 0.0)) {
            c.degenerate = true;
            c.degenerate_constant = "delta";
            c.delta = std::numeric_limits<double>::denorm_min();
        }
    }
    c.epsilon = 0.5 * c.delta;

    const FlowEnsemble& fl = td.flow();
    const auto times = fl.times();
    const std::size_t nt = times.size();
    std::size_t first_ok = nt - 1;
    while (first_ok > 0 && quadratic_y_coefficient(td, first_ok - 1) <= c.epsilon) --first_ok;
    if (first_ok == nt - 1) {
        c.h = times[nt - 1] - times[nt - 2];
        c.below_resolution = true;
    } else {
        c.h = times[nt - 1] - times[first_ok];
    }
    return c;
}

ComparisonConstants step_size(const TransformedDriver& td, double terminal_sup, double horizon,
                              ComparisonRoute route, const SampleWindow& w) {
    return step_size(td, terminal_sup, horizon, route, estimate_growth_constants(td, w));
}

std::string to_string(ComparisonRoute r) { return r == ComparisonRoute::pde ? "pde" : "bsde"; }

}  // namespace rbsde
