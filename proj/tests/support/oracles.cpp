#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

double levy_area(const rbsde::PiecewiseLinearPath& path, std::size_t i, std::size_t j,
                 std::size_t sub) {
    double a = 0.0;
    const auto t = path.times();
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        const double h = (t[k + 1] - t[k]) / static_cast<double>(sub);
        for (std::size_t s = 0; s < sub; ++s) {
            const double ta = t[k] + h * static_cast<double>(s);
            const auto pa = path.evaluate(ta);
            const auto pb = path.evaluate(ta + h);
            const double xi = 0.5 * (pa[i] + pb[i]);
            const double xj = 0.5 * (pa[j] + pb[j]);
            a += 0.5 * (xi * (pb[j] - pa[j]) - xj * (pb[i] - pa[i]));
        }
    }
    return a;
}

double brute_force_p_variation(const std::vector<double>& values, double p) {
    const std::size_t n = values.size();
    if (n < 2 || n > 16) throw std::invalid_argument("brute force needs 2..16 knots");
    // Interior knots are switched on or off by the bits of `mask`.
    double best = 0.0;
    const std::size_t interior = n - 2;
    for (std::size_t mask = 0; mask < (std::size_t{1} << interior); ++mask) {
        double s = 0.0;
        std::size_t prev = 0;
        for (std::size_t k = 1; k < n; ++k) {
            const bool on = k == n - 1 || ((mask >> (k - 1)) & 1U);
            if (!on) continue;
            s += std::pow(std::abs(values[k] - values[prev]), p);
            prev = k;
        }
        best = std::max(best, s);
    }
    return std::pow(best, 1.0 / p);
}

XyJet xy_flow(double t, double x, double y, double horizon) {
    const double r = horizon - t;
    const double e = std::exp(x * r);
    return {y * e, y * r * e, e, y * r * r * e, r * e, 0.0};
}

double xy_transformed_driver(double t, double x, double yt, double zt, double horizon) {
    const XyJet j = xy_flow(t, x, yt, horizon);
    return (0.5 * j.pxx + zt * j.pxy + 0.5 * j.pyy * zt * zt) / j.py;
}

}  // namespace oracle
