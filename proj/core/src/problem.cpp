#include "roughbsde/problem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "roughbsde/errors.hpp"

namespace rbsde {

namespace {

constexpr std::size_t kAxis = 11;
constexpr double kSlack = 1e-6;

double node(double lo, double hi, std::size_t i, std::size_t n) {
    return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

void require(bool ok, const std::string& constant, const std::string& what) {
    if (!ok) throw DomainError("declared constant " + constant + " violated: " + what);
}

}  // namespace

void ProblemSpec::validate(double x_lo, double x_hi, double u_max) const {
    if (!(horizon > 0.0)) throw DomainError("horizon T must be positive");
    if (t0 < 0.0 || t0 >= horizon) throw DomainError("initial time must lie in [0, T)");
    if (!sigma || !drift || !driver || !terminal || !field) {
        throw DomainError("problem '" + name + "' is missing a coefficient");
    }
    const auto& c = constants;
    const double e = 1e-5;
    for (std::size_t it = 0; it < kAxis; ++it) {
        const double t = node(t0, horizon, it, kAxis);
        for (std::size_t ix = 0; ix < kAxis; ++ix) {
            const double x = node(x_lo, x_hi, ix, kAxis);
            const double s = sigma(t, x);
            const double b = drift(t, x);
            require(std::abs(s) <= c.c_sigma + kSlack, "C_sigma", "|sigma| = " + std::to_string(s));
            require(std::abs(b) <= c.c_b + kSlack, "C_b", "|b| = " + std::to_string(b));
            for (std::size_t iu = 0; iu < kAxis; ++iu) {
                const double u = node(-u_max, u_max, iu, kAxis);
                for (std::size_t iz = 0; iz < kAxis; ++iz) {
                    const double z = node(-10.0, 10.0, iz, kAxis);
                    const double q = 1.0 + z * z;
                    const double f = driver(t, x, u, z);
                    require(std::abs(f) <= c.c1f * q + kSlack, "C_1f", "|f| growth");
                    const double fz = (driver(t, x, u, z + e) - driver(t, x, u, z - e)) / (2 * e);
                    require(std::abs(fz) <= c.c1f * (1.0 + std::abs(z)) + 1e-4, "C_1f",
                            "|d_z f| growth");
                    const double fu = (driver(t, x, u + e, z) - driver(t, x, u - e, z)) / (2 * e);
                    require(fu <= c.c2f + 1e-4, "C_2f", "d_u f = " + std::to_string(fu));
                    const double fx = (driver(t, x + e, u, z) - driver(t, x - e, u, z)) / (2 * e);
                    require(std::abs(fx) <= c.c3f * q + 1e-4, "C_3f", "|d_x f| growth");
                }
            }
        }
    }
}

double ProblemSpec::terminal_sup(double x_lo, double x_hi, std::size_t points) const {
    double s = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        s = std::max(s, std::abs(terminal(node(x_lo, x_hi, i, points))));
    }
    return s;
}

}  // namespace rbsde
