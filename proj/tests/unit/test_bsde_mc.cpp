#include <gtest/gtest.h>

#include <cmath>

#include <roughbsde/bsde_mc.hpp>
#include <roughbsde/errors.hpp>
#include <roughbsde/presets.hpp>

using namespace rbsde;

namespace {

PiecewiseLinearPath flat() { return PiecewiseLinearPath({0.0, 1.0}, {{0.0}, {0.0}}); }
PiecewiseLinearPath unit_slope() { return PiecewiseLinearPath({0.0, 1.0}, {{0.0}, {1.0}}); }

McConfig small_mc() {
    McConfig mc;
    mc.n_paths = 4000;
    mc.nt = 40;
    mc.seed = 3;
    mc.flow_nx = 41;
    return mc;
}

}  // namespace

TEST(ForwardPaths, ZeroDiffusionGivesDriftLine) {
    auto spec = make_preset("heat").spec;
    spec.sigma = [](double, double) { return 0.0; };
    spec.drift = [](double, double) { return 0.5; };
    spec.constants.c_sigma = 0.0;
    spec.constants.c_b = 0.5;
    const auto grid = uniform_grid(1.0, 10);
    const auto p = simulate_forward(spec, grid, 8, 1);
    for (std::size_t k = 0; k <= 10; ++k) {
        for (double x : p.x_at(k)) EXPECT_NEAR(x, 0.5 * grid[k], 1e-14);
    }
}

TEST(ForwardPaths, SeedDeterminesPaths) {
    const auto spec = make_preset("heat").spec;
    const auto grid = uniform_grid(1.0, 10);
    const auto a = simulate_forward(spec, grid, 16, 9);
    const auto b = simulate_forward(spec, grid, 16, 9);
    const auto c = simulate_forward(spec, grid, 16, 10);
    EXPECT_EQ(a.x, b.x);
    EXPECT_NE(a.x, c.x);
}

TEST(ForwardPaths, IncrementMoments) {
    const auto spec = make_preset("heat").spec;
    const auto grid = uniform_grid(1.0, 4);
    const std::size_t n = 20000;
    const auto p = simulate_forward(spec, grid, n, 2);
    double m = 0.0, v = 0.0;
    for (double x : p.x_at(4)) {
        m += x;
        v += x * x;
    }
    m /= static_cast<double>(n);
    v = v / static_cast<double>(n) - m * m;
    EXPECT_NEAR(m, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(v, 1.0, 4.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST(McConfig, ValidationNamesTheField) {
    McConfig mc;
    mc.n_paths = 1;
    try {
        mc.validate();
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "mc.n_paths");
    }
}

TEST(Bsde, HeatValueWithinStandardErrors) {
    const auto spec = make_preset("heat").spec;
    const auto sol = solve_bsde(spec, flat(), small_mc());
    // Y_0 = E[W_1^2] = 1.
    EXPECT_NEAR(sol.y0, 1.0, 3.0 * sol.y0_se + 1e-3);
    EXPECT_GT(sol.y0_se, 0.0);
}

TEST(Bsde, SeedReproducible) {
    const auto spec = make_preset("discount").spec;
    const auto a = solve_bsde(spec, flat(), small_mc());
    const auto b = solve_bsde(spec, flat(), small_mc());
    EXPECT_EQ(a.y0, b.y0);
    EXPECT_EQ(a.paths.y, b.paths.y);
}

TEST(Bsde, LinearFieldUntransformsByExponential) {
    const auto spec = make_preset("linearH").spec;
    const auto sol = solve_bsde(spec, unit_slope(), small_mc());
    const auto& p = sol.paths;
    for (std::size_t k = 0; k <= p.steps(); k += 5) {
        const double g = std::exp(1.0 - p.times[k]);
        for (std::size_t i = 0; i < p.n_paths; i += 97) {
            EXPECT_NEAR(p.y[k * p.n_paths + i], g * p.y_tilde[k * p.n_paths + i], 1e-6);
        }
    }
    EXPECT_NEAR(sol.y0, std::exp(0.5), 3.0 * sol.y0_se + kFdTolerance);
    for (const auto& w : sol.windows) EXPECT_LE(w.max_abs_y_tilde, w.m_bound + 1e-6);
}

TEST(Bsde, WindowOverrideStitches) {
    const auto spec = make_preset("xyH").spec;
    const auto sol = solve_bsde(spec, unit_slope(), small_mc(), 0.25);
    EXPECT_EQ(sol.windows.size(), 4u);
    EXPECT_DOUBLE_EQ(sol.windows.front().t_start, 0.0);
    EXPECT_DOUBLE_EQ(sol.windows.back().t_end, 1.0);
    for (std::size_t k = 1; k < sol.windows.size(); ++k) {
        EXPECT_DOUBLE_EQ(sol.windows[k - 1].t_end, sol.windows[k].t_start);
    }
}
