#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <memory>

#include <roughbsde/errors.hpp>
#include <roughbsde/flow.hpp>
#include <roughbsde/presets.hpp>
#include <roughbsde/rough_path.hpp>
#include <roughbsde/vector_field.hpp>

#include "oracles.hpp"

using namespace rbsde;

namespace {

PiecewiseLinearPath unit_slope() { return PiecewiseLinearPath({0.0, 1.0}, {{0.0}, {1.0}}); }

FlowGridSpec grid_on(std::size_t nt) {
    FlowGridSpec g;
    g.times = uniform_grid(1.0, nt);
    g.nx = 21;
    g.ny = 21;
    return g;
}

std::shared_ptr<const VectorFieldFamily> field_of(const std::string& preset) {
    return make_preset(preset).spec.field;
}

}  // namespace

TEST(VectorField, RejectsInconsistentAnalyticJet) {
    VectorFieldFamily::Component c;
    c.name = "bad";
    c.value = [](double x, double y) { return std::sin(x) * y; };
    c.jet = [](double x, double y) {
        FieldJet j;
        j.h = std::sin(x) * y;
        j.hx = std::cos(x) * y;
        j.hy = std::sin(x);
        j.hxy = 2.0 * std::cos(x);  // wrong by a factor 2
        j.hxx = -std::sin(x) * y;
        j.hxxy = -std::sin(x);
        return j;
    };
    EXPECT_THROW(VectorFieldFamily({c}, 1.0), DomainError);
    c.jet = nullptr;
    EXPECT_NO_THROW(VectorFieldFamily({c}, 1.0));
}

TEST(VectorField, FiniteDifferenceJetOfPolynomial) {
    const auto j = finite_difference_jet([](double x, double y) { return x * x * y * y * y; }, 0.5, 2.0);
    EXPECT_NEAR(j.hyyy, 6.0 * 0.25, 1e-3);
    EXPECT_NEAR(j.hxyy, 2.0 * 0.5 * 6.0 * 2.0, 1e-3);
    EXPECT_NEAR(j.hxxy, 2.0 * 3.0 * 4.0, 1e-3);
}

TEST(Flow, ZeroFieldIsIdentity) {
    const auto f = solve_flow_smooth(std::make_shared<VectorFieldFamily>(VectorFieldFamily::zero(1)),
                                     unit_slope(), grid_on(4));
    EXPECT_TRUE(f.is_identity());
    const auto j = f.eval(0.3, 0.2, 0.7);
    EXPECT_EQ(j.phi, 0.7);
    EXPECT_EQ(j.py, 1.0);
    EXPECT_EQ(j.px, 0.0);
}

TEST(Flow, LinearFieldIsExponential) {
    const auto f = solve_flow_smooth(field_of("linearH"), unit_slope(), grid_on(10));
    for (std::size_t it = 0; it < f.times().size(); ++it) {
        const double t = f.times()[it];
        const auto j = f.node(it, 5, 3);
        const double y = f.y_node(3);
        EXPECT_NEAR(j.phi, y * std::exp(1.0 - t), 1e-7);
        EXPECT_NEAR(j.py, std::exp(1.0 - t), 1e-7);
        EXPECT_NEAR(j.px, 0.0, 1e-12);
        EXPECT_NEAR(j.pyy, 0.0, 1e-9);
    }
    EXPECT_NEAR(f.eval(0.0, 0.0, 1.0).phi, std::exp(1.0), 1e-7);
}

TEST(Flow, XyFieldMatchesClosedFormJet) {
    const auto f = solve_flow_smooth(field_of("xyH"), unit_slope(), grid_on(8));
    for (double t : {0.0, 0.375, 0.8}) {
        for (double x : {-0.9, 0.1, 0.65}) {
            for (double y : {-0.8, 0.3}) {
                const auto o = oracle::xy_flow(t, x, y, 1.0);
                const auto e = f.eval_exact(t, x, y);
                EXPECT_NEAR(e.phi, o.phi, 1e-7);
                EXPECT_NEAR(e.px, o.px, 1e-7);
                EXPECT_NEAR(e.py, o.py, 1e-7);
                EXPECT_NEAR(e.pxx, o.pxx, 1e-7);
                EXPECT_NEAR(e.pxy, o.pxy, 1e-7);
                EXPECT_NEAR(e.pyy, o.pyy, 1e-9);
                const auto i = f.eval(t, x, y);
                EXPECT_NEAR(i.phi, o.phi, 1e-4);
                EXPECT_NEAR(i.px, o.px, 1e-4);
            }
        }
    }
}

TEST(Flow, DerivativeIdentitiesHold) {
    auto g = grid_on(10);
    const auto f = solve_flow_smooth(field_of("sinH"), unit_slope(), g);
    std::vector<std::array<double, 3>> samples;
    for (double t : {0.0, 0.5, 0.9}) {
        for (double x : {-0.5, 0.4}) {
            for (double y : {-0.3, 0.2}) samples.push_back({t, x, y});
        }
    }
    EXPECT_LT(derivative_identity_residuals(f, samples).max(), 1e-4);
}

TEST(Flow, InverseRoundTrip) {
    const auto f = solve_flow_smooth(field_of("sinH"), unit_slope(), grid_on(10));
    for (double y : {-0.6, 0.0, 0.45}) {
        const double u = f.eval_exact(0.2, 0.3, y).phi;
        EXPECT_NEAR(invert_flow(f, 0.2, 0.3, u, true), y, 1e-9);
    }
    EXPECT_THROW(invert_flow(f, 0.2, 0.3, 50.0), DomainError);
}

TEST(Flow, OutOfTableEvaluationThrows) {
    const auto f = solve_flow_smooth(field_of("linearH"), unit_slope(), grid_on(4));
    EXPECT_THROW(f.eval(0.5, 3.0, 0.0), DomainError);
    EXPECT_THROW(f.eval(0.5, 0.0, 3.0), DomainError);
    EXPECT_THROW(f.eval(1.5, 0.0, 0.0), DomainError);
}

TEST(Flow, RoughFlowOnSmoothLiftAgreesWithSmoothFlow) {
    const auto field = field_of("sinH");
    const auto zeta = brownian_path(3, uniform_grid(1.0, 64), 1);
    FlowGridSpec g = grid_on(8);
    const auto a = solve_flow_smooth(field, zeta, g);
    const auto b = solve_flow_rough(field, lift_smooth(zeta, 2.5), g);
    for (std::size_t it = 0; it < g.times.size(); ++it) {
        for (std::size_t ix : {0u, 10u, 20u}) {
            for (std::size_t iy : {2u, 10u, 18u}) {
                EXPECT_NEAR(a.node(it, ix, iy).phi, b.node(it, ix, iy).phi, 1e-9);
            }
        }
    }
}

TEST(Flow, PureAreaLimitMatchesLoopSequence) {
    // H = (1, y): the bracket [H1, H2] = 1 drives phi by the swept area.
    const auto field = field_of("pure-area");
    FlowGridSpec g = grid_on(4);
    const auto limit = solve_flow_rough(field, pure_area_limit(g.times, 0.25), g);
    const auto loops = solve_flow_smooth(field, pure_area_sequence(16, 0.25), g);
    EXPECT_NEAR(limit.eval(0.0, 0.0, 0.2).phi, loops.eval(0.0, 0.0, 0.2).phi, 5e-3);
}

TEST(Flow, SmallnessWindowShrinksWithEpsilon) {
    const auto f = solve_flow_smooth(field_of("xyH"), unit_slope(), grid_on(40));
    const auto wide = flow_smallness_window(f, 0.5);
    const auto narrow = flow_smallness_window(f, 0.05);
    EXPECT_GE(wide.h, narrow.h);
    EXPECT_GT(narrow.h, 0.0);
    const std::size_t it = f.times().size() - 1 - static_cast<std::size_t>(std::lround(narrow.h * 40));
    EXPECT_LE(f.deviation_at(it), 0.05);
}

TEST(Flow, RejectsRoughPathsBeyondLevelTwo) {
    EXPECT_THROW(lift_smooth(unit_slope(), 3.2), UnsupportedError);
}
