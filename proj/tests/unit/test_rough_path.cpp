#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <roughbsde/errors.hpp>
#include <roughbsde/rng.hpp>
#include <roughbsde/rough_path.hpp>

#include "oracles.hpp"

using namespace rbsde;

namespace {

PiecewiseLinearPath l_path() {
    return PiecewiseLinearPath({0.0, 0.5, 1.0}, {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}});
}

PiecewiseLinearPath random_path(std::uint64_t seed, std::size_t knots, std::size_t dim) {
    CounterRng rng(seed);
    std::vector<double> t{0.0};
    for (std::size_t k = 1; k < knots; ++k) t.push_back(t.back() + 0.05 + rng.uniform());
    std::vector<double> flat;
    for (std::size_t k = 0; k < knots * dim; ++k) flat.push_back(k < dim ? 0.0 : rng.normal());
    return PiecewiseLinearPath(t, dim, flat);
}

double signature_gap(const Signature& a, const Signature& b) {
    double g = 0.0;
    for (std::size_t k = 0; k < a.level1.size(); ++k) g = std::max(g, std::abs(a.level1[k] - b.level1[k]));
    for (std::size_t k = 0; k < a.level2.size(); ++k) g = std::max(g, std::abs(a.level2[k] - b.level2[k]));
    return g;
}

}  // namespace

TEST(PiecewiseLinearPath, RejectsMalformedKnots) {
    EXPECT_THROW(PiecewiseLinearPath({0.0, 0.5, 0.5}, {{0.0}, {1.0}, {2.0}}), InvalidPathError);
    EXPECT_THROW(PiecewiseLinearPath({0.1, 0.5}, {{0.0}, {1.0}}), InvalidPathError);
    EXPECT_THROW(PiecewiseLinearPath({0.0}, {{0.0}}), InvalidPathError);
}

TEST(PiecewiseLinearPath, EvaluatesKnotsExactlyAndInterpolates) {
    const auto p = l_path();
    EXPECT_EQ(p.evaluate(0.5)[0], 1.0);
    EXPECT_DOUBLE_EQ(p.evaluate(0.75)[1], 0.5);
    EXPECT_DOUBLE_EQ(p.evaluate(0.25)[0], 0.5);
}

TEST(Lift, LPathAreaMatchesQuadrature) {
    const auto rp = lift_smooth(l_path(), 2.5);
    const Signature s = rp.signature(0, rp.intervals());
    EXPECT_NEAR(s.area(0, 1), 0.5, 1e-12);
    EXPECT_NEAR(s.area(0, 1), oracle::levy_area(l_path(), 0, 1), 1e-6);
    EXPECT_NEAR(s.area(1, 0), -0.5, 1e-12);
}

TEST(Lift, AreaOfRandomPathsMatchesQuadrature) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto p = random_path(seed, 12, 3);
        const auto rp = lift_smooth(p, 2.5);
        const Signature s = rp.signature(0, rp.intervals());
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                EXPECT_NEAR(s.area(i, j), oracle::levy_area(p, i, j), 1e-9);
            }
        }
    }
}

TEST(Lift, SymmetricPartIsHalfTheSquaredIncrement) {
    const auto rp = lift_smooth(random_path(3, 9, 2), 2.5);
    const Signature s = rp.signature(2, 7);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            const double sym = 0.5 * (s.level2_at(i, j) + s.level2_at(j, i));
            EXPECT_NEAR(sym, 0.5 * s.level1[i] * s.level1[j], 1e-12);
        }
    }
}

TEST(Signature, ChenIdentityOnAllTriples) {
    const auto rp = lift_smooth(random_path(11, 15, 2), 2.5);
    const std::size_t n = rp.intervals();
    for (std::size_t i = 0; i <= n; ++i) {
        for (std::size_t j = i; j <= n; ++j) {
            for (std::size_t k = j; k <= n; ++k) {
                EXPECT_LT(signature_gap(rp.signature(i, k),
                                        compose(rp.signature(i, j), rp.signature(j, k))),
                          1e-12);
            }
        }
    }
}

TEST(Signature, InverseComposesToIdentity) {
    const auto rp = lift_smooth(random_path(5, 6, 3), 2.5);
    const Signature s = rp.signature(1, 5);
    EXPECT_LT(signature_gap(compose(s, inverse(s)), Signature::identity(3)), 1e-12);
    EXPECT_LT(signature_gap(compose(inverse(s), s), Signature::identity(3)), 1e-12);
}

TEST(PVariation, MatchesBruteForceOnScalarPaths) {
    for (std::uint64_t seed = 20; seed < 25; ++seed) {
        const auto p = random_path(seed, 11, 1);
        std::vector<double> vals(p.flat_values().begin(), p.flat_values().end());
        for (double pv : {2.1, 2.5, 2.9}) {
            EXPECT_NEAR(p_variation_norm(lift_smooth(p, pv)), oracle::brute_force_p_variation(vals, pv),
                        1e-12);
        }
    }
}

TEST(PVariation, DistanceToItselfIsZeroAndSymmetric) {
    const auto a = lift_smooth(random_path(2, 8, 2), 2.5);
    const auto b = lift_smooth(random_path(2, 8, 2).scaled(1.1), 2.5);
    EXPECT_EQ(p_variation_distance(a, a), 0.0);
    EXPECT_NEAR(p_variation_distance(a, b), p_variation_distance(b, a), 1e-14);
    EXPECT_GT(p_variation_distance(a, b), 0.0);
}

TEST(Sequences, WongZakaiKnotsCarryBrownianValues) {
    const auto grid = uniform_grid(1.0, 64);
    const auto bm = brownian_path(9, grid, 1);
    const auto wz = wong_zakai_sequence(bm, 3);
    ASSERT_EQ(wz.segments(), 8u);
    for (std::size_t k = 0; k <= 8; ++k) EXPECT_EQ(wz.value(k)[0], bm.value(8 * k)[0]);
    EXPECT_THROW(wong_zakai_sequence(bm, 7), ResolutionError);
}

TEST(Sequences, TriadicNeedsItsKnots) {
    const auto base = merge_grids(uniform_grid(1.0, 8), uniform_grid(1.0, 27));
    const auto bm = brownian_path(4, base, 1);
    EXPECT_EQ(uniform_subsequence(bm, 27).segments(), 27u);
    EXPECT_EQ(wong_zakai_sequence(bm, 3).segments(), 8u);
    EXPECT_THROW(uniform_subsequence(bm, 81), ResolutionError);
}

TEST(Sequences, MergeGridsDropsDuplicates) {
    const auto g = merge_grids(uniform_grid(1.0, 4), uniform_grid(1.0, 2));
    EXPECT_EQ(g.size(), 5u);
    EXPECT_EQ(merge_grids(uniform_grid(1.0, 2), uniform_grid(1.0, 3)).size(), 5u);
}

TEST(Sequences, PureAreaLoopsCloseAndSweepTheArea) {
    const double c = 0.25;
    const auto p = pure_area_sequence(4, c);
    const auto end = p.evaluate(1.0);
    EXPECT_NEAR(end[0], 0.0, 1e-12);
    EXPECT_NEAR(end[1], 0.0, 1e-12);
    // Inscribed 64-gons hold sin(2 pi / 64) / (2 pi / 64) of the disc area.
    const double polygon = 64.0 * std::sin(2.0 * std::numbers::pi / 64.0) / (2.0 * std::numbers::pi);
    const double area = oracle::levy_area(p, 0, 1, 4);
    EXPECT_NEAR(area, std::numbers::pi * c * polygon, 1e-9);
    EXPECT_NEAR(lift_smooth(p, 2.5).signature(0, p.segments()).area(0, 1), area, 1e-9);
}

TEST(Sequences, PureAreaLimitHasZeroIncrements) {
    const auto rp = pure_area_limit(uniform_grid(1.0, 10), 0.25);
    for (std::size_t k = 0; k < rp.intervals(); ++k) {
        EXPECT_EQ(rp.increment(k)[0], 0.0);
        EXPECT_NEAR(rp.area(k)[1], std::numbers::pi * 0.25 * 0.1, 1e-15);
        EXPECT_NEAR(rp.area(k)[2], -std::numbers::pi * 0.25 * 0.1, 1e-15);
    }
}

TEST(Brownian, DeterministicPerSeed) {
    const auto grid = uniform_grid(1.0, 32);
    const auto a = brownian_path(7, grid, 2);
    const auto b = brownian_path(7, grid, 2);
    const auto c = brownian_path(8, grid, 2);
    EXPECT_TRUE(std::equal(a.flat_values().begin(), a.flat_values().end(), b.flat_values().begin()));
    EXPECT_NE(a.flat_values()[5], c.flat_values()[5]);
}

TEST(Brownian, TerminalVarianceMatchesHorizon) {
    // 4000 independent one-dimensional samples; the variance estimate has sd ~ sqrt(2 / n).
    const auto grid = uniform_grid(2.0, 4);
    double s2 = 0.0;
    const int n = 4000;
    for (int k = 0; k < n; ++k) {
        const double v = brownian_path(static_cast<std::uint64_t>(k), grid, 1).value(4)[0];
        s2 += v * v;
    }
    EXPECT_NEAR(s2 / n, 2.0, 4.0 * 2.0 * std::sqrt(2.0 / n));
}
