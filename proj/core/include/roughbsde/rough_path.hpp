#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rbsde {

/// Continuous piecewise-linear path t -> R^d on [0, T], stored as knots.
///
/// Knot times are strictly increasing with times.front() == 0. Values are kept
/// row-major (one row of `dim()` entries per knot). Evaluation at a knot returns
/// the stored value bit-for-bit; between knots it is affine.
class PiecewiseLinearPath {
public:
    PiecewiseLinearPath(std::vector<double> times, std::vector<std::vector<double>> values);
    PiecewiseLinearPath(std::vector<double> times, std::size_t dim, std::vector<double> flat_values);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t knots() const noexcept { return times_.size(); }
    std::size_t segments() const noexcept { return times_.size() - 1; }
    double horizon() const noexcept { return times_.back(); }

    std::span<const double> times() const noexcept { return times_; }
    std::span<const double> value(std::size_t knot) const noexcept {
        return {values_.data() + knot * dim_, dim_};
    }
    std::span<const double> flat_values() const noexcept { return values_; }

    std::vector<double> evaluate(double t) const;

    /// Same path re-expressed on other knots (exact when the new knots contain the old ones).
    PiecewiseLinearPath resampled(std::span<const double> new_times) const;

    PiecewiseLinearPath scaled(double factor) const;

private:
    std::vector<double> times_;
    std::size_t dim_;
    std::vector<double> values_;
};

/// Truncated (level <= 2) signature element: level1 in R^d, level2 a d x d tensor.
struct Signature {
    std::size_t dim = 0;
    std::vector<double> level1;
    std::vector<double> level2;  // row-major d x d

    static Signature identity(std::size_t dim);

    double level2_at(std::size_t i, std::size_t j) const { return level2[i * dim + j]; }
    /// Antisymmetric part a^{ij} = (X^{ij} - X^{ji}) / 2.
    double area(std::size_t i, std::size_t j) const {
        return 0.5 * (level2[i * dim + j] - level2[j * dim + i]);
    }
};

/// Chen product in the step-2 truncated tensor algebra.
Signature compose(const Signature& a, const Signature& b);
Signature inverse(const Signature& a);

/// Level-2 geometric rough path sampled on a time grid.
///
/// Each grid interval carries its increment and its Levy area
/// a^{ij} = 1/2 int (dz^i dz^j - dz^j dz^i); the symmetric level-2 part is implied
/// to be half the square of the increment. Signatures over any pair of grid points
/// are obtained by Chen composition.
class RoughPath2 {
public:
    RoughPath2(std::vector<double> times, std::size_t dim, std::vector<double> increments,
               std::vector<double> areas, double p);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t intervals() const noexcept { return times_.size() - 1; }
    double p() const noexcept { return p_; }
    double horizon() const noexcept { return times_.back(); }
    std::span<const double> times() const noexcept { return times_; }

    std::span<const double> increment(std::size_t k) const noexcept {
        return {increments_.data() + k * dim_, dim_};
    }
    /// d x d antisymmetric area of interval k, row-major.
    std::span<const double> area(std::size_t k) const noexcept {
        return {areas_.data() + k * dim_ * dim_, dim_ * dim_};
    }

    Signature interval_signature(std::size_t k) const;

    /// Signature between grid points i <= j.
    Signature signature(std::size_t i, std::size_t j) const;

private:
    std::vector<double> times_;
    std::size_t dim_;
    std::vector<double> increments_;
    std::vector<double> areas_;
    double p_;
    std::vector<double> prefix1_;  // (intervals + 1) x d
    std::vector<double> prefix2_;  // (intervals + 1) x d x d
};

/// Uniform grid 0 = t_0 < ... < t_n = horizon.
std::vector<double> uniform_grid(double horizon, std::size_t intervals);

/// Sorted union of two grids; points closer than 1e-12 (relative to the horizon) are merged.
std::vector<double> merge_grids(std::span<const double> a, std::span<const double> b);

/// Canonical lift of a piecewise-linear path onto its own knots.
RoughPath2 lift_smooth(const PiecewiseLinearPath& path, double p);

/// Homogeneous p-variation over partitions drawn from the stored grid, using the
/// per-interval norm max(|inc|, sqrt(2 |area|)).
double p_variation_norm(const RoughPath2& rp);

/// Inhomogeneous p-variation distance between two rough paths on the same grid:
/// grid-sup of (sum |dX1|^p)^{1/p} plus grid-sup of (sum |dX2|^{p/2})^{2/p}.
double p_variation_distance(const RoughPath2& a, const RoughPath2& b);

/// Dyadic piecewise-linear interpolation with 2^level segments.
PiecewiseLinearPath wong_zakai_sequence(const PiecewiseLinearPath& bm, int level);

/// Piecewise-linear interpolation on `segments` uniform pieces; every node must be a knot of `bm`.
PiecewiseLinearPath uniform_subsequence(const PiecewiseLinearPath& bm, std::size_t segments);

/// Polygonal loops t -> sqrt(c) (cos(2 pi n^2 t) - 1, sin(2 pi n^2 t)) / n on [0, horizon].
/// The level-1 increment vanishes at whole loops and the total area tends to pi c horizon.
PiecewiseLinearPath pure_area_sequence(int n, double scale, double horizon = 1.0,
                                       int knots_per_loop = 64);

/// Limit of `pure_area_sequence`: zero increments, area pi c dt on every interval.
RoughPath2 pure_area_limit(std::span<const double> times, double scale, double p = 2.5);

/// Brownian sample (d independent components) at the given knots.
PiecewiseLinearPath brownian_path(std::uint64_t seed, std::span<const double> times,
                                  std::size_t dim);

/// Canonical lift of the piecewise-linear interpolation of a Brownian sample on a uniform grid.
RoughPath2 brownian_lift_sample(std::uint64_t seed, std::span<const double> grid,
                                std::size_t dim, double p = 2.5);

}  // namespace rbsde
