#include "roughbsde/rough_path.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numbers>
#include <string>

#include "roughbsde/errors.hpp"
#include "roughbsde/rng.hpp"

namespace rbsde {

namespace {

void validate_times(std::span<const double> times) {
    if (times.size() < 2) {
        throw InvalidPathError("path needs at least 2 knots");
    }
    if (times.front() != 0.0) {
        throw InvalidPathError("path must start at t = 0");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1]) || !std::isfinite(times[i])) {
            throw InvalidPathError("knot times must be strictly increasing (index " +
                                   std::to_string(i) + ")");
        }
    }
}

// Index of the knot (within tolerance) equal to t, or npos.
std::size_t find_knot(std::span<const double> times, double t) {
    const double tol = 1e-12 * std::max(1.0, std::abs(times.back()));
    auto it = std::lower_bound(times.begin(), times.end(), t - tol);
    if (it != times.end() && std::abs(*it - t) <= tol) {
        return static_cast<std::size_t>(it - times.begin());
    }
    return static_cast<std::size_t>(-1);
}

double interval_norm(std::span<const double> inc, std::span<const double> area, std::size_t d) {
    double s1 = 0.0;
    for (double v : inc) s1 += v * v;
    double s2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            s2 += area[i * d + j] * area[i * d + j];
        }
    }
    return std::max(std::sqrt(s1), std::sqrt(2.0 * std::sqrt(s2)));
}

// sup over grid partitions of sum_k w(t_k, t_{k+1}) by dynamic programming.
template <typename Weight>
double partition_sup(std::size_t points, Weight&& weight) {
    std::vector<double> best(points, 0.0);
    for (std::size_t j = 1; j < points; ++j) {
        double b = 0.0;
        for (std::size_t i = 0; i < j; ++i) {
            b = std::max(b, best[i] + weight(i, j));
        }
        best[j] = b;
    }
    return best.back();
}

}  // namespace

// ---------------------------------------------------------------------------
// PiecewiseLinearPath

PiecewiseLinearPath::PiecewiseLinearPath(std::vector<double> times,
                                         std::vector<std::vector<double>> values)
    : times_(std::move(times)), dim_(values.empty() ? 0 : values.front().size()) {
    validate_times(times_);
    if (values.size() != times_.size()) {
        throw InvalidPathError("one value per knot required");
    }
    if (dim_ == 0) {
        throw InvalidPathError("path dimension must be positive");
    }
    values_.reserve(times_.size() * dim_);
    for (const auto& v : values) {
        if (v.size() != dim_) {
            throw InvalidPathError("inconsistent value dimension");
        }
        values_.insert(values_.end(), v.begin(), v.end());
    }
}

PiecewiseLinearPath::PiecewiseLinearPath(std::vector<double> times, std::size_t dim,
                                         std::vector<double> flat_values)
    : times_(std::move(times)), dim_(dim), values_(std::move(flat_values)) {
    validate_times(times_);
    if (dim_ == 0 || values_.size() != times_.size() * dim_) {
        throw InvalidPathError("flat value array does not match knots x dim");
    }
}

std::vector<double> PiecewiseLinearPath::evaluate(double t) const {
    std::vector<double> out(dim_);
    if (t <= times_.front()) {
        auto v = value(0);
        std::copy(v.begin(), v.end(), out.begin());
        return out;
    }
    if (t >= times_.back()) {
        auto v = value(knots() - 1);
        std::copy(v.begin(), v.end(), out.begin());
        return out;
    }
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
    if (times_[k] == t) {
        auto v = value(k);
        std::copy(v.begin(), v.end(), out.begin());
        return out;
    }
    const double w = (t - times_[k]) / (times_[k + 1] - times_[k]);
    auto a = value(k);
    auto b = value(k + 1);
    for (std::size_t i = 0; i < dim_; ++i) {
        out[i] = a[i] + w * (b[i] - a[i]);
    }
    return out;
}

PiecewiseLinearPath PiecewiseLinearPath::resampled(std::span<const double> new_times) const {
    std::vector<double> flat;
    flat.reserve(new_times.size() * dim_);
    for (double t : new_times) {
        auto v = evaluate(t);
        flat.insert(flat.end(), v.begin(), v.end());
    }
    return PiecewiseLinearPath({new_times.begin(), new_times.end()}, dim_, std::move(flat));
}

PiecewiseLinearPath PiecewiseLinearPath::scaled(double factor) const {
    std::vector<double> flat(values_);
    for (double& v : flat) v *= factor;
    return PiecewiseLinearPath(times_, dim_, std::move(flat));
}

// ---------------------------------------------------------------------------
// Signatures

Signature Signature::identity(std::size_t dim) {
    return Signature{dim, std::vector<double>(dim, 0.0), std::vector<double>(dim * dim, 0.0)};
}

Signature compose(const Signature& a, const Signature& b) {
    const std::size_t d = a.dim;
    Signature out = Signature::identity(d);
    for (std::size_t i = 0; i < d; ++i) {
        out.level1[i] = a.level1[i] + b.level1[i];
        for (std::size_t j = 0; j < d; ++j) {
            out.level2[i * d + j] =
                a.level2[i * d + j] + b.level2[i * d + j] + a.level1[i] * b.level1[j];
        }
    }
    return out;
}

Signature inverse(const Signature& a) {
    const std::size_t d = a.dim;
    Signature out = Signature::identity(d);
    for (std::size_t i = 0; i < d; ++i) {
        out.level1[i] = -a.level1[i];
        for (std::size_t j = 0; j < d; ++j) {
            out.level2[i * d + j] = -a.level2[i * d + j] + a.level1[i] * a.level1[j];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// RoughPath2

RoughPath2::RoughPath2(std::vector<double> times, std::size_t dim, std::vector<double> increments,
                       std::vector<double> areas, double p)
    : times_(std::move(times)),
      dim_(dim),
      increments_(std::move(increments)),
      areas_(std::move(areas)),
      p_(p) {
    validate_times(times_);
    if (!(p_ >= 1.0)) {
        throw InvalidPathError("p-variation exponent must be >= 1");
    }
    if (p_ >= 3.0) {
        throw UnsupportedError("rough paths with p >= 3 need level-3 signatures");
    }
    const std::size_t n = intervals();
    if (dim_ == 0 || increments_.size() != n * dim_ || areas_.size() != n * dim_ * dim_) {
        throw InvalidPathError("increment/area arrays do not match grid and dimension");
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double* a = areas_.data() + k * dim_ * dim_;
        for (std::size_t i = 0; i < dim_; ++i) {
            if (a[i * dim_ + i] != 0.0) {
                throw InvalidPathError("area diagonal must vanish");
            }
            for (std::size_t j = i + 1; j < dim_; ++j) {
                if (a[i * dim_ + j] != -a[j * dim_ + i]) {
                    throw InvalidPathError("area matrix must be antisymmetric");
                }
            }
        }
    }

    prefix1_.assign((n + 1) * dim_, 0.0);
    prefix2_.assign((n + 1) * dim_ * dim_, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double* c = prefix1_.data() + k * dim_;
        const double* l = prefix2_.data() + k * dim_ * dim_;
        double* cn = prefix1_.data() + (k + 1) * dim_;
        double* ln = prefix2_.data() + (k + 1) * dim_ * dim_;
        auto inc = increment(k);
        auto ar = area(k);
        for (std::size_t i = 0; i < dim_; ++i) {
            cn[i] = c[i] + inc[i];
            for (std::size_t j = 0; j < dim_; ++j) {
                const double interval2 = 0.5 * inc[i] * inc[j] + ar[i * dim_ + j];
                ln[i * dim_ + j] = l[i * dim_ + j] + interval2 + c[i] * inc[j];
            }
        }
    }
}

Signature RoughPath2::interval_signature(std::size_t k) const {
    Signature s = Signature::identity(dim_);
    auto inc = increment(k);
    auto ar = area(k);
    for (std::size_t i = 0; i < dim_; ++i) {
        s.level1[i] = inc[i];
        for (std::size_t j = 0; j < dim_; ++j) {
            s.level2[i * dim_ + j] = 0.5 * inc[i] * inc[j] + ar[i * dim_ + j];
        }
    }
    return s;
}

Signature RoughPath2::signature(std::size_t i, std::size_t j) const {
    if (i > j || j > intervals()) {
        throw DomainError("signature indices out of order or out of range");
    }
    Signature s = Signature::identity(dim_);
    const double* ci = prefix1_.data() + i * dim_;
    const double* cj = prefix1_.data() + j * dim_;
    const double* li = prefix2_.data() + i * dim_ * dim_;
    const double* lj = prefix2_.data() + j * dim_ * dim_;
    for (std::size_t a = 0; a < dim_; ++a) {
        s.level1[a] = cj[a] - ci[a];
    }
    // (c_i, L_i)^{-1} (c_j, L_j) = (c_j - c_i, L_j - L_i - c_i (x) (c_j - c_i))
    for (std::size_t a = 0; a < dim_; ++a) {
        for (std::size_t b = 0; b < dim_; ++b) {
            s.level2[a * dim_ + b] = lj[a * dim_ + b] - li[a * dim_ + b] - ci[a] * s.level1[b];
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Operations

std::vector<double> uniform_grid(double horizon, std::size_t intervals) {
    if (intervals == 0 || !(horizon > 0.0)) {
        throw InvalidPathError("uniform grid needs a positive horizon and at least one interval");
    }
    std::vector<double> t(intervals + 1);
    for (std::size_t i = 0; i <= intervals; ++i) {
        t[i] = horizon * static_cast<double>(i) / static_cast<double>(intervals);
    }
    t.back() = horizon;
    return t;
}

std::vector<double> merge_grids(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    if (out.empty()) return out;
    const double tol = 1e-12 * std::max(1.0, std::abs(out.back()));
    std::vector<double> merged{out.front()};
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i] - merged.back() > tol) merged.push_back(out[i]);
    }
    return merged;
}

RoughPath2 lift_smooth(const PiecewiseLinearPath& path, double p) {
    const std::size_t d = path.dim();
    const std::size_t n = path.segments();
    std::vector<double> inc(n * d);
    for (std::size_t k = 0; k < n; ++k) {
        auto a = path.value(k);
        auto b = path.value(k + 1);
        for (std::size_t i = 0; i < d; ++i) {
            inc[k * d + i] = b[i] - a[i];
        }
    }
    // A straight segment encloses no area; areas over longer stretches come from Chen.
    std::vector<double> areas(n * d * d, 0.0);
    auto times = path.times();
    return RoughPath2({times.begin(), times.end()}, d, std::move(inc), std::move(areas), p);
}

double p_variation_norm(const RoughPath2& rp) {
    const std::size_t d = rp.dim();
    const double p = rp.p();
    return std::pow(partition_sup(rp.intervals() + 1,
                                  [&](std::size_t i, std::size_t j) {
                                      const Signature s = rp.signature(i, j);
                                      std::vector<double> area(d * d);
                                      for (std::size_t a = 0; a < d; ++a) {
                                          for (std::size_t b = 0; b < d; ++b) {
                                              area[a * d + b] = s.area(a, b);
                                          }
                                      }
                                      return std::pow(interval_norm(s.level1, area, d), p);
                                  }),
                    1.0 / p);
}

double p_variation_distance(const RoughPath2& a, const RoughPath2& b) {
    if (a.dim() != b.dim() || a.intervals() != b.intervals()) {
        throw DomainError("rough paths must share grid and dimension");
    }
    for (std::size_t k = 0; k <= a.intervals(); ++k) {
        if (a.times()[k] != b.times()[k]) {
            throw DomainError("rough paths must share the same grid");
        }
    }
    const std::size_t d = a.dim();
    const double p = std::max(a.p(), b.p());
    const std::size_t points = a.intervals() + 1;

    // Cache all pairwise differences once; both sups reuse them.
    std::vector<double> diff1(points * points, 0.0);
    std::vector<double> diff2(points * points, 0.0);
    for (std::size_t i = 0; i < points; ++i) {
        for (std::size_t j = i + 1; j < points; ++j) {
            const Signature sa = a.signature(i, j);
            const Signature sb = b.signature(i, j);
            double s1 = 0.0;
            for (std::size_t q = 0; q < d; ++q) {
                const double e = sa.level1[q] - sb.level1[q];
                s1 += e * e;
            }
            double s2 = 0.0;
            for (std::size_t q = 0; q < d * d; ++q) {
                const double e = sa.level2[q] - sb.level2[q];
                s2 += e * e;
            }
            diff1[i * points + j] = std::sqrt(s1);
            diff2[i * points + j] = std::sqrt(s2);
        }
    }
    const double first = std::pow(
        partition_sup(points,
                      [&](std::size_t i, std::size_t j) {
                          return std::pow(diff1[i * points + j], p);
                      }),
        1.0 / p);
    const double second = std::pow(
        partition_sup(points,
                      [&](std::size_t i, std::size_t j) {
                          return std::pow(diff2[i * points + j], p / 2.0);
                      }),
        2.0 / p);
    return first + second;
}

PiecewiseLinearPath uniform_subsequence(const PiecewiseLinearPath& bm, std::size_t segments) {
    if (segments == 0) {
        throw ResolutionError("need at least one segment");
    }
    const auto grid = uniform_grid(bm.horizon(), segments);
    std::vector<double> flat;
    flat.reserve(grid.size() * bm.dim());
    for (double t : grid) {
        const std::size_t k = find_knot(bm.times(), t);
        if (k == static_cast<std::size_t>(-1)) {
            throw ResolutionError("source path has no knot at t = " + std::to_string(t) +
                                  " (grid too coarse for " + std::to_string(segments) +
                                  " segments)");
        }
        auto v = bm.value(k);
        flat.insert(flat.end(), v.begin(), v.end());
    }
    return PiecewiseLinearPath(grid, bm.dim(), std::move(flat));
}

PiecewiseLinearPath wong_zakai_sequence(const PiecewiseLinearPath& bm, int level) {
    if (level < 0 || level > 40) {
        throw ResolutionError("dyadic level out of range");
    }
    return uniform_subsequence(bm, std::size_t{1} << level);
}

PiecewiseLinearPath pure_area_sequence(int n, double scale, double horizon, int knots_per_loop) {
    if (n < 1) {
        throw InvalidPathError("pure-area index n must be >= 1");
    }
    if (knots_per_loop < 32) {
        throw ResolutionError("pure-area loops need at least 32 knots per loop");
    }
    if (!(scale >= 0.0) || !(horizon > 0.0)) {
        throw InvalidPathError("pure-area scale must be >= 0 and horizon > 0");
    }
    const double freq = static_cast<double>(n) * n;
    const double loops = freq * horizon;
    const auto segments =
        static_cast<std::size_t>(std::ceil(loops * knots_per_loop - 1e-9));
    const auto grid = uniform_grid(horizon, std::max<std::size_t>(segments, 1));
    const double radius = std::sqrt(scale) / n;
    std::vector<double> flat;
    flat.reserve(grid.size() * 2);
    for (double t : grid) {
        const double theta = 2.0 * std::numbers::pi * freq * t;
        flat.push_back(radius * (std::cos(theta) - 1.0));
        flat.push_back(radius * std::sin(theta));
    }
    return PiecewiseLinearPath(grid, 2, std::move(flat));
}

RoughPath2 pure_area_limit(std::span<const double> times, double scale, double p) {
    if (p < 2.0) {
        throw InvalidPathError("a pure-area path has finite p-variation only for p >= 2");
    }
    const std::size_t n = times.size() - 1;
    std::vector<double> inc(n * 2, 0.0);
    std::vector<double> areas(n * 4, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double a = std::numbers::pi * scale * (times[k + 1] - times[k]);
        areas[k * 4 + 1] = a;
        areas[k * 4 + 2] = -a;
    }
    return RoughPath2({times.begin(), times.end()}, 2, std::move(inc), std::move(areas), p);
}

PiecewiseLinearPath brownian_path(std::uint64_t seed, std::span<const double> times,
                                  std::size_t dim) {
    validate_times(times);
    std::vector<double> flat(times.size() * dim, 0.0);
    for (std::size_t c = 0; c < dim; ++c) {
        CounterRng rng(seed, c);
        for (std::size_t k = 1; k < times.size(); ++k) {
            const double sd = std::sqrt(times[k] - times[k - 1]);
            flat[k * dim + c] = flat[(k - 1) * dim + c] + sd * rng.normal();
        }
    }
    return PiecewiseLinearPath({times.begin(), times.end()}, dim, std::move(flat));
}

RoughPath2 brownian_lift_sample(std::uint64_t seed, std::span<const double> grid, std::size_t dim,
                                double p) {
    validate_times(grid);
    const double step = grid[1] - grid[0];
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (std::abs((grid[k] - grid[k - 1]) - step) > 1e-9 * std::max(1.0, step)) {
            throw InvalidPathError("Brownian lift sampling requires a uniform grid");
        }
    }
    return lift_smooth(brownian_path(seed, grid, dim), p);
}

}  // namespace rbsde
