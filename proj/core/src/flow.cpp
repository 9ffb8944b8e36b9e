#include "roughbsde/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "roughbsde/errors.hpp"

namespace rbsde {

std::array<double, FlowJet::size> FlowJet::to_array() const {
    return {phi, px, py, pxx, pxy, pyy, pyyy, pxyy, pxxy};
}

FlowJet FlowJet::from_array(const std::array<double, size>& a) {
    return FlowJet{a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]};
}

namespace {

using State = std::array<double, FlowJet::size>;

constexpr double kNodeTol = 1e-12;

bool near(double a, double b) {
    return std::abs(a - b) <= kNodeTol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

// Sorted cut points on [t0, te]: every breakpoint inside, then every extra point that is
// not already (numerically) present. Breakpoints win ties so that table nodes are hit exactly.
std::vector<double> cut_points(double t0, double te, std::span<const double> breakpoints,
                               std::span<const double> extra) {
    std::vector<double> cuts{t0, te};
    for (double b : breakpoints) {
        if (b > t0 && b < te && !near(b, t0) && !near(b, te)) cuts.push_back(b);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(), near), cuts.end());
    std::vector<double> added;
    for (double e : extra) {
        if (!(e > t0 && e < te)) continue;
        auto it = std::lower_bound(cuts.begin(), cuts.end(), e);
        const bool dup = (it != cuts.end() && near(*it, e)) || (it != cuts.begin() && near(*(it - 1), e));
        if (!dup) added.push_back(e);
    }
    cuts.insert(cuts.end(), added.begin(), added.end());
    std::sort(cuts.begin(), cuts.end());
    return cuts;
}

void check_window(double t0, double te, double horizon) {
    if (!(t0 < te)) {
        throw DomainError("flow window must satisfy t0 < te");
    }
    if (t0 < -kNodeTol || te > horizon * (1.0 + kNodeTol) + kNodeTol) {
        throw DomainError("flow window [" + std::to_string(t0) + ", " + std::to_string(te) +
                          "] exceeds the driver horizon " + std::to_string(horizon));
    }
}

double piece_size(const DriverPiece& p) {
    double s = 0.0;
    for (double v : p.increment) s += std::abs(v);
    if (p.has_area) {
        const std::size_t d = p.increment.size();
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t k = j + 1; k < d; ++k) s += 2.0 * std::abs(p.area[j * d + k]);
        }
    }
    return s;
}

bool piece_is_zero(const DriverPiece& p) {
    for (double v : p.increment) {
        if (v != 0.0) return false;
    }
    if (p.has_area) {
        for (double v : p.area) {
            if (v != 0.0) return false;
        }
    }
    return true;
}

DriverPiece partial_piece(const DriverPiece& p, double t) {
    const double r = (p.t_end - t) / (p.t_end - p.t_start);
    DriverPiece q = p;
    q.t_start = t;
    for (double& v : q.increment) v *= r;
    for (double& v : q.area) v *= r;
    return q;
}

// Log-ODE vector field of one piece, run for unit time:
// W = sum_k inc^k H_k - sum_{j<k} a^{jk} [H_j, H_k] with [V, W] = W' V - V' W.
// The area enters with a minus sign because the flow runs backward in time.
class PieceField {
public:
    PieceField(const VectorFieldFamily& field, const DriverPiece& piece)
        : field_(field), piece_(piece), d_(field.dim()) {
        for (std::size_t k = 0; k < d_; ++k) {
            if (!field_.component_is_zero(k) && piece_.increment[k] != 0.0) active_.push_back(k);
        }
        if (piece_.has_area) {
            for (std::size_t j = 0; j < d_; ++j) {
                for (std::size_t k = j + 1; k < d_; ++k) {
                    const double a = piece_.area[j * d_ + k];
                    if (a != 0.0 && !field_.component_is_zero(j) && !field_.component_is_zero(k)) {
                        brackets_.push_back({j, k, -a});
                    }
                }
            }
        }
    }

    bool trivial() const { return active_.empty() && brackets_.empty(); }

    double value(double x, double y) const {
        double v = 0.0;
        for (std::size_t k : active_) v += piece_.increment[k] * field_.value(k, x, y);
        for (const auto& b : brackets_) v += b.coef * bracket(b.j, b.k, x, y);
        return v;
    }

    FieldJet jet(double x, double y) const {
        FieldJet v;
        for (std::size_t k : active_) {
            FieldJet j = field_.jet(k, x, y);
            j *= piece_.increment[k];
            v += j;
        }
        for (const auto& b : brackets_) {
            FieldJet j = finite_difference_jet(
                [this, &b](double xx, double yy) { return bracket(b.j, b.k, xx, yy); }, x, y);
            j *= b.coef;
            v += j;
        }
        return v;
    }

private:
    struct Bracket {
        std::size_t j, k;
        double coef;
    };

    double bracket(std::size_t j, std::size_t k, double x, double y) const {
        const FieldJet a = field_.jet(j, x, y);
        const FieldJet b = field_.jet(k, x, y);
        return b.hy * a.h - a.hy * b.h;
    }

    const VectorFieldFamily& field_;
    const DriverPiece& piece_;
    std::size_t d_;
    std::vector<std::size_t> active_;
    std::vector<Bracket> brackets_;
};

// Right-hand side of the prolonged system for phi and its derivative family.
State prolonged_rhs(const PieceField& f, double x, const State& s) {
    const FieldJet v = f.jet(x, s[0]);
    const double px = s[1], py = s[2], pxx = s[3], pxy = s[4], pyy = s[5], pyyy = s[6],
                 pxyy = s[7], pxxy = s[8];
    State r;
    r[0] = v.h;
    r[1] = v.hx + v.hy * px;
    r[2] = v.hy * py;
    r[3] = v.hxx + 2.0 * v.hxy * px + v.hyy * px * px + v.hy * pxx;
    r[4] = v.hxy * py + v.hyy * px * py + v.hy * pxy;
    r[5] = v.hyy * py * py + v.hy * pyy;
    r[6] = v.hyyy * py * py * py + 3.0 * v.hyy * py * pyy + v.hy * pyyy;
    r[7] = (v.hxyy + v.hyyy * px) * py * py + 2.0 * v.hyy * py * pxy + (v.hxy + v.hyy * px) * pyy +
           v.hy * pxyy;
    r[8] = v.hxxy * py + 2.0 * v.hxyy * px * py + 2.0 * v.hxy * pxy + v.hyyy * px * px * py +
           v.hyy * pxx * py + 2.0 * v.hyy * px * pxy + v.hy * pxxy;
    return r;
}

std::size_t substeps(const VectorFieldFamily& field, const DriverPiece& p, double max_step) {
    const double size = field.bound() * piece_size(p);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(size / max_step)));
}

void rk4_prolonged(const PieceField& f, double x, State& s, std::size_t n) {
    const double h = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const State k1 = prolonged_rhs(f, x, s);
        State tmp;
        for (std::size_t q = 0; q < s.size(); ++q) tmp[q] = s[q] + 0.5 * h * k1[q];
        const State k2 = prolonged_rhs(f, x, tmp);
        for (std::size_t q = 0; q < s.size(); ++q) tmp[q] = s[q] + 0.5 * h * k2[q];
        const State k3 = prolonged_rhs(f, x, tmp);
        for (std::size_t q = 0; q < s.size(); ++q) tmp[q] = s[q] + h * k3[q];
        const State k4 = prolonged_rhs(f, x, tmp);
        for (std::size_t q = 0; q < s.size(); ++q) {
            s[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
        }
    }
}

double rk4_scalar(const PieceField& f, double x, double y, std::size_t n) {
    const double h = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double k1 = f.value(x, y);
        const double k2 = f.value(x, y + 0.5 * h * k1);
        const double k3 = f.value(x, y + 0.5 * h * k2);
        const double k4 = f.value(x, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

State identity_state(double y) { return FlowJet::identity(y).to_array(); }

// One backward step across a piece with the scheme's sub-step count (scaled by `refine`).
void step_piece(const VectorFieldFamily& field, const DriverPiece& p, double max_step, double x,
                State& s, std::size_t refine = 1) {
    const PieceField f(field, p);
    if (f.trivial()) return;
    rk4_prolonged(f, x, s, refine * substeps(field, p, max_step));
}

struct Stencil {
    std::size_t first = 0;
    std::size_t count = 1;
    std::array<double, 4> w{1.0, 0.0, 0.0, 0.0};
};

template <typename NodeFn>
Stencil lagrange_stencil(std::size_t n, double v, NodeFn node) {
    Stencil st;
    if (n == 1) return st;
    std::size_t lo = 0, hi = n - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (node(mid) <= v ? lo : hi) = mid;
    }
    const double span = node(n - 1) - node(0);
    const double tol = kNodeTol * std::max(1.0, std::abs(span));
    if (std::abs(v - node(lo)) <= tol) {
        st.first = lo;
        return st;
    }
    if (std::abs(v - node(hi)) <= tol) {
        st.first = hi;
        return st;
    }
    st.count = std::min<std::size_t>(4, n);
    std::size_t first = lo >= 1 ? lo - 1 : 0;
    first = std::min(first, n - st.count);
    st.first = first;
    for (std::size_t a = 0; a < st.count; ++a) {
        double w = 1.0;
        const double xa = node(first + a);
        for (std::size_t b = 0; b < st.count; ++b) {
            if (b == a) continue;
            const double xb = node(first + b);
            w *= (v - xb) / (xa - xb);
        }
        st.w[a] = w;
    }
    return st;
}

}  // namespace

std::vector<DriverPiece> driver_pieces(const PiecewiseLinearPath& path, double t0, double te,
                                       std::span<const double> breakpoints) {
    check_window(t0, te, path.horizon());
    te = std::min(te, path.horizon());
    const auto cuts = cut_points(t0, te, breakpoints, path.times());
    std::vector<DriverPiece> pieces;
    pieces.reserve(cuts.size() - 1);
    std::vector<double> prev = path.evaluate(cuts.front());
    for (std::size_t i = 1; i < cuts.size(); ++i) {
        std::vector<double> cur = path.evaluate(cuts[i]);
        DriverPiece p;
        p.t_start = cuts[i - 1];
        p.t_end = cuts[i];
        p.increment.resize(path.dim());
        for (std::size_t k = 0; k < path.dim(); ++k) p.increment[k] = cur[k] - prev[k];
        p.area.assign(path.dim() * path.dim(), 0.0);
        pieces.push_back(std::move(p));
        prev = std::move(cur);
    }
    return pieces;
}

std::vector<DriverPiece> driver_pieces(const RoughPath2& rp, double t0, double te,
                                       std::span<const double> breakpoints) {
    check_window(t0, te, rp.horizon());
    te = std::min(te, rp.horizon());
    const auto cuts = cut_points(t0, te, breakpoints, rp.times());
    const auto grid = rp.times();
    const std::size_t d = rp.dim();
    std::vector<DriverPiece> pieces;
    pieces.reserve(cuts.size() - 1);
    std::size_t k = 0;
    for (std::size_t i = 1; i < cuts.size(); ++i) {
        const double a = cuts[i - 1];
        const double b = cuts[i];
        const double mid = 0.5 * (a + b);
        while (k + 1 < rp.intervals() && grid[k + 1] <= mid) ++k;
        const double r = (b - a) / (grid[k + 1] - grid[k]);
        DriverPiece p;
        p.t_start = a;
        p.t_end = b;
        p.increment.resize(d);
        p.area.assign(d * d, 0.0);
        const auto inc = rp.increment(k);
        const auto area = rp.area(k);
        for (std::size_t j = 0; j < d; ++j) p.increment[j] = r * inc[j];
        for (std::size_t j = 0; j < d * d; ++j) {
            p.area[j] = r * area[j];
            if (area[j] != 0.0) p.has_area = true;
        }
        pieces.push_back(std::move(p));
    }
    return pieces;
}

class FlowBuilder {
public:
    static FlowEnsemble build(std::shared_ptr<const VectorFieldFamily> field,
                              std::vector<DriverPiece> pieces, FlowGridSpec grid) {
        if (!field) throw DomainError("flow needs a vector field family");
        if (grid.times.size() < 2) throw DomainError("flow table needs at least 2 time nodes");
        for (std::size_t i = 1; i < grid.times.size(); ++i) {
            if (!(grid.times[i] > grid.times[i - 1])) {
                throw DomainError("flow table times must be strictly increasing");
            }
        }
        if (grid.nx < 1 || grid.ny < 2 || !(grid.y_hi > grid.y_lo) || grid.x_hi < grid.x_lo ||
            (grid.nx > 1 && !(grid.x_hi > grid.x_lo))) {
            throw DomainError("flow table needs nx >= 1, ny >= 2 and non-empty x/y ranges");
        }
        if (!(grid.max_step > 0.0)) throw DomainError("flow max_step must be positive");

        FlowEnsemble fl;
        fl.field_ = std::move(field);
        fl.pieces_ = std::move(pieces);
        fl.times_ = grid.times;
        fl.x_lo_ = grid.x_lo;
        fl.x_hi_ = grid.x_hi;
        fl.nx_ = grid.nx;
        fl.dx_ = grid.nx > 1 ? (grid.x_hi - grid.x_lo) / static_cast<double>(grid.nx - 1) : 1.0;
        fl.y_lo_ = grid.y_lo;
        fl.y_hi_ = grid.y_hi;
        fl.ny_ = grid.ny;
        fl.dy_ = (grid.y_hi - grid.y_lo) / static_cast<double>(grid.ny - 1);
        fl.max_step_ = grid.max_step;

        fl.identity_ = fl.field_->is_zero() ||
                       std::all_of(fl.pieces_.begin(), fl.pieces_.end(), piece_is_zero);
        if (fl.identity_) return fl;

        // Table node index reached at the start of each piece (or npos).
        const std::size_t nt = fl.times_.size();
        std::vector<std::size_t> node_at_start(fl.pieces_.size(), static_cast<std::size_t>(-1));
        {
            std::size_t it = nt - 1;
            for (std::size_t p = fl.pieces_.size(); p-- > 0;) {
                if (it > 0 && near(fl.times_[it - 1], fl.pieces_[p].t_start)) {
                    node_at_start[p] = --it;
                } else if (it > 0 && fl.times_[it - 1] > fl.pieces_[p].t_start) {
                    throw DomainError("flow table time is not a driver piece boundary");
                }
            }
            if (it != 0) throw DomainError("driver pieces do not cover the flow table times");
        }

        fl.data_.assign(nt * fl.nx_ * fl.ny_ * FlowJet::size, 0.0);
        auto store = [&fl](std::size_t it, std::size_t ix, std::size_t iy, const State& s) {
            std::copy(s.begin(), s.end(),
                      fl.data_.begin() +
                          static_cast<std::ptrdiff_t>(((it * fl.nx_ + ix) * fl.ny_ + iy) * FlowJet::size));
        };

        for (std::size_t ix = 0; ix < fl.nx_; ++ix) {
            const double x = fl.x_node(ix);
            for (std::size_t iy = 0; iy < fl.ny_; ++iy) {
                State s = identity_state(fl.y_node(iy));
                store(nt - 1, ix, iy, s);
                for (std::size_t p = fl.pieces_.size(); p-- > 0;) {
                    step_piece(*fl.field_, fl.pieces_[p], fl.max_step_, x, s);
                    if (node_at_start[p] != static_cast<std::size_t>(-1)) {
                        for (double v : s) {
                            if (!std::isfinite(v)) {
                                throw AccuracyError("flow integration produced a non-finite value");
                            }
                        }
                        store(node_at_start[p], ix, iy, s);
                    }
                }
            }
        }

        if (grid.self_check) self_check(fl, grid.self_check_tol);

        double bound = 1.0;
        double min_py = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < fl.data_.size(); i += FlowJet::size) {
            const double* s = fl.data_.data() + i;
            min_py = std::min(min_py, s[2]);
            for (std::size_t q = 1; q < FlowJet::size; ++q) bound = std::max(bound, std::abs(s[q]));
            if (s[2] > 0.0) bound = std::max(bound, 1.0 / s[2]);
        }
        if (!(min_py > 0.0)) {
            throw AccuracyError("flow lost monotonicity in y (min d_y phi = " +
                                std::to_string(min_py) + ")");
        }
        fl.uniform_bound_ = bound;
        fl.min_py_ = min_py;
        return fl;
    }

private:
    // Re-integrate a few trajectories with doubled sub-steps and compare phi and d_y phi.
    static void self_check(const FlowEnsemble& fl, double tol) {
        const std::array<double, 3> fr{0.0, 0.5, 1.0};
        for (double fx : fr) {
            const double x = fl.x_lo_ + fx * (fl.x_hi_ - fl.x_lo_);
            for (double fy : fr) {
                const double y = fl.y_lo_ + fy * (fl.y_hi_ - fl.y_lo_);
                State a = identity_state(y);
                State b = a;
                for (std::size_t p = fl.pieces_.size(); p-- > 0;) {
                    step_piece(*fl.field_, fl.pieces_[p], fl.max_step_, x, a, 1);
                    step_piece(*fl.field_, fl.pieces_[p], fl.max_step_, x, b, 2);
                }
                for (std::size_t q : {0u, 2u}) {
                    const double err = std::abs(a[q] - b[q]);
                    if (!(err <= tol * (1.0 + std::abs(b[q])))) {
                        throw AccuracyError(
                            "flow step self-check failed at (x, y) = (" + std::to_string(x) + ", " +
                            std::to_string(y) + "): half-step difference " + std::to_string(err) +
                            "; decrease max_step");
                    }
                }
            }
        }
    }
};

FlowJet FlowEnsemble::node(std::size_t it, std::size_t ix, std::size_t iy) const {
    if (identity_) return FlowJet::identity(y_node(iy));
    const double* s = data_.data() + ((it * nx_ + ix) * ny_ + iy) * FlowJet::size;
    return FlowJet{s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7], s[8]};
}

std::optional<std::size_t> FlowEnsemble::time_index(double t) const {
    auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it != times_.end() && near(*it, t)) return static_cast<std::size_t>(it - times_.begin());
    if (it != times_.begin() && near(*(it - 1), t)) {
        return static_cast<std::size_t>(it - times_.begin() - 1);
    }
    return std::nullopt;
}

FlowJet FlowEnsemble::eval(double t, double x, double y) const {
    if (identity_) return FlowJet::identity(y);
    if (t < t0() - kNodeTol || t > te() + kNodeTol) {
        throw DomainError("flow evaluated at t = " + std::to_string(t) + " outside its window");
    }
    if (!contains_x(x)) {
        throw DomainError("flow evaluated at x = " + std::to_string(x) + " outside its table");
    }
    if (!contains_y(y)) {
        throw DomainError("flow evaluated at y = " + std::to_string(y) + " outside its table");
    }
    const Stencil st = lagrange_stencil(times_.size(), t, [this](std::size_t i) { return times_[i]; });
    const Stencil sx = lagrange_stencil(nx_, x, [this](std::size_t i) { return x_node(i); });
    const Stencil sy = lagrange_stencil(ny_, y, [this](std::size_t i) { return y_node(i); });
    State acc{};
    for (std::size_t a = 0; a < st.count; ++a) {
        for (std::size_t b = 0; b < sx.count; ++b) {
            const double wab = st.w[a] * sx.w[b];
            for (std::size_t c = 0; c < sy.count; ++c) {
                const double w = wab * sy.w[c];
                const double* s =
                    data_.data() +
                    (((st.first + a) * nx_ + sx.first + b) * ny_ + sy.first + c) * FlowJet::size;
                for (std::size_t q = 0; q < FlowJet::size; ++q) acc[q] += w * s[q];
            }
        }
    }
    return FlowJet::from_array(acc);
}

FlowJet FlowEnsemble::eval_node(std::size_t it, std::size_t ix, double y) const {
    if (identity_) return FlowJet::identity(y);
    if (!contains_y(y)) {
        throw DomainError("flow evaluated at y = " + std::to_string(y) + " outside its table");
    }
    const Stencil sy = lagrange_stencil(ny_, y, [this](std::size_t i) { return y_node(i); });
    State acc{};
    for (std::size_t c = 0; c < sy.count; ++c) {
        const double* s = data_.data() + ((it * nx_ + ix) * ny_ + sy.first + c) * FlowJet::size;
        for (std::size_t q = 0; q < FlowJet::size; ++q) acc[q] += sy.w[c] * s[q];
    }
    return FlowJet::from_array(acc);
}

FlowJet FlowEnsemble::eval_exact(double t, double x, double y) const {
    if (identity_) return FlowJet::identity(y);
    if (t < t0() - kNodeTol || t > te() + kNodeTol) {
        throw DomainError("flow evaluated at t = " + std::to_string(t) + " outside its window");
    }
    State s = identity_state(y);
    for (std::size_t p = pieces_.size(); p-- > 0;) {
        const DriverPiece& piece = pieces_[p];
        if (piece.t_end <= t || near(piece.t_end, t)) break;
        if (piece.t_start < t && !near(piece.t_start, t)) {
            step_piece(*field_, partial_piece(piece, t), max_step_, x, s);
            break;
        }
        step_piece(*field_, piece, max_step_, x, s);
    }
    return FlowJet::from_array(s);
}

double FlowEnsemble::deviation_at(std::size_t it) const {
    if (identity_) return 0.0;
    double dev = 0.0;
    const double* base = data_.data() + it * nx_ * ny_ * FlowJet::size;
    for (std::size_t i = 0; i < nx_ * ny_; ++i) {
        const double* s = base + i * FlowJet::size;
        dev = std::max(dev, std::abs(s[2] - 1.0));
        dev = std::max(dev, std::abs(s[1]));
        for (std::size_t q = 3; q < FlowJet::size; ++q) dev = std::max(dev, std::abs(s[q]));
    }
    return dev;
}

FlowEnsemble solve_flow_smooth(std::shared_ptr<const VectorFieldFamily> field,
                               const PiecewiseLinearPath& zeta, FlowGridSpec grid) {
    if (field && field->dim() != zeta.dim()) {
        throw DomainError("driver dimension does not match the vector field family");
    }
    if (grid.times.size() < 2) throw DomainError("flow table needs at least 2 time nodes");
    auto pieces = driver_pieces(zeta, grid.times.front(), grid.times.back(), grid.times);
    return FlowBuilder::build(std::move(field), std::move(pieces), std::move(grid));
}

FlowEnsemble solve_flow_rough(std::shared_ptr<const VectorFieldFamily> field, const RoughPath2& rp,
                              FlowGridSpec grid) {
    if (!(rp.p() < 3.0)) throw UnsupportedError("rough flows need p < 3");
    if (field && field->dim() != rp.dim()) {
        throw DomainError("driver dimension does not match the vector field family");
    }
    if (grid.times.size() < 2) throw DomainError("flow table needs at least 2 time nodes");
    auto pieces = driver_pieces(rp, grid.times.front(), grid.times.back(), grid.times);
    return FlowBuilder::build(std::move(field), std::move(pieces), std::move(grid));
}

FlowEnsemble solve_flow(std::shared_ptr<const VectorFieldFamily> field,
                        std::vector<DriverPiece> pieces, FlowGridSpec grid) {
    if (pieces.empty()) throw DomainError("flow needs at least one driver piece");
    if (grid.times.size() < 2 || !near(pieces.front().t_start, grid.times.front()) ||
        !near(pieces.back().t_end, grid.times.back())) {
        throw DomainError("driver pieces do not match the flow table window");
    }
    return FlowBuilder::build(std::move(field), std::move(pieces), std::move(grid));
}

double invert_flow(const FlowEnsemble& flow, double t, double x, double y, bool exact) {
    if (flow.is_identity()) return y;
    auto phi = [&](double v) { return exact ? flow.eval_exact(t, x, v) : flow.eval(t, x, v); };
    double lo = flow.y_lo();
    double hi = flow.y_hi();
    const double f_lo = phi(lo).phi;
    const double f_hi = phi(hi).phi;
    const double tol = 1e-10 * (1.0 + std::abs(y));
    if (y < f_lo - tol || y > f_hi + tol) {
        throw DomainError("y = " + std::to_string(y) + " is outside the flow range [" +
                          std::to_string(f_lo) + ", " + std::to_string(f_hi) + "]");
    }
    // Newton with a bisection safeguard; a couple of polishing steps after the tolerance is met
    // keep finite differences of the inverse clean.
    double v = (f_hi > f_lo) ? lo + (y - f_lo) / (f_hi - f_lo) * (hi - lo) : 0.5 * (lo + hi);
    v = std::clamp(v, lo, hi);
    // Interpolated d_y phi can be a poor slope on coarse tables, so a Newton step that fails to
    // halve the residual is replaced by bisection.
    int polish = 0;
    double r_prev = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 100; ++iter) {
        const FlowJet j = phi(v);
        const double r = j.phi - y;
        if (r > 0.0) hi = std::min(hi, v);
        if (r < 0.0) lo = std::max(lo, v);
        if (std::abs(r) < tol) {
            if (polish++ >= 2 || r == 0.0) return v;
        }
        double next = v - r / j.py;
        const bool slow = polish == 0 && std::abs(r) > 0.5 * r_prev;
        r_prev = std::abs(r);
        if (slow || !(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
        if (next == v) return v;
        v = next;
    }
    if (std::abs(phi(v).phi - y) < tol) return v;
    throw NumericError("flow inversion did not converge in 100 iterations");
}

double IdentityResiduals::max() const {
    return std::max({psi_x, psi_y, psi_yy, psi_xy, psi_xx});
}

IdentityResiduals derivative_identity_residuals(const FlowEnsemble& flow,
                                                std::span<const std::array<double, 3>> samples,
                                                double fd_step) {
    IdentityResiduals res;
    const double e = fd_step;
    for (const auto& smp : samples) {
        const double t = smp[0], x = smp[1], yt = smp[2];
        const FlowJet j = flow.eval_exact(t, x, yt);
        const double y = j.phi;
        auto psi = [&](double xx, double yy) { return invert_flow(flow, t, xx, yy, true); };
        const double c = psi(x, y);
        const double xp = psi(x + e, y), xm = psi(x - e, y);
        const double yp = psi(x, y + e), ym = psi(x, y - e);
        const double pp = psi(x + e, y + e), pm = psi(x + e, y - e);
        const double mp = psi(x - e, y + e), mm = psi(x - e, y - e);

        const double fd_x = (xp - xm) / (2.0 * e);
        const double fd_y = (yp - ym) / (2.0 * e);
        const double fd_yy = (yp - 2.0 * c + ym) / (e * e);
        const double fd_xx = (xp - 2.0 * c + xm) / (e * e);
        const double fd_xy = (pp - pm - mp + mm) / (4.0 * e * e);

        const double py = j.py, py2 = py * py, py3 = py2 * py;
        const double ex_x = -j.px / py;
        const double ex_y = 1.0 / py;
        const double ex_yy = -j.pyy / py3;
        const double ex_xy = j.pyy * j.px / py3 - j.pxy / py2;
        const double ex_xx = -j.pyy * j.px * j.px / py3 + 2.0 * j.px * j.pxy / py2 - j.pxx / py;

        res.psi_x = std::max(res.psi_x, std::abs(fd_x - ex_x));
        res.psi_y = std::max(res.psi_y, std::abs(fd_y - ex_y));
        res.psi_yy = std::max(res.psi_yy, std::abs(fd_yy - ex_yy));
        res.psi_xy = std::max(res.psi_xy, std::abs(fd_xy - ex_xy));
        res.psi_xx = std::max(res.psi_xx, std::abs(fd_xx - ex_xx));
    }
    return res;
}

SmallnessWindow flow_smallness_window(const FlowEnsemble& flow, double eps) {
    if (!(eps > 0.0)) throw DomainError("smallness target must be positive");
    SmallnessWindow w;
    w.uniform_bound = flow.uniform_bound();
    const auto times = flow.times();
    const std::size_t nt = times.size();
    std::size_t first_ok = nt - 1;
    while (first_ok > 0 && flow.deviation_at(first_ok - 1) < eps) --first_ok;
    if (first_ok == nt - 1) {
        w.h = times[nt - 1] - times[nt - 2];
        w.below_resolution = true;
    } else {
        w.h = times[nt - 1] - times[first_ok];
    }
    return w;
}

double transport_backward(const VectorFieldFamily& field, std::span<const DriverPiece> pieces,
                          double x, double y, double max_step) {
    if (field.is_zero()) return y;
    for (std::size_t p = pieces.size(); p-- > 0;) {
        const PieceField f(field, pieces[p]);
        if (f.trivial()) continue;
        y = rk4_scalar(f, x, y, substeps(field, pieces[p], max_step));
    }
    return y;
}

}  // namespace rbsde
