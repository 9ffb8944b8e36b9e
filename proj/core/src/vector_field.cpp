#include "roughbsde/vector_field.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "roughbsde/errors.hpp"

namespace rbsde {

FieldJet& FieldJet::operator+=(const FieldJet& o) {
    h += o.h;
    hx += o.hx;
    hy += o.hy;
    hxx += o.hxx;
    hxy += o.hxy;
    hyy += o.hyy;
    hyyy += o.hyyy;
    hxyy += o.hxyy;
    hxxy += o.hxxy;
    return *this;
}

FieldJet& FieldJet::operator*=(double s) {
    h *= s;
    hx *= s;
    hy *= s;
    hxx *= s;
    hxy *= s;
    hyy *= s;
    hyyy *= s;
    hxyy *= s;
    hxxy *= s;
    return *this;
}

namespace {

constexpr double kStep1 = 1e-5;
constexpr double kStep2 = 1e-4;
constexpr double kStep3 = 5e-3;

double d2yy(const FieldValueFn& h, double x, double y) {
    return (h(x, y + kStep2) - 2.0 * h(x, y) + h(x, y - kStep2)) / (kStep2 * kStep2);
}

double d2xx(const FieldValueFn& h, double x, double y) {
    return (h(x + kStep2, y) - 2.0 * h(x, y) + h(x - kStep2, y)) / (kStep2 * kStep2);
}

double d2xy(const FieldValueFn& h, double x, double y) {
    const double e = kStep2;
    return (h(x + e, y + e) - h(x + e, y - e) - h(x - e, y + e) + h(x - e, y - e)) / (4.0 * e * e);
}

}  // namespace

FieldJet finite_difference_jet(const FieldValueFn& h, double x, double y) {
    FieldJet j;
    j.h = h(x, y);
    j.hx = (h(x + kStep1, y) - h(x - kStep1, y)) / (2.0 * kStep1);
    j.hy = (h(x, y + kStep1) - h(x, y - kStep1)) / (2.0 * kStep1);
    j.hxx = d2xx(h, x, y);
    j.hxy = d2xy(h, x, y);
    j.hyy = d2yy(h, x, y);
    j.hyyy = (d2yy(h, x, y + kStep3) - d2yy(h, x, y - kStep3)) / (2.0 * kStep3);
    j.hxyy = (d2yy(h, x + kStep3, y) - d2yy(h, x - kStep3, y)) / (2.0 * kStep3);
    j.hxxy = (d2xx(h, x, y + kStep3) - d2xx(h, x, y - kStep3)) / (2.0 * kStep3);
    return j;
}

VectorFieldFamily::VectorFieldFamily(std::vector<Component> components, double bound, double gamma)
    : components_(std::move(components)), bound_(bound), gamma_(gamma) {
    if (components_.empty()) {
        throw DomainError("vector field family needs at least one component");
    }
    if (!(bound_ > 0.0)) {
        throw DomainError("declared field bound C_H must be positive");
    }
    constexpr std::array<double, 4> probes{-1.5, -0.5, 0.5, 1.5};
    for (std::size_t k = 0; k < components_.size(); ++k) {
        auto& c = components_[k];
        if (c.name.empty()) {
            c.name = "H" + std::to_string(k + 1);
        }
        if (c.zero) {
            continue;
        }
        all_zero_ = false;
        if (!c.value) {
            throw DomainError(c.name + ": non-zero component needs a value function");
        }
        if (!c.jet) {
            continue;
        }
        for (double x : probes) {
            for (double y : probes) {
                const FieldJet a = c.jet(x, y);
                const FieldJet f = finite_difference_jet(c.value, x, y);
                const std::array<std::pair<const char*, std::pair<double, double>>, 9> pairs{{
                    {"H", {a.h, f.h}},
                    {"dH/dx", {a.hx, f.hx}},
                    {"dH/dy", {a.hy, f.hy}},
                    {"d2H/dx2", {a.hxx, f.hxx}},
                    {"d2H/dxdy", {a.hxy, f.hxy}},
                    {"d2H/dy2", {a.hyy, f.hyy}},
                    {"d3H/dy3", {a.hyyy, f.hyyy}},
                    {"d3H/dxdy2", {a.hxyy, f.hxyy}},
                    {"d3H/dx2dy", {a.hxxy, f.hxxy}},
                }};
                for (const auto& [label, v] : pairs) {
                    const double scale = std::max(1.0, std::abs(v.first));
                    if (std::abs(v.first - v.second) > 1e-4 * scale) {
                        throw DomainError(c.name + ": analytic " + label +
                                          " disagrees with finite differences at (" +
                                          std::to_string(x) + ", " + std::to_string(y) + ")");
                    }
                }
            }
        }
    }
}

VectorFieldFamily VectorFieldFamily::zero(std::size_t dim) {
    std::vector<Component> comps(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        comps[k].name = "H" + std::to_string(k + 1);
        comps[k].zero = true;
    }
    return VectorFieldFamily(std::move(comps), 1.0);
}

double VectorFieldFamily::value(std::size_t k, double x, double y) const {
    const auto& c = components_.at(k);
    return c.zero ? 0.0 : c.value(x, y);
}

FieldJet VectorFieldFamily::jet(std::size_t k, double x, double y) const {
    const auto& c = components_.at(k);
    if (c.zero) {
        return {};
    }
    return c.jet ? c.jet(x, y) : finite_difference_jet(c.value, x, y);
}

}  // namespace rbsde
