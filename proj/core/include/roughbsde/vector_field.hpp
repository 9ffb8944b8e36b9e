#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace rbsde {

/// Value and the partial derivatives of one vector field H_k(x, y) that the
/// variational system for the flow needs (x scalar, y scalar).
struct FieldJet {
    double h = 0.0;
    double hx = 0.0;
    double hy = 0.0;
    double hxx = 0.0;
    double hxy = 0.0;
    double hyy = 0.0;
    double hyyy = 0.0;
    double hxyy = 0.0;
    double hxxy = 0.0;

    FieldJet& operator+=(const FieldJet& o);
    FieldJet& operator*=(double s);
};

using FieldValueFn = std::function<double(double x, double y)>;
using FieldJetFn = std::function<FieldJet(double x, double y)>;

/// Central finite-difference jet of a scalar field (used when no analytic jet is supplied).
FieldJet finite_difference_jet(const FieldValueFn& h, double x, double y);

/// Family H = (H_1, ..., H_d) of vector fields on R, parameterized by x, with a declared
/// joint bound C_H. Components either carry an analytic jet, which is cross-checked against
/// central differences at construction, or fall back to finite differencing of the value.
class VectorFieldFamily {
public:
    struct Component {
        std::string name;
        FieldValueFn value;
        FieldJetFn jet;      // optional
        bool zero = false;   // identically zero; skipped in integration
    };

    VectorFieldFamily(std::vector<Component> components, double bound, double gamma = 3.0);

    /// d identically vanishing fields.
    static VectorFieldFamily zero(std::size_t dim);

    std::size_t dim() const noexcept { return components_.size(); }
    double bound() const noexcept { return bound_; }
    double gamma() const noexcept { return gamma_; }
    bool is_zero() const noexcept { return all_zero_; }
    bool component_is_zero(std::size_t k) const { return components_[k].zero; }
    const std::string& name(std::size_t k) const { return components_[k].name; }

    double value(std::size_t k, double x, double y) const;
    FieldJet jet(std::size_t k, double x, double y) const;

private:
    std::vector<Component> components_;
    double bound_;
    double gamma_;
    bool all_zero_ = true;
};

}  // namespace rbsde
