#include "roughbsde/presets.hpp"

#include <cmath>
#include <memory>

#include "roughbsde/errors.hpp"

namespace rbsde {

namespace {

ProblemSpec base(const std::string& name) {
    ProblemSpec s;
    s.name = name;
    s.horizon = 1.0;
    s.t0 = 0.0;
    s.x0 = 0.0;
    s.sigma = [](double, double) { return 1.0; };
    s.drift = [](double, double) { return 0.0; };
    s.driver = [](double, double, double, double) { return 0.0; };
    s.constants.c_sigma = 1.0;
    return s;
}

VectorFieldFamily::Component component(std::string name, FieldValueFn value, FieldJetFn jet) {
    return {std::move(name), std::move(value), std::move(jet), false};
}

}  // namespace

Preset make_preset(const std::string& name) {
    Preset p;
    ProblemSpec& s = p.spec;
    s = base(name);
    if (name == "heat") {
        s.field = std::make_shared<const VectorFieldFamily>(VectorFieldFamily::zero(1));
        s.terminal = [](double x) { return x * x; };
    } else if (name == "linearH") {
        s.field = std::make_shared<const VectorFieldFamily>(
            std::vector{component(
                "y", [](double, double y) { return y; },
                [](double, double y) {
                    FieldJet j;
                    j.h = y;
                    j.hy = 1.0;
                    return j;
                })},
            1.0);
        s.terminal = [](double x) { return std::cos(x); };
    } else if (name == "xyH") {
        s.field = std::make_shared<const VectorFieldFamily>(
            std::vector{component(
                "x*y", [](double x, double y) { return x * y; },
                [](double x, double y) {
                    FieldJet j;
                    j.h = x * y;
                    j.hx = y;
                    j.hy = x;
                    j.hxy = 1.0;
                    return j;
                })},
            5.0);
        s.terminal = [](double x) { return 1.0 / (1.0 + x * x); };
    } else if (name == "sinH") {
        s.field = std::make_shared<const VectorFieldFamily>(
            std::vector{component(
                "sin(x+y)", [](double x, double y) { return std::sin(x + y); },
                [](double x, double y) {
                    const double sn = std::sin(x + y);
                    const double cs = std::cos(x + y);
                    return FieldJet{sn, cs, cs, -sn, -sn, -sn, -cs, -cs, -cs};
                })},
            1.0);
        s.driver = [](double, double, double u, double z) { return 0.5 * std::sin(u) + 0.1 * z * z; };
        s.constants.c1f = 0.5;
        s.constants.c2f = 0.5;
        s.terminal = [](double x) { return std::cos(x); };
    } else if (name == "pure-area") {
        s.field = std::make_shared<const VectorFieldFamily>(
            std::vector{component(
                            "1", [](double, double) { return 1.0; },
                            [](double, double) {
                                FieldJet j;
                                j.h = 1.0;
                                return j;
                            }),
                        component(
                            "y", [](double, double y) { return y; },
                            [](double, double y) {
                                FieldJet j;
                                j.h = y;
                                j.hy = 1.0;
                                return j;
                            })},
            1.0);
        s.terminal = [](double x) { return x; };
    } else if (name == "discount") {
        s.field = std::make_shared<const VectorFieldFamily>(VectorFieldFamily::zero(1));
        s.driver = [](double, double, double u, double) { return -u; };
        s.constants.c1f = 2.0;
        s.constants.c2f = 0.0;
        s.terminal = [](double x) { return std::cos(x); };
        p.validation_u_max = 2.0;
    } else {
        throw ConfigError("preset", "unknown preset '" + name + "'");
    }
    return p;
}

std::vector<std::string> preset_names() {
    return {"heat", "linearH", "xyH", "sinH", "pure-area", "discount"};
}

}  // namespace rbsde
