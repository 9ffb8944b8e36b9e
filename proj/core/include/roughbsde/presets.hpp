#pragma once

#include <string>
#include <vector>

#include "roughbsde/problem.hpp"

namespace rbsde {

/// Named problems used by the experiment runner and the tests. All have T = 1, x0 = 0,
/// sigma = 1 and b = 0.
///
///   heat       H = 0,               f = 0,                     g = x^2
///   linearH    H = y,               f = 0,                     g = cos x
///   xyH        H = x y,             f = 0,                     g = 1 / (1 + x^2)
///   sinH       H = sin(x + y),      f = sin(u) / 2 + z^2 / 10,  g = cos x
///   pure-area  H = (1, y),          f = 0,                     g = x
///   discount   H = 0,               f = -u,                    g = cos x
struct Preset {
    ProblemSpec spec;
    double validation_u_max = 4.0;  // |u| range on which the declared constants are checked
};

Preset make_preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace rbsde
