#pragma once

#include <functional>

#include "optikit/vec.hpp"

namespace optikit {

using ScalarFn = std::function<double(const ParamVector&)>;

// Central-difference gradient: (f(x + h e_i) - f(x - h e_i)) / (2h).
// Throws std::invalid_argument if h <= 0 or any probe evaluates non-finite,
// naming the offending coordinate.
ParamVector finite_diff_gradient(const ScalarFn& f, const ParamVector& x,
                                 double h = 1e-6);

}  // namespace optikit
