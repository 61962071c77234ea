#include "optikit/finite_diff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace optikit {

ParamVector finite_diff_gradient(const ScalarFn& f, const ParamVector& x,
                                 double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw std::invalid_argument("finite_diff_gradient: h must be finite and > 0");
  }
  ParamVector grad(x.size());
  ParamVector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::invalid_argument(
          "finite_diff_gradient: non-finite objective at coordinate " +
          std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace optikit
