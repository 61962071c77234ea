#include "optikit/vec.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace optikit {

namespace {

[[noreturn]] void throw_dim_mismatch(const char* what, std::size_t na,
                                     std::size_t nb) {
  throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                              std::to_string(na) + " vs " +
                              std::to_string(nb) + ")");
}

}  // namespace

void require_same_dim(const ParamVector& a, const ParamVector& b,
                      const char* what) {
  if (a.size() != b.size()) throw_dim_mismatch(what, a.size(), b.size());
}

void require_finite(const ParamVector& a, const char* what) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) {
      throw std::invalid_argument(std::string(what) +
                                  ": non-finite value at coordinate " +
                                  std::to_string(i));
    }
  }
}

bool all_finite(const ParamVector& a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ParamVector add(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "add");
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

ParamVector sub(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "sub");
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

ParamVector mul(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "mul");
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

ParamVector div(const ParamVector& a, const ParamVector& b,
                ZeroPolicy policy) {
  require_same_dim(a, b, "div");
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i] == 0.0) {
      if (policy == ZeroPolicy::ZeroOverZero && a[i] == 0.0) {
        out[i] = 0.0;
        continue;
      }
      throw std::invalid_argument("div: zero denominator at coordinate " +
                                  std::to_string(i));
    }
    out[i] = a[i] / b[i];
  }
  return out;
}

ParamVector abs(const ParamVector& a) {
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::fabs(a[i]);
  return out;
}

ParamVector sign(const ParamVector& a) {
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i] > 0.0 ? 1.0 : (a[i] < 0.0 ? -1.0 : 0.0);
  }
  return out;
}

ParamVector abs_pow(const ParamVector& a, double exponent) {
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double m = std::fabs(a[i]);
    double v;
    if (exponent == 1.0) {
      v = m;
    } else if (exponent == 2.0) {
      v = m * m;
    } else {
      v = std::pow(m, exponent);
    }
    if (!std::isfinite(v)) {
      throw std::invalid_argument("abs_pow: non-finite result at coordinate " +
                                  std::to_string(i));
    }
    out[i] = v;
  }
  return out;
}

ParamVector scale(const ParamVector& a, double c) {
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = c * a[i];
  return out;
}

void axpy_inplace(ParamVector& y, double c, const ParamVector& x) {
  require_same_dim(y, x, "axpy");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c * x[i];
}

Norms norms(const ParamVector& a) {
  Norms n;
  for (double v : a) {
    double m = std::fabs(v);
    n.l1 += m;
    n.l2 += v * v;
    if (m > n.linf) n.linf = m;
  }
  n.l2 = std::sqrt(n.l2);
  return n;
}

double max_abs(const ParamVector& a) {
  double m = 0.0;
  for (double v : a) {
    double x = std::fabs(v);
    if (x > m) m = x;
  }
  return m;
}

}  // namespace optikit
