#pragma once

#include <cstddef>
#include <vector>

namespace optikit {

// All optimizer math runs on flat fp64 vectors.
using ParamVector = std::vector<double>;

// Behaviour of elementwise division when a denominator entry is zero.
//   Error:        any zero denominator throws std::invalid_argument.
//   ZeroOverZero: 0/0 evaluates to 0; nonzero/0 still throws.
enum class ZeroPolicy { Error, ZeroOverZero };

struct Norms {
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
};

// Dimension checks throw std::invalid_argument naming the operation.
ParamVector add(const ParamVector& a, const ParamVector& b);
ParamVector sub(const ParamVector& a, const ParamVector& b);
ParamVector mul(const ParamVector& a, const ParamVector& b);
ParamVector div(const ParamVector& a, const ParamVector& b,
                ZeroPolicy policy = ZeroPolicy::Error);

ParamVector abs(const ParamVector& a);
// sign(0) == 0; otherwise +/-1.
ParamVector sign(const ParamVector& a);
// Elementwise |a_i|^exponent. Throws if any result is non-finite.
ParamVector abs_pow(const ParamVector& a, double exponent);
ParamVector scale(const ParamVector& a, double c);
// y += c * x
void axpy_inplace(ParamVector& y, double c, const ParamVector& x);

Norms norms(const ParamVector& a);
double max_abs(const ParamVector& a);

bool all_finite(const ParamVector& a);
// Throws std::invalid_argument naming `what` and the first bad coordinate.
void require_finite(const ParamVector& a, const char* what);
void require_same_dim(const ParamVector& a, const ParamVector& b,
                      const char* what);

}  // namespace optikit
