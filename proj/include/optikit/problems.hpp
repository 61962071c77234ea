#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "optikit/rng.hpp"
#include "optikit/vec.hpp"

namespace optikit::problems {

// A differentiable objective with an analytic gradient and a seeded
// stochastic gradient. Evaluation is pure; stochastic draws consume from a
// caller-owned RngStream.
struct Problem {
  std::string name;
  std::size_t dim = 0;
  double noise_sigma = 0.0;
  std::function<double(const ParamVector&)> loss;
  std::function<ParamVector(const ParamVector&)> grad;
  std::function<ParamVector(const ParamVector&, RngStream&)> stochastic_grad;
  ParamVector default_x0;
  // When set, produces the starting point from the run's stream (used by the
  // MLP, whose initialization is part of the seeded experiment).
  std::function<ParamVector(RngStream&)> init;
};

// Two-dimensional valley with a pole along x2 = 0:
//   f(x1, x2) = 0.5*(x1 - 1/x2)^2 + 0.5*(x1 - 20*x2)^2
// Gradient: d1 = (x1 - 1/x2) + (x1 - 20*x2)
//           d2 = (x1 - 1/x2)/x2^2 - 20*(x1 - 20*x2)
// Global minimum at x1 = sqrt(20), x2 = 1/sqrt(20) with loss 0. Evaluating
// at x2 = 0 throws DomainError. The stochastic gradient adds iid
// N(0, noise_sigma^2) per coordinate (noise_sigma is read as a standard
// deviation and is configurable). Starts at (1, 1).
Problem fig1_problem(double noise_sigma = 0.1);

// Separable quadratic f(x) = 0.5 * sum_i lambda_i x_i^2.
Problem quadratic_problem(ParamVector lambdas, double noise_sigma = 0.0);

// Classic 2-D Rosenbrock f(x, y) = (1-x)^2 + 100*(y - x^2)^2.
Problem rosenbrock_problem(double noise_sigma = 0.0);

// One-dimensional quartic f(x) = x^4, whose curvature grows with |x| (a
// fixture for the generalized-smoothness estimator).
Problem quartic_problem(double noise_sigma = 0.0);

// Fixtures: quadratic with condition number 100, Rosenbrock, quartic.
std::vector<Problem> standard_problems();

// Config-facing factory. Known names: fig1, quadratic, rosenbrock, quartic,
// mlp. Unknown names or unknown option keys throw ConfigError.
Problem make_problem(const std::string& name, const nlohmann::json& options);

}  // namespace optikit::problems
