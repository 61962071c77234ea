#include "optikit/problems.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "optikit/errors.hpp"
#include "optikit/jsonutil.hpp"
#include "optikit/mlp.hpp"

namespace optikit::problems {

namespace {

// Wires the default additive-noise stochastic gradient: grad + N(0, sigma^2)
// per coordinate. With sigma = 0 this is exactly the analytic gradient.
void attach_additive_noise(Problem& p) {
  auto grad = p.grad;
  const double sigma = p.noise_sigma;
  p.stochastic_grad = [grad, sigma](const ParamVector& x, RngStream& rng) {
    ParamVector g = grad(x);
    if (sigma > 0.0) {
      ParamVector noise = gaussian_noise(rng, g.size(), sigma);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += noise[i];
    }
    return g;
  };
}

void require_sigma(double noise_sigma, const std::string& name) {
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) {
    throw ConfigError("noise_sigma for problem '" + name +
                      "' must be finite and >= 0");
  }
}

}  // namespace

Problem fig1_problem(double noise_sigma) {
  require_sigma(noise_sigma, "fig1");
  Problem p;
  p.name = "fig1";
  p.dim = 2;
  p.noise_sigma = noise_sigma;
  p.default_x0 = {1.0, 1.0};
  p.loss = [](const ParamVector& x) {
    if (x.size() != 2) throw std::invalid_argument("fig1: dim must be 2");
    if (x[1] == 0.0) throw DomainError("fig1: pole at x2 = 0");
    const double r1 = x[0] - 1.0 / x[1];
    const double r2 = x[0] - 20.0 * x[1];
    return 0.5 * r1 * r1 + 0.5 * r2 * r2;
  };
  p.grad = [](const ParamVector& x) {
    if (x.size() != 2) throw std::invalid_argument("fig1: dim must be 2");
    if (x[1] == 0.0) throw DomainError("fig1: pole at x2 = 0");
    const double r1 = x[0] - 1.0 / x[1];
    const double r2 = x[0] - 20.0 * x[1];
    return ParamVector{r1 + r2, r1 / (x[1] * x[1]) - 20.0 * r2};
  };
  attach_additive_noise(p);
  return p;
}

Problem quadratic_problem(ParamVector lambdas, double noise_sigma) {
  if (lambdas.empty()) {
    throw ConfigError("quadratic: lambdas must be non-empty");
  }
  for (double l : lambdas) {
    if (!std::isfinite(l) || l <= 0.0) {
      throw ConfigError("quadratic: every lambda must be finite and > 0");
    }
  }
  require_sigma(noise_sigma, "quadratic");
  Problem p;
  p.name = "quadratic";
  p.dim = lambdas.size();
  p.noise_sigma = noise_sigma;
  p.default_x0 = ParamVector(lambdas.size(), 1.0);
  auto lam = std::make_shared<const ParamVector>(std::move(lambdas));
  p.loss = [lam](const ParamVector& x) {
    require_same_dim(x, *lam, "quadratic");
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) f += 0.5 * (*lam)[i] * x[i] * x[i];
    return f;
  };
  p.grad = [lam](const ParamVector& x) {
    require_same_dim(x, *lam, "quadratic");
    ParamVector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = (*lam)[i] * x[i];
    return g;
  };
  attach_additive_noise(p);
  return p;
}

Problem rosenbrock_problem(double noise_sigma) {
  require_sigma(noise_sigma, "rosenbrock");
  Problem p;
  p.name = "rosenbrock";
  p.dim = 2;
  p.noise_sigma = noise_sigma;
  p.default_x0 = {-1.2, 1.0};
  p.loss = [](const ParamVector& x) {
    if (x.size() != 2) throw std::invalid_argument("rosenbrock: dim must be 2");
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
  };
  p.grad = [](const ParamVector& x) {
    if (x.size() != 2) throw std::invalid_argument("rosenbrock: dim must be 2");
    const double b = x[1] - x[0] * x[0];
    return ParamVector{-2.0 * (1.0 - x[0]) - 400.0 * x[0] * b, 200.0 * b};
  };
  attach_additive_noise(p);
  return p;
}

Problem quartic_problem(double noise_sigma) {
  require_sigma(noise_sigma, "quartic");
  Problem p;
  p.name = "quartic";
  p.dim = 1;
  p.noise_sigma = noise_sigma;
  p.default_x0 = {2.0};
  p.loss = [](const ParamVector& x) {
    if (x.size() != 1) throw std::invalid_argument("quartic: dim must be 1");
    const double x2 = x[0] * x[0];
    return x2 * x2;
  };
  p.grad = [](const ParamVector& x) {
    if (x.size() != 1) throw std::invalid_argument("quartic: dim must be 1");
    return ParamVector{4.0 * x[0] * x[0] * x[0]};
  };
  attach_additive_noise(p);
  return p;
}

std::vector<Problem> standard_problems() {
  std::vector<Problem> out;
  out.push_back(quadratic_problem({1.0, 100.0}));
  out.push_back(rosenbrock_problem());
  out.push_back(quartic_problem());
  return out;
}

Problem make_problem(const std::string& name, const nlohmann::json& options) {
  const std::string ctx = "problem '" + name + "' options";
  if (name == "fig1") {
    check_keys(options, {"noise_sigma"}, ctx);
    return fig1_problem(get_field_or<double>(options, "noise_sigma", ctx, 0.1));
  }
  if (name == "quadratic") {
    check_keys(options, {"lambdas", "noise_sigma"}, ctx);
    auto lambdas = get_field_or<ParamVector>(options, "lambdas", ctx,
                                             ParamVector{1.0, 100.0});
    return quadratic_problem(std::move(lambdas),
                             get_field_or<double>(options, "noise_sigma", ctx, 0.0));
  }
  if (name == "rosenbrock") {
    check_keys(options, {"noise_sigma"}, ctx);
    return rosenbrock_problem(get_field_or<double>(options, "noise_sigma", ctx, 0.0));
  }
  if (name == "quartic") {
    check_keys(options, {"noise_sigma"}, ctx);
    return quartic_problem(get_field_or<double>(options, "noise_sigma", ctx, 0.0));
  }
  if (name == "mlp") {
    return mlp_problem(parse_mlp_spec(options, ctx));
  }
  throw ConfigError("unknown problem '" + name +
                    "' (known: fig1, quadratic, rosenbrock, quartic, mlp)");
}

MlpSpec parse_mlp_spec(const nlohmann::json& options, const std::string& ctx) {
  check_keys(options, {"layer_sizes", "activation", "batch_size", "dataset"},
             ctx);
  MlpSpec spec;
  spec.layer_sizes = get_field_or<std::vector<int>>(
      options, "layer_sizes", ctx, std::vector<int>{2, 16, 16, 4});
  const std::string act =
      get_field_or<std::string>(options, "activation", ctx, "tanh");
  if (act == "tanh") {
    spec.activation = MlpSpec::Activation::Tanh;
  } else if (act == "relu") {
    spec.activation = MlpSpec::Activation::Relu;
  } else {
    throw ConfigError("activation must be 'tanh' or 'relu' in " + ctx);
  }
  spec.batch_size = get_field_or<int>(options, "batch_size", ctx, 64);
  if (options.contains("dataset")) {
    const auto& d = options.at("dataset");
    check_keys(d, {"n_samples", "n_classes", "blob_sigma", "seed"},
               ctx + ".dataset");
    spec.dataset.n_samples =
        get_field_or<long>(d, "n_samples", ctx, spec.dataset.n_samples);
    spec.dataset.n_classes =
        get_field_or<int>(d, "n_classes", ctx, spec.dataset.n_classes);
    spec.dataset.blob_sigma =
        get_field_or<double>(d, "blob_sigma", ctx, spec.dataset.blob_sigma);
    spec.dataset.seed =
        get_field_or<std::uint64_t>(d, "seed", ctx, spec.dataset.seed);
  }
  return spec;
}

}  // namespace optikit::problems
