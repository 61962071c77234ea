#include "optikit/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "optikit/errors.hpp"
#include "optikit/jsonutil.hpp"
#include "optikit/optim.hpp"

namespace optikit::theory {

namespace {

void require_beta_pair(double beta1, double beta2, const char* who) {
  if (!std::isfinite(beta1) || !std::isfinite(beta2) || beta1 < 0.0 ||
      beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
    throw std::invalid_argument(std::string(who) +
                                ": beta1 within [0, 1), beta2 within (0, 1)");
  }
}

}  // namespace

double adam_ratio_bound(double beta1, double beta2) {
  require_beta_pair(beta1, beta2, "adam_ratio_bound");
  if (beta1 * beta1 >= beta2) {
    throw std::invalid_argument(
        "adam_ratio_bound: requires beta1^2 < beta2");
  }
  return (1.0 - beta1) /
         (std::sqrt(1.0 - beta2) * std::sqrt(1.0 - beta1 * beta1 / beta2));
}

double adam_ratio_bound(double beta1, double beta2, long t) {
  if (t < 1) throw std::invalid_argument("adam_ratio_bound: t must be >= 1");
  const double asym = adam_ratio_bound(beta1, beta2);  // validates inputs
  const double td = static_cast<double>(t);
  const double num =
      std::sqrt(1.0 - std::pow(beta2, td)) *
      std::sqrt(1.0 - std::pow(beta1 * beta1 / beta2, td));
  const double den = 1.0 - std::pow(beta1, td);
  return asym * num / den;
}

double BoundInputs::q() const {
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  return p / (p - 1.0);
}

void BoundInputs::validate() const {
  if (!std::isfinite(p) || p < 1.0) {
    throw std::invalid_argument("p within [1, +∞)");
  }
  if (!std::isfinite(beta1) || beta1 < 0.0 || beta1 > 1.0 ||
      !std::isfinite(beta2) || beta2 < 0.0 || beta2 >= 1.0) {
    throw std::invalid_argument(
        "s3_ratio_bound: beta1 within [0, 1], beta2 within [0, 1)");
  }
  if (beta1 == beta2) return;  // equality case: bound is exactly 1
  if (p == 1.0) {
    if (beta1 > beta2) {
      throw std::invalid_argument(
          "s3_ratio_bound: requires beta1 <= beta2 at p = 1");
    }
    return;
  }
  if (beta1 >= std::pow(beta2, 1.0 / p)) {
    throw std::invalid_argument(
        "s3_ratio_bound: requires beta1 < beta2^(1/p)");
  }
}

double s3_ratio_bound(const BoundInputs& inputs) {
  inputs.validate();
  const double b1 = inputs.beta1;
  const double b2 = inputs.beta2;
  const double p = inputs.p;
  if (b1 == b2) return 1.0;
  if (p == 1.0) {
    // q -> infinity limit: the second denominator factor tends to 1.
    return (1.0 - b1) / (1.0 - b2);
  }
  const double q = inputs.q();
  const double ratio_term = 1.0 - std::pow(b1, q) / std::pow(b2, q / p);
  return (1.0 - b1) /
         (std::pow(1.0 - b2, 1.0 / p) * std::pow(ratio_term, 1.0 / q));
}

double s3_ratio_bound(double beta1, double beta2, double p) {
  return s3_ratio_bound(BoundInputs{beta1, beta2, p});
}

std::vector<double> adversarial_sequence(double beta1, double beta2, double g0,
                                         long steps) {
  require_beta_pair(beta1, beta2, "adversarial_sequence");
  if (beta1 == 0.0) {
    throw std::invalid_argument("adversarial_sequence: beta1 must be > 0");
  }
  if (!(g0 > 0.0) || !std::isfinite(g0)) {
    throw std::invalid_argument("adversarial_sequence: g0 must be finite and > 0");
  }
  if (steps < 1) {
    throw std::invalid_argument("adversarial_sequence: steps must be >= 1");
  }
  const double ratio = beta2 / beta1;
  std::vector<double> out(static_cast<std::size_t>(steps));
  double g = g0;
  for (long t = 0; t < steps; ++t) {
    if (!std::isfinite(g)) {
      throw std::runtime_error(
          "adversarial_sequence: stream overflowed fp64 at step " +
          std::to_string(t) +
          "; use fewer steps or the renormalizing simulator");
    }
    out[static_cast<std::size_t>(t)] = g;
    g *= ratio;
  }
  return out;
}

AdversarialReport run_adversarial_adam(double beta1, double beta2, long steps,
                                       long renorm_every) {
  if (steps < 1) {
    throw std::invalid_argument("run_adversarial_adam: steps must be >= 1");
  }
  if (renorm_every < 0) {
    throw std::invalid_argument("run_adversarial_adam: renorm_every must be >= 0");
  }
  AdversarialReport rep;
  rep.beta1 = beta1;
  rep.beta2 = beta2;
  rep.steps = steps;
  rep.asymptotic_bound = adam_ratio_bound(beta1, beta2);  // validates b1^2 < b2
  if (beta1 == 0.0) {
    throw std::invalid_argument("run_adversarial_adam: beta1 must be > 0");
  }

  const double stream_ratio = beta2 / beta1;
  double g = 1.0;
  double m = 0.0;
  double v = 0.0;
  double prev = 0.0;
  for (long t = 1; t <= steps; ++t) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    if (!std::isfinite(g) || !std::isfinite(v)) {
      throw std::runtime_error(
          "run_adversarial_adam: stream overflowed fp64 at step " +
          std::to_string(t) + "; enable renormalization");
    }
    const double td = static_cast<double>(t);
    const double m_hat = m / (1.0 - std::pow(beta1, td));
    const double v_hat = v / (1.0 - std::pow(beta2, td));
    const double ratio = std::fabs(m_hat) / std::sqrt(v_hat);
    if (ratio > rep.sup_ratio) {
      rep.sup_ratio = ratio;
      rep.sup_step = t;
    }
    const double bound_t = adam_ratio_bound(beta1, beta2, t);
    rep.max_bound_violation =
        std::max(rep.max_bound_violation, ratio - bound_t);
    // Allow sub-ulp wobble; the exact sequence is nondecreasing.
    if (ratio + 1e-12 < prev) rep.nondecreasing = false;
    prev = ratio;

    // Rescaling the whole history by a power of two leaves the ratio
    // bitwise unchanged (m and g scale by c, v by c^2), so this keeps the
    // stream finite at any horizon without perturbing the simulation.
    if (renorm_every > 0 && t % renorm_every == 0) {
      const double c = std::exp2(static_cast<double>(-std::ilogb(g)));
      g *= c;
      m *= c;
      v *= c * c;
    }
    g *= stream_ratio;
  }
  return rep;
}

TwoBetaS3::TwoBetaS3(std::size_t dim, double beta1, double beta2, double p)
    : beta1_(beta1),
      beta2_(beta2),
      p_(p),
      m_(dim, 0.0),
      s_(dim, 0.0),
      last_b_(dim, 0.0) {
  if (!std::isfinite(beta1) || beta1 < 0.0 || beta1 > 1.0 ||
      !std::isfinite(beta2) || beta2 < 0.0 || beta2 > 1.0) {
    throw std::invalid_argument("TwoBetaS3: betas within [0, 1]");
  }
  if (!std::isfinite(p) || p < 1.0) {
    throw std::invalid_argument("p within [1, +∞)");
  }
}

ParamVector TwoBetaS3::step(const ParamVector& g) {
  require_same_dim(g, m_, "TwoBetaS3::step");
  require_finite(g, "TwoBetaS3::step: gradient");
  const ParamVector gp = abs_pow(g, p_);
  ParamVector n(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g[i];
    s_[i] = beta2_ * s_[i] + (1.0 - beta2_) * gp[i];
    n[i] = beta1_ * m_[i] + (1.0 - beta1_) * g[i];
    const double braw = beta2_ * s_[i] + (1.0 - beta2_) * gp[i];
    last_b_[i] = p_ == 1.0
                     ? braw
                     : (p_ == 2.0 ? std::sqrt(braw) : std::pow(braw, 1.0 / p_));
  }
  t_ += 1;
  return div(n, last_b_, ZeroPolicy::ZeroOverZero);
}

NagGapReport nag_equivalence_check(const problems::Problem& problem,
                                   const ParamVector& x0, double beta,
                                   double gamma, long steps, double tolerance) {
  if (x0.size() != problem.dim) {
    throw std::invalid_argument("nag_equivalence_check: x0 dimension mismatch");
  }
  if (steps < 1) {
    throw std::invalid_argument("nag_equivalence_check: steps must be >= 1");
  }
  const GradFn grad = [&problem](const ParamVector& x) {
    return problem.grad(x);
  };
  const std::size_t dim = x0.size();
  NagState st1(NagVariant::I, dim);
  NagState st2(NagVariant::II, dim);
  NagState st3(NagVariant::III, dim);
  ParamVector xt = x0;  // variant I's extrapolated iterate
  ParamVector x2 = x0;
  ParamVector x3 = x0;

  NagGapReport rep;
  rep.tolerance = tolerance;
  rep.steps = steps;
  for (long t = 1; t <= steps; ++t) {
    nag_step(st1, xt, grad, gamma, beta);
    nag_step(st2, x2, grad, gamma, beta);
    nag_step(st3, x3, grad, gamma, beta);
    for (std::size_t i = 0; i < dim; ++i) {
      // Change of variables: x_{t+1} = xtilde_{t+1} - gamma*beta*m_t.
      const double aligned = xt[i] - gamma * beta * st1.m[i];
      rep.max_gap_I_II = std::max(rep.max_gap_I_II, std::fabs(aligned - x2[i]));
      rep.max_gap_II_III = std::max(rep.max_gap_II_III, std::fabs(x2[i] - x3[i]));
    }
  }
  rep.pass = rep.max_gap_I_II <= tolerance && rep.max_gap_II_III <= tolerance;
  return rep;
}

double ConvergenceBudget::beta() const {
  return 1.0 - 1.0 / std::sqrt(static_cast<double>(T));
}

double ConvergenceBudget::gamma() const {
  const double t12 = std::sqrt(static_cast<double>(T));
  const double t14 = std::sqrt(t12);
  return 1.0 / (L0 * t12 * t14);
}

void ConvergenceBudget::validate() const {
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  if (!std::isfinite(L0) || L0 <= 0.0) {
    throw std::invalid_argument("L0 must be finite and > 0");
  }
  if (!std::isfinite(L1) || L1 < 0.0) {
    throw std::invalid_argument("L1 must be finite and >= 0");
  }
  if (!std::isfinite(R) || R < 0.0) {
    throw std::invalid_argument("R must be finite and >= 0");
  }
  if (!std::isfinite(sigma) || sigma < 0.0) {
    throw std::invalid_argument("sigma must be finite and >= 0");
  }
  if (!std::isfinite(F_gap) || F_gap < 0.0) {
    throw std::invalid_argument("F_gap must be finite and >= 0");
  }
  if (!std::isfinite(grad1_norm) || grad1_norm < 0.0) {
    throw std::invalid_argument("grad1_norm must be finite and >= 0");
  }
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (!std::isfinite(U_max) || U_max < 1.0) {
    throw std::invalid_argument("U_max must be finite and >= 1");
  }
}

ConvergenceReport convergence_bound_terms(const ConvergenceBudget& budget) {
  budget.validate();
  const double Td = static_cast<double>(budget.T);
  // Powers of T composed from square roots so that power-of-two budgets
  // (e.g. T = 16) evaluate exactly in fp64.
  const double t12 = std::sqrt(Td);
  const double t14 = std::sqrt(t12);
  const double t74 = Td * t12 * t14;
  const double b = budget.beta();
  const double sd = std::sqrt(static_cast<double>(budget.d));
  const double dd = static_cast<double>(budget.d);

  ConvergenceReport rep;
  rep.term_init_gap = 2.0 * budget.L0 * budget.U_max * budget.F_gap / t14;
  rep.term_grad1 = 4.0 * b * budget.U_max * sd * budget.grad1_norm / t12;
  rep.term_noise = 4.0 * budget.U_max * sd * budget.sigma / t14;
  rep.term_beta = 4.0 * b * b * budget.U_max * dd / t14;
  rep.term_tail = budget.U_max * dd / t74;
  rep.total = rep.term_init_gap + rep.term_grad1 + rep.term_noise +
              rep.term_beta + rep.term_tail;

  const double u_min = 1.0 / budget.U_max;
  const double thr1 =
      std::pow(2.0 * dd * budget.L1 / (budget.L0 * u_min), 4.0 / 3.0);
  const double one_minus_b = 1.0 / t12;
  const double thr2 = std::pow(
      8.0 * b * b * sd * budget.L1 / (one_minus_b * budget.L0 * u_min), 4.0);
  rep.t_threshold = std::max(thr1, thr2);
  rep.in_regime = Td >= rep.t_threshold;
  return rep;
}

double convergence_bound(const ConvergenceBudget& budget) {
  return convergence_bound_terms(budget).total;
}

std::pair<double, double> estimate_generalized_smoothness(
    const problems::Problem& problem, const std::vector<ParamVector>& trajectory,
    double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument(
        "estimate_generalized_smoothness: radius must be finite and > 0");
  }
  if (trajectory.size() < 2) {
    throw std::invalid_argument(
        "estimate_generalized_smoothness: need at least two trajectory points");
  }
  // Consecutive pairs only, respecting the locality radius of the assumption.
  std::vector<double> a;  // ||grad(x_i)||
  std::vector<double> y;  // ||grad(x_{i+1}) - grad(x_i)|| / ||dx||
  ParamVector g_prev = problem.grad(trajectory.front());
  for (std::size_t i = 0; i + 1 < trajectory.size(); ++i) {
    const ParamVector g_next = problem.grad(trajectory[i + 1]);
    const double dx = norms(sub(trajectory[i + 1], trajectory[i])).l2;
    if (dx > 0.0 && dx <= radius) {
      a.push_back(norms(g_prev).l2);
      y.push_back(norms(sub(g_next, g_prev)).l2 / dx);
    }
    g_prev = g_next;
  }
  if (a.empty()) {
    throw std::invalid_argument(
        "estimate_generalized_smoothness: degenerate trajectory (no pair with "
        "0 < ||dx|| <= radius)");
  }
  if (a.size() == 1) {
    return {y[0], 0.0};  // underdetermined: attribute everything to L0
  }
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_y += y[i];
  }
  mean_a /= n;
  mean_y /= n;
  double var_a = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    var_a += (a[i] - mean_a) * (a[i] - mean_a);
    cov += (a[i] - mean_a) * (y[i] - mean_y);
  }
  double slope = var_a > 0.0 ? cov / var_a : 0.0;
  double intercept = mean_y - slope * mean_a;
  if (slope < 0.0) {
    slope = 0.0;
    intercept = mean_y;
  }
  if (intercept < 0.0) {
    // Refit through the origin.
    intercept = 0.0;
    double saa = 0.0, say = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      saa += a[i] * a[i];
      say += a[i] * y[i];
    }
    slope = saa > 0.0 ? std::max(0.0, say / saa) : 0.0;
  }
  return {intercept, slope};
}

double estimate_noise_sigma(const problems::Problem& problem,
                            const ParamVector& x, long samples,
                            RngStream& rng) {
  if (samples < 2) {
    throw std::invalid_argument("estimate_noise_sigma: samples must be >= 2");
  }
  std::vector<ParamVector> draws;
  draws.reserve(static_cast<std::size_t>(samples));
  for (long i = 0; i < samples; ++i) {
    draws.push_back(problem.stochastic_grad(x, rng));
  }
  ParamVector mean(draws.front().size(), 0.0);
  for (const auto& g : draws) axpy_inplace(mean, 1.0, g);
  for (auto& v : mean) v /= static_cast<double>(samples);
  double msd = 0.0;
  for (const auto& g : draws) {
    const double dev = norms(sub(g, mean)).l2;
    msd += dev * dev;
  }
  return std::sqrt(msd / static_cast<double>(samples));
}

// ------------------------------ stream families ----------------------------

namespace {

double tail_sign(RngStream& rng) { return rng.next_unit() < 0.5 ? -1.0 : 1.0; }

std::vector<StreamFamily> build_families() {
  std::vector<StreamFamily> fams;
  auto fill = [](std::size_t dim, auto&& per_coord) {
    ParamVector g(dim);
    for (auto& v : g) v = per_coord();
    return g;
  };

  fams.push_back({"gauss_unit", [](RngStream& r, long, std::size_t d) {
                    return gaussian_noise(r, d, 1.0);
                  }});
  fams.push_back({"gauss_large", [](RngStream& r, long, std::size_t d) {
                    return gaussian_noise(r, d, 100.0);
                  }});
  fams.push_back({"gauss_tiny", [](RngStream& r, long, std::size_t d) {
                    return gaussian_noise(r, d, 1e-6);
                  }});
  fams.push_back({"cauchy", [fill](RngStream& r, long, std::size_t d) {
                    return fill(d, [&r] {
                      return std::tan(std::numbers::pi * (r.next_unit() - 0.5));
                    });
                  }});
  fams.push_back({"lognormal_signed", [fill](RngStream& r, long, std::size_t d) {
                    return fill(d, [&r] {
                      return tail_sign(r) * std::exp(2.0 * r.next_gaussian());
                    });
                  }});
  fams.push_back({"pareto_signed", [fill](RngStream& r, long, std::size_t d) {
                    return fill(d, [&r] {
                      const double u = r.next_unit();
                      return tail_sign(r) * std::pow(1.0 - u, -1.0 / 1.5);
                    });
                  }});
  fams.push_back({"student_t3", [fill](RngStream& r, long, std::size_t d) {
                    return fill(d, [&r] {
                      const double z = r.next_gaussian();
                      double chi = 0.0;
                      for (int k = 0; k < 3; ++k) {
                        const double w = r.next_gaussian();
                        chi += w * w;
                      }
                      return z / std::sqrt(chi / 3.0);
                    });
                  }});
  fams.push_back({"const_pos", [](RngStream&, long, std::size_t d) {
                    return ParamVector(d, 1.5);
                  }});
  fams.push_back({"const_neg", [](RngStream&, long, std::size_t d) {
                    return ParamVector(d, -2.0);
                  }});
  fams.push_back({"alt_sign_unit", [](RngStream&, long t, std::size_t d) {
                    return ParamVector(d, t % 2 == 0 ? 1.0 : -1.0);
                  }});
  fams.push_back({"alt_sign_gauss", [fill](RngStream& r, long t, std::size_t d) {
                    const double s = t % 2 == 0 ? 1.0 : -1.0;
                    return fill(d, [&r, s] {
                      return s * std::fabs(r.next_gaussian());
                    });
                  }});
  fams.push_back({"growth_slow", [](RngStream&, long t, std::size_t d) {
                    return ParamVector(d, std::pow(1.02, static_cast<double>(t)));
                  }});
  fams.push_back({"growth_fast", [](RngStream&, long t, std::size_t d) {
                    return ParamVector(d, std::pow(1.11, static_cast<double>(t)));
                  }});
  fams.push_back({"decay", [](RngStream&, long t, std::size_t d) {
                    return ParamVector(d, std::pow(0.995, static_cast<double>(t)));
                  }});
  fams.push_back({"alt_growth", [](RngStream&, long t, std::size_t d) {
                    const double s = t % 2 == 0 ? 1.0 : -1.0;
                    return ParamVector(d, s * std::pow(1.01, static_cast<double>(t)));
                  }});
  fams.push_back({"sparse_bernoulli", [fill](RngStream& r, long, std::size_t d) {
                    return fill(d, [&r] {
                      const double u = r.next_unit();
                      if (u < 0.05) return 1.0;
                      if (u < 0.10) return -1.0;
                      return 0.0;
                    });
                  }});
  fams.push_back({"all_zero", [](RngStream&, long, std::size_t d) {
                    return ParamVector(d, 0.0);
                  }});
  fams.push_back({"burst", [fill](RngStream& r, long t, std::size_t d) {
                    const double scale = (t % 110) < 100 ? 1e-3 : 1e6;
                    return fill(d, [&r, scale] {
                      return scale * r.next_gaussian();
                    });
                  }});
  fams.push_back({"sinusoid", [](RngStream&, long t, std::size_t d) {
                    ParamVector g(d);
                    for (std::size_t i = 0; i < d; ++i) {
                      g[i] = 5.0 * std::sin(static_cast<double>(t) / 10.0 +
                                            static_cast<double>(i));
                    }
                    return g;
                  }});
  fams.push_back({"mixture_outlier", [fill](RngStream& r, long, std::size_t d) {
                    return fill(d, [&r] {
                      const double z = r.next_gaussian();
                      return r.next_unit() < 0.01 ? 1e4 * z : z;
                    });
                  }});
  fams.push_back({"uniform", [fill](RngStream& r, long, std::size_t d) {
                    return fill(d, [&r] { return 2.0 * r.next_unit() - 1.0; });
                  }});
  fams.push_back({"quantized", [fill](RngStream& r, long, std::size_t d) {
                    return fill(d, [&r] {
                      return std::round(4.0 * r.next_gaussian()) / 4.0;
                    });
                  }});
  fams.push_back({"regime_switch", [fill](RngStream& r, long t, std::size_t d) {
                    const double scale = t < 500 ? 1e-6 : 1e6;
                    return fill(d, [&r, scale] {
                      return scale * r.next_gaussian();
                    });
                  }});
  fams.push_back({"single_spike", [fill](RngStream& r, long t, std::size_t d) {
                    if (t == 500) return ParamVector(d, 1e8);
                    return fill(d, [&r] { return r.next_gaussian(); });
                  }});
  return fams;
}

}  // namespace

const std::vector<StreamFamily>& gradient_stream_families() {
  static const std::vector<StreamFamily> fams = build_families();
  return fams;
}

}  // namespace optikit::theory
