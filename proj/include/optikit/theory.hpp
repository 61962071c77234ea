#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "optikit/problems.hpp"
#include "optikit/rng.hpp"
#include "optikit/vec.hpp"

namespace optikit::theory {

// ---------------------------------------------------------------------------
// Update-ratio bounds.
// ---------------------------------------------------------------------------

// Asymptotic worst-case |m_t/sqrt(v_t)| for bias-corrected Adam with
// epsilon = 0: (1-b1) / (sqrt(1-b2) * sqrt(1-b1^2/b2)).
// Requires b1^2 < b2. For (0.9, 0.999) this is about 7.27.
double adam_ratio_bound(double beta1, double beta2);

// Exact bound at a finite step t >= 1:
//   (1-b1)*sqrt(1-b2^t)*sqrt(1-(b1^2/b2)^t)
//   / ((1-b1^t)*sqrt(1-b2)*sqrt(1-b1^2/b2))
// Equals 1 at t = 1 and increases towards the asymptotic value.
double adam_ratio_bound(double beta1, double beta2, long t);

// Hyperparameters of the two-coefficient soft-sign ratio bound. q is the
// Hoelder conjugate of p (q = infinity when p = 1).
struct BoundInputs {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double p = 2.0;
  double q() const;       // +infinity at p = 1
  void validate() const;  // p >= 1 and beta1 < beta2^(1/p) (<= at p = 1)
};

// Worst-case |n_t|/b_t for the two-coefficient soft-sign update:
//   (1-b1) / ((1-b2)^(1/p) * (1-b1^q/b2^(q/p))^(1/q))
// At p = 1 the second factor is taken at its q->infinity limit (value 1),
// giving (1-b1)/(1-b2). Equals exactly 1 when beta1 == beta2.
double s3_ratio_bound(const BoundInputs& inputs);
double s3_ratio_bound(double beta1, double beta2, double p);

// ---------------------------------------------------------------------------
// The bound-maximizing gradient stream and its Adam simulation.
// ---------------------------------------------------------------------------

// Scalar stream g_t = g0 * (beta2/beta1)^t, t = 0..steps-1, all positive.
// This geometric growth with constant sign drives Adam's ratio to the exact
// per-step bound. Throws if the stream overflows fp64 (use fewer steps, or
// run_adversarial_adam which renormalizes internally).
std::vector<double> adversarial_sequence(double beta1, double beta2, double g0,
                                         long steps);

struct AdversarialReport {
  double beta1 = 0.0;
  double beta2 = 0.0;
  long steps = 0;
  double sup_ratio = 0.0;        // sup over t of |update|
  long sup_step = 0;             // argmax t (1-based)
  double asymptotic_bound = 0.0; // adam_ratio_bound(beta1, beta2)
  // max over t of (ratio_t - per-step bound); <= tolerance means the bound
  // held at every step.
  double max_bound_violation = 0.0;
  bool nondecreasing = true;     // ratio_t never drops as t grows
};

// Feeds the maximizing stream to a scalar Adam recursion (epsilon = 0,
// bias-corrected). Every `renorm_every` steps the running gradient and the
// moments are rescaled by a power of two (g -> c*g, m -> c*m, v -> c^2*v),
// which is bitwise neutral to the update and keeps the stream finite at any
// horizon. renorm_every = 0 disables renormalization.
AdversarialReport run_adversarial_adam(double beta1, double beta2, long steps,
                                       long renorm_every = 500);

// ---------------------------------------------------------------------------
// Two-coefficient soft-sign simulator (numerator EMA uses beta1, denominator
// EMA uses beta2). Exposed for bound stress tests only; the public optimizer
// fixes one shared beta.
// ---------------------------------------------------------------------------

class TwoBetaS3 {
 public:
  TwoBetaS3(std::size_t dim, double beta1, double beta2, double p);
  // Advances one step and returns the per-coordinate update n/b (0/0 -> 0).
  ParamVector step(const ParamVector& g);
  const ParamVector& last_denominator() const { return last_b_; }
  long step_count() const { return t_; }

 private:
  double beta1_, beta2_, p_;
  ParamVector m_, s_, last_b_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Momentum-formulation equivalence oracle.
// ---------------------------------------------------------------------------

struct NagGapReport {
  double max_gap_I_II = 0.0;
  double max_gap_II_III = 0.0;
  double tolerance = 0.0;
  long steps = 0;
  bool pass = false;
};

// Runs the three momentum formulations on a deterministic problem (noise
// ignored; the analytic gradient is used) from the same starting point,
// aligning variant I through x_t = xtilde_t - gamma*beta*m_{t-1}, and
// reports the worst per-coordinate trajectory gaps.
NagGapReport nag_equivalence_check(const problems::Problem& problem,
                                   const ParamVector& x0, double beta,
                                   double gamma, long steps, double tolerance);

// ---------------------------------------------------------------------------
// Convergence-budget arithmetic.
// ---------------------------------------------------------------------------

struct ConvergenceBudget {
  double L0 = 1.0;          // smoothness offset
  double L1 = 0.0;          // gradient-proportional smoothness slope
  double R = 1.0;           // locality radius of the smoothness assumption
  double sigma = 0.0;       // gradient-noise standard-deviation bound
  double F_gap = 0.0;       // F(x1) - F*
  double grad1_norm = 0.0;  // l2 norm of the initial gradient
  long d = 1;               // parameter dimension
  double U_max = 1.0;       // reciprocal lower bound on update magnitudes
  long T = 1;               // step budget
  double beta() const;      // prescribed 1 - 1/sqrt(T)
  double gamma() const;     // prescribed 1/(L0*T^(3/4))
  void validate() const;
};

struct ConvergenceReport {
  // The five right-hand-side terms, in printed order.
  double term_init_gap = 0.0;   // 2*L0*U_max*F_gap / T^(1/4)
  double term_grad1 = 0.0;      // 4*beta*U_max*sqrt(d)*grad1_norm / T^(1/2)
  double term_noise = 0.0;      // 4*U_max*sqrt(d)*sigma / T^(1/4)
  double term_beta = 0.0;       // 4*beta^2*U_max*d / T^(1/4)
  double term_tail = 0.0;       // U_max*d / T^(7/4)
  double total = 0.0;
  // Step-budget threshold under which the guarantee formally applies:
  // T >= max{(2*d*L1/(L0*u_min))^(4/3), (8*beta^2*sqrt(d)*L1/((1-beta)*L0*u_min))^4}
  // with u_min = 1/U_max. The bound is still computed when unmet.
  double t_threshold = 0.0;
  bool in_regime = false;
};

ConvergenceReport convergence_bound_terms(const ConvergenceBudget& budget);
double convergence_bound(const ConvergenceBudget& budget);

// ---------------------------------------------------------------------------
// Empirical estimators for the smoothness and noise assumptions.
// ---------------------------------------------------------------------------

// Least-squares fit of ||grad(x_{i+1}) - grad(x_i)|| / ||x_{i+1} - x_i||
// against ||grad(x_i)|| over consecutive trajectory pairs with step length
// <= radius; returns (L0_hat, L1_hat) clipped to be nonnegative. Throws if
// no usable pair exists (degenerate trajectory).
std::pair<double, double> estimate_generalized_smoothness(
    const problems::Problem& problem, const std::vector<ParamVector>& trajectory,
    double radius);

// sqrt of the mean squared l2 deviation of sampled stochastic gradients from
// their empirical mean at x. samples >= 2.
double estimate_noise_sigma(const problems::Problem& problem,
                            const ParamVector& x, long samples,
                            RngStream& rng);

// ---------------------------------------------------------------------------
// Named gradient-stream generators for bound stress tests. Each family maps
// (stream, step, dim) to a gradient; families cover random, heavy-tailed,
// adversarial, constant, alternating-sign, sparse, and bursty behaviour.
// ---------------------------------------------------------------------------

struct StreamFamily {
  std::string name;
  std::function<ParamVector(RngStream&, long, std::size_t)> gen;
};

const std::vector<StreamFamily>& gradient_stream_families();

// ---------------------------------------------------------------------------
// Verification grids behind the CLI `verify` subcommand. Each runs its
// default (or configured) grid, recording per-cell outcomes. Cells whose
// parameters violate a precondition are recorded as errors, not crashes.
// Reports: {theorem, grid, cells, max_violation, pass}.
// ---------------------------------------------------------------------------

struct TheoremReport {
  std::string theorem;
  nlohmann::json grid;
  nlohmann::json cells;
  double max_violation = 0.0;
  bool pass = false;
};

nlohmann::json report_to_json(const TheoremReport& report);

// t1: exact per-step and asymptotic ratio bounds for the adaptive-moment
//     update, on the maximizing stream and on random streams.
TheoremReport verify_t1(const nlohmann::json& grid_config);
// t2: unit bound for the shared-coefficient soft-sign update, the two-
//     coefficient bound, and denominator monotonicity in p.
TheoremReport verify_t2(const nlohmann::json& grid_config);
// t3: momentum-formulation equivalence on deterministic problems.
TheoremReport verify_t3(const nlohmann::json& grid_config);
// t4: convergence-budget arithmetic and monotonicity checks.
TheoremReport verify_t4(const nlohmann::json& grid_config);

}  // namespace optikit::theory
