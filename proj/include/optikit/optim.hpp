#pragma once

#include <cstddef>
#include <functional>
#include <optional>

#include <json.hpp>

#include "optikit/vec.hpp"

namespace optikit {

// Per-step by-products shared by the adaptive optimizers: the momentum
// numerator, the nonnegative denominator, and the applied ratio update
// (before learning-rate scaling).
struct StepIntermediates {
  ParamVector n;
  ParamVector b;
  ParamVector update;
};

// ---------------------------------------------------------------------------
// S3: sign-like update n_t / b_t(p) with one shared EMA coefficient.
// ---------------------------------------------------------------------------

struct S3Hyper {
  double beta = 0.95;
  double p = 3.0;
  double weight_decay = 0.0;  // decoupled, applied as x -= lr*wd*x
  void validate() const;      // throws std::invalid_argument
};

struct S3State {
  ParamVector m;  // first momentum
  ParamVector s;  // p-th order momentum, coordinate-wise >= 0
  long t = 0;
  explicit S3State(std::size_t dim) : m(dim, 0.0), s(dim, 0.0) {}
};

// m' = beta*m + (1-beta)*g
// s' = beta*s + (1-beta)*|g|^p
// n  = beta*m' + (1-beta)*g
// b  = (beta*s' + (1-beta)*|g|^p)^(1/p)
// update = n/b with 0/0 -> 0; x -= lr*update + lr*weight_decay*x
// With a single shared beta, |update| <= 1 coordinate-wise.
// State and x are only mutated after all inputs validate.
StepIntermediates s3_step(S3State& state, const S3Hyper& hyper, ParamVector& x,
                          const ParamVector& g, double lr);

// ---------------------------------------------------------------------------
// Adam / AdamW with optional elementwise update clipping.
// ---------------------------------------------------------------------------

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  // The exact-ratio analyses assume epsilon = 0; training defaults to 1e-8.
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW)
  std::optional<double> update_clip;  // clamp update to [-c, c] when set
  void validate() const;
};

struct AdamState {
  ParamVector m_tilde;  // raw first moment
  ParamVector v_tilde;  // raw second moment, coordinate-wise >= 0
  long t = 0;
  explicit AdamState(std::size_t dim) : m_tilde(dim, 0.0), v_tilde(dim, 0.0) {}
};

// Bias-corrected update m_t/(sqrt(v_t)+eps). When epsilon == 0 and a
// coordinate has an all-zero gradient history (v = 0 forces m = 0), the
// update is 0 rather than 0/0.
StepIntermediates adam_step(AdamState& state, const AdamHyper& hyper,
                            ParamVector& x, const ParamVector& g, double lr);

// ---------------------------------------------------------------------------
// SGD with heavy-ball momentum, and SignSGD.
// ---------------------------------------------------------------------------

struct SgdmState {
  ParamVector m;
  long t = 0;
  explicit SgdmState(std::size_t dim) : m(dim, 0.0) {}
};

// m' = momentum*m + g; x -= lr*m'. Returns the applied update m'.
ParamVector sgdm_step(SgdmState& state, ParamVector& x, const ParamVector& g,
                      double lr, double momentum);

// x -= lr*sign(g). Returns the applied update sign(g).
ParamVector signsgd_step(ParamVector& x, const ParamVector& g, double lr);

// ---------------------------------------------------------------------------
// Nesterov accelerated gradient, three equivalent formulations.
// ---------------------------------------------------------------------------

enum class NagVariant { I, II, III };

struct NagState {
  NagVariant variant;
  ParamVector m;
  ParamVector r;       // variant III auxiliary momentum
  ParamVector g_prev;  // variant III; zero at t = 0
  long t = 0;
  NagState(NagVariant v, std::size_t dim)
      : variant(v), m(dim, 0.0), r(dim, 0.0), g_prev(dim, 0.0) {}
};

using GradFn = std::function<ParamVector(const ParamVector&)>;

// Variant I treats x as the extrapolated iterate and evaluates the gradient
// at x - lr*beta*m; variants II and III evaluate at x directly. Returns the
// applied update (the vector scaled by lr in the x assignment):
//   I:   m'
//   II:  beta*m' + (1-beta)*g
//   III: m' + beta*r'
ParamVector nag_step(NagState& state, ParamVector& x, const GradFn& grad_at,
                     double lr, double beta);

// ---------------------------------------------------------------------------
// State snapshot/restore. Snapshots are plain JSON so runs are resumable and
// trajectories auditable; restoring reproduces the exact fp64 state.
// ---------------------------------------------------------------------------

nlohmann::json snapshot(const S3State& state, const S3Hyper& hyper);
nlohmann::json snapshot(const AdamState& state, const AdamHyper& hyper);
nlohmann::json snapshot(const SgdmState& state, double momentum);
nlohmann::json snapshot(const NagState& state, double beta);

void restore(const nlohmann::json& snap, S3State& state, S3Hyper& hyper);
void restore(const nlohmann::json& snap, AdamState& state, AdamHyper& hyper);
void restore(const nlohmann::json& snap, SgdmState& state, double& momentum);
void restore(const nlohmann::json& snap, NagState& state, double& beta);

}  // namespace optikit
