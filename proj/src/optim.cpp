#include "optikit/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace optikit {

namespace {

void require_lr(double lr, const char* who) {
  if (!std::isfinite(lr) || lr < 0.0) {
    throw std::invalid_argument(std::string(who) +
                                ": lr must be finite and >= 0");
  }
}

void require_unit_range(double v, const char* field, bool closed_top) {
  const bool ok = std::isfinite(v) && v >= 0.0 && (closed_top ? v <= 1.0 : v < 1.0);
  if (!ok) {
    throw std::invalid_argument(std::string(field) + " within [0, 1" +
                                (closed_top ? "]" : ")"));
  }
}

double root_p(double v, double p) {
  if (p == 1.0) return v;
  if (p == 2.0) return std::sqrt(v);
  return std::pow(v, 1.0 / p);
}

std::vector<double> get_vec(const nlohmann::json& snap, const char* key,
                            std::size_t dim) {
  if (!snap.contains(key) || !snap.at(key).is_array()) {
    throw std::invalid_argument(std::string("restore: missing array field '") +
                                key + "'");
  }
  auto v = snap.at(key).get<std::vector<double>>();
  if (dim != 0 && v.size() != dim) {
    throw std::invalid_argument(std::string("restore: field '") + key +
                                "' has dimension " + std::to_string(v.size()) +
                                ", expected " + std::to_string(dim));
  }
  return v;
}

long get_step(const nlohmann::json& snap) {
  const long t = snap.at("t").get<long>();
  if (t < 0) throw std::invalid_argument("restore: step counter must be >= 0");
  return t;
}

void require_type(const nlohmann::json& snap, const char* expected) {
  if (!snap.contains("type") || snap.at("type") != expected) {
    throw std::invalid_argument(std::string("restore: snapshot type is not '") +
                                expected + "'");
  }
}

}  // namespace

void S3Hyper::validate() const {
  require_unit_range(beta, "beta", /*closed_top=*/true);
  if (!std::isfinite(p) || p < 1.0) {
    throw std::invalid_argument("p within [1, +∞)");
  }
  if (!std::isfinite(weight_decay) || weight_decay < 0.0) {
    throw std::invalid_argument("weight_decay must be finite and >= 0");
  }
}

void AdamHyper::validate() const {
  require_unit_range(beta1, "beta1", /*closed_top=*/false);
  require_unit_range(beta2, "beta2", /*closed_top=*/false);
  if (!std::isfinite(epsilon) || epsilon < 0.0) {
    throw std::invalid_argument("epsilon must be finite and >= 0");
  }
  if (!std::isfinite(weight_decay) || weight_decay < 0.0) {
    throw std::invalid_argument("weight_decay must be finite and >= 0");
  }
  if (update_clip && (!std::isfinite(*update_clip) || *update_clip <= 0.0)) {
    throw std::invalid_argument("update_clip must be finite and > 0");
  }
}

StepIntermediates s3_step(S3State& state, const S3Hyper& hyper, ParamVector& x,
                          const ParamVector& g, double lr) {
  hyper.validate();
  require_lr(lr, "s3_step");
  require_same_dim(x, g, "s3_step");
  require_same_dim(state.m, g, "s3_step: state");
  require_finite(g, "s3_step: gradient");

  const double beta = hyper.beta;
  const std::size_t dim = g.size();
  const ParamVector gp = abs_pow(g, hyper.p);  // may throw before any mutation

  StepIntermediates out;
  out.n.resize(dim);
  out.b.resize(dim);
  out.update.resize(dim);
  ParamVector m_new(dim), s_new(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    m_new[i] = beta * state.m[i] + (1.0 - beta) * g[i];
    s_new[i] = beta * state.s[i] + (1.0 - beta) * gp[i];
    out.n[i] = beta * m_new[i] + (1.0 - beta) * g[i];
    out.b[i] = root_p(beta * s_new[i] + (1.0 - beta) * gp[i], hyper.p);
  }
  // 0/0 -> 0 is sound here: b = 0 forces the whole gradient history of that
  // coordinate to zero, hence n = 0 too.
  out.update = div(out.n, out.b, ZeroPolicy::ZeroOverZero);

  state.m = std::move(m_new);
  state.s = std::move(s_new);
  state.t += 1;
  for (std::size_t i = 0; i < dim; ++i) {
    x[i] = x[i] - lr * out.update[i] - lr * hyper.weight_decay * x[i];
  }
  return out;
}

StepIntermediates adam_step(AdamState& state, const AdamHyper& hyper,
                            ParamVector& x, const ParamVector& g, double lr) {
  hyper.validate();
  require_lr(lr, "adam_step");
  require_same_dim(x, g, "adam_step");
  require_same_dim(state.m_tilde, g, "adam_step: state");
  require_finite(g, "adam_step: gradient");

  const std::size_t dim = g.size();
  const long t_new = state.t + 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t_new));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t_new));

  StepIntermediates out;
  out.n.resize(dim);
  out.b.resize(dim);
  out.update.resize(dim);
  ParamVector m_new(dim), v_new(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    m_new[i] = hyper.beta1 * state.m_tilde[i] + (1.0 - hyper.beta1) * g[i];
    v_new[i] = hyper.beta2 * state.v_tilde[i] + (1.0 - hyper.beta2) * g[i] * g[i];
    const double m_hat = m_new[i] / bc1;
    const double v_hat = v_new[i] / bc2;
    const double denom = std::sqrt(v_hat) + hyper.epsilon;
    out.n[i] = m_hat;
    out.b[i] = denom;
    // denom == 0 only when every past gradient of the coordinate was zero,
    // which forces m_hat == 0 as well.
    double u = denom == 0.0 ? 0.0 : m_hat / denom;
    if (hyper.update_clip) {
      const double c = *hyper.update_clip;
      u = u > c ? c : (u < -c ? -c : u);
    }
    out.update[i] = u;
  }

  state.m_tilde = std::move(m_new);
  state.v_tilde = std::move(v_new);
  state.t = t_new;
  for (std::size_t i = 0; i < dim; ++i) {
    x[i] = x[i] - lr * out.update[i] - lr * hyper.weight_decay * x[i];
  }
  return out;
}

ParamVector sgdm_step(SgdmState& state, ParamVector& x, const ParamVector& g,
                      double lr, double momentum) {
  require_unit_range(momentum, "momentum", /*closed_top=*/true);
  require_lr(lr, "sgdm_step");
  require_same_dim(x, g, "sgdm_step");
  require_same_dim(state.m, g, "sgdm_step: state");
  require_finite(g, "sgdm_step: gradient");

  ParamVector m_new(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    m_new[i] = momentum * state.m[i] + g[i];
  }
  state.m = m_new;
  state.t += 1;
  axpy_inplace(x, -lr, state.m);
  return m_new;
}

ParamVector signsgd_step(ParamVector& x, const ParamVector& g, double lr) {
  require_lr(lr, "signsgd_step");
  require_same_dim(x, g, "signsgd_step");
  require_finite(g, "signsgd_step: gradient");
  ParamVector u = sign(g);
  axpy_inplace(x, -lr, u);
  return u;
}

ParamVector nag_step(NagState& state, ParamVector& x, const GradFn& grad_at,
                     double lr, double beta) {
  require_unit_range(beta, "beta", /*closed_top=*/true);
  require_lr(lr, "nag_step");
  require_same_dim(state.m, x, "nag_step: state");

  const std::size_t dim = x.size();
  ParamVector g;
  if (state.variant == NagVariant::I) {
    ParamVector probe(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      probe[i] = x[i] - lr * beta * state.m[i];
    }
    g = grad_at(probe);
  } else {
    g = grad_at(x);
  }
  require_same_dim(g, x, "nag_step: gradient");
  require_finite(g, "nag_step: gradient");

  ParamVector m_new(dim), update(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    m_new[i] = beta * state.m[i] + (1.0 - beta) * g[i];
  }
  switch (state.variant) {
    case NagVariant::I:
      update = m_new;
      break;
    case NagVariant::II:
      for (std::size_t i = 0; i < dim; ++i) {
        update[i] = beta * m_new[i] + (1.0 - beta) * g[i];
      }
      break;
    case NagVariant::III: {
      ParamVector r_new(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        r_new[i] = beta * state.r[i] + (1.0 - beta) * (g[i] - state.g_prev[i]);
        update[i] = m_new[i] + beta * r_new[i];
      }
      state.r = std::move(r_new);
      state.g_prev = g;
      break;
    }
  }
  state.m = std::move(m_new);
  state.t += 1;
  axpy_inplace(x, -lr, update);
  return update;
}

// --------------------------- snapshot / restore ----------------------------

nlohmann::json snapshot(const S3State& state, const S3Hyper& hyper) {
  return nlohmann::json{
      {"type", "s3"},
      {"t", state.t},
      {"m", state.m},
      {"s", state.s},
      {"hyper",
       {{"beta", hyper.beta},
        {"p", hyper.p},
        {"weight_decay", hyper.weight_decay}}}};
}

nlohmann::json snapshot(const AdamState& state, const AdamHyper& hyper) {
  nlohmann::json h{{"beta1", hyper.beta1},
                   {"beta2", hyper.beta2},
                   {"epsilon", hyper.epsilon},
                   {"weight_decay", hyper.weight_decay}};
  if (hyper.update_clip) {
    h["update_clip"] = *hyper.update_clip;
  } else {
    h["update_clip"] = nullptr;
  }
  return nlohmann::json{{"type", "adam"},
                        {"t", state.t},
                        {"m", state.m_tilde},
                        {"v", state.v_tilde},
                        {"hyper", h}};
}

nlohmann::json snapshot(const SgdmState& state, double momentum) {
  return nlohmann::json{{"type", "sgdm"},
                        {"t", state.t},
                        {"m", state.m},
                        {"hyper", {{"momentum", momentum}}}};
}

nlohmann::json snapshot(const NagState& state, double beta) {
  return nlohmann::json{
      {"type", "nag"},
      {"t", state.t},
      {"m", state.m},
      {"r", state.r},
      {"g_prev", state.g_prev},
      {"hyper",
       {{"beta", beta}, {"variant", static_cast<int>(state.variant) + 1}}}};
}

void restore(const nlohmann::json& snap, S3State& state, S3Hyper& hyper) {
  require_type(snap, "s3");
  const auto& h = snap.at("hyper");
  S3Hyper parsed{h.at("beta").get<double>(), h.at("p").get<double>(),
                 h.at("weight_decay").get<double>()};
  parsed.validate();
  auto m = get_vec(snap, "m", 0);
  auto s = get_vec(snap, "s", m.size());
  state.t = get_step(snap);
  state.m = std::move(m);
  state.s = std::move(s);
  hyper = parsed;
}

void restore(const nlohmann::json& snap, AdamState& state, AdamHyper& hyper) {
  require_type(snap, "adam");
  const auto& h = snap.at("hyper");
  AdamHyper parsed;
  parsed.beta1 = h.at("beta1").get<double>();
  parsed.beta2 = h.at("beta2").get<double>();
  parsed.epsilon = h.at("epsilon").get<double>();
  parsed.weight_decay = h.at("weight_decay").get<double>();
  if (h.contains("update_clip") && !h.at("update_clip").is_null()) {
    parsed.update_clip = h.at("update_clip").get<double>();
  }
  parsed.validate();
  auto m = get_vec(snap, "m", 0);
  auto v = get_vec(snap, "v", m.size());
  state.t = get_step(snap);
  state.m_tilde = std::move(m);
  state.v_tilde = std::move(v);
  hyper = parsed;
}

void restore(const nlohmann::json& snap, SgdmState& state, double& momentum) {
  require_type(snap, "sgdm");
  const double mu = snap.at("hyper").at("momentum").get<double>();
  require_unit_range(mu, "momentum", /*closed_top=*/true);
  state.m = get_vec(snap, "m", 0);
  state.t = get_step(snap);
  momentum = mu;
}

void restore(const nlohmann::json& snap, NagState& state, double& beta) {
  require_type(snap, "nag");
  const auto& h = snap.at("hyper");
  const double b = h.at("beta").get<double>();
  require_unit_range(b, "beta", /*closed_top=*/true);
  const int variant = h.at("variant").get<int>();
  if (variant < 1 || variant > 3) {
    throw std::invalid_argument("restore: nag variant must be 1, 2, or 3");
  }
  auto m = get_vec(snap, "m", 0);
  auto r = get_vec(snap, "r", m.size());
  auto g_prev = get_vec(snap, "g_prev", m.size());
  state.variant = static_cast<NagVariant>(variant - 1);
  state.t = get_step(snap);
  state.m = std::move(m);
  state.r = std::move(r);
  state.g_prev = std::move(g_prev);
  beta = b;
}

}  // namespace optikit
