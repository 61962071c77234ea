#include "optikit/run.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "optikit/errors.hpp"
#include "optikit/jsonutil.hpp"
#include "optikit/optim.hpp"
#include "optikit/problems.hpp"
#include "optikit/rng.hpp"

namespace optikit::harness {

namespace {

using nlohmann::json;

json parse_optimizer(const json& obj, double peak_lr) {
  const std::string ctx = "optimizer config";
  require_object(obj, ctx);
  const std::string kind = get_field<std::string>(obj, "kind", ctx);

  auto resolve_wd = [&](double fallback) {
    if (obj.contains("coupled_wd")) {
      if (obj.contains("weight_decay")) {
        throw ConfigError(
            "weight_decay and coupled_wd are mutually exclusive in " + ctx);
      }
      const auto& c = obj.at("coupled_wd");
      check_keys(c, {"lr_adam", "wd_adam"}, ctx + ".coupled_wd");
      try {
        return coupled_weight_decay(
            get_field<double>(c, "lr_adam", ctx + ".coupled_wd"),
            get_field<double>(c, "wd_adam", ctx + ".coupled_wd"), peak_lr);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(e.what()) + " in " + ctx +
                          ".coupled_wd");
      }
    }
    return get_field_or<double>(obj, "weight_decay", ctx, fallback);
  };

  try {
    if (kind == "s3") {
      check_keys(obj, {"kind", "beta", "p", "weight_decay", "coupled_wd"},
                 ctx);
      S3Hyper h;
      h.beta = get_field_or<double>(obj, "beta", ctx, h.beta);
      h.p = get_field_or<double>(obj, "p", ctx, h.p);
      h.weight_decay = resolve_wd(0.0);
      h.validate();
      return json{{"kind", "s3"},
                  {"beta", h.beta},
                  {"p", h.p},
                  {"weight_decay", h.weight_decay}};
    }
    if (kind == "adam" || kind == "adamw") {
      check_keys(obj,
                 {"kind", "beta1", "beta2", "epsilon", "weight_decay",
                  "update_clip", "coupled_wd"},
                 ctx);
      AdamHyper h;
      h.beta1 = get_field_or<double>(obj, "beta1", ctx, h.beta1);
      h.beta2 = get_field_or<double>(obj, "beta2", ctx, h.beta2);
      h.epsilon = get_field_or<double>(obj, "epsilon", ctx, h.epsilon);
      h.weight_decay = resolve_wd(kind == "adamw" ? 0.1 : 0.0);
      json out{{"kind", kind},
               {"beta1", h.beta1},
               {"beta2", h.beta2},
               {"epsilon", h.epsilon},
               {"weight_decay", h.weight_decay}};
      if (obj.contains("update_clip") && !obj.at("update_clip").is_null()) {
        h.update_clip = get_field<double>(obj, "update_clip", ctx);
        out["update_clip"] = *h.update_clip;
      }
      h.validate();
      return out;
    }
    if (kind == "sgd") {
      check_keys(obj, {"kind"}, ctx);
      return json{{"kind", "sgd"}, {"momentum", 0.0}};
    }
    if (kind == "sgdm") {
      check_keys(obj, {"kind", "momentum"}, ctx);
      const double momentum = get_field_or<double>(obj, "momentum", ctx, 0.9);
      if (!std::isfinite(momentum) || momentum < 0.0 || momentum >= 1.0) {
        throw ConfigError("momentum must lie within [0, 1) in " + ctx);
      }
      return json{{"kind", "sgdm"}, {"momentum", momentum}};
    }
    if (kind == "signsgd") {
      check_keys(obj, {"kind"}, ctx);
      return json{{"kind", "signsgd"}};
    }
    if (kind == "nag") {
      check_keys(obj, {"kind", "variant", "beta"}, ctx);
      const std::string variant =
          get_field_or<std::string>(obj, "variant", ctx, "II");
      if (variant != "I" && variant != "II" && variant != "III") {
        throw ConfigError("nag variant must be 'I', 'II' or 'III' in " + ctx);
      }
      const double beta = get_field_or<double>(obj, "beta", ctx, 0.9);
      if (!std::isfinite(beta) || beta < 0.0 || beta >= 1.0) {
        throw ConfigError("nag beta must lie within [0, 1) in " + ctx);
      }
      return json{{"kind", "nag"}, {"variant", variant}, {"beta", beta}};
    }
  } catch (const std::invalid_argument& e) {
    // Hyperparameter range violations surface as config errors with the
    // original message (e.g. "p within [1, +inf)").
    throw ConfigError(std::string(e.what()) + " in " + ctx);
  }
  throw ConfigError("unknown optimizer kind '" + kind + "' in " + ctx);
}

// Optimizer state dispatch for the run loop. All states are built up front;
// only the configured one is touched.
struct Stepper {
  std::string kind;
  S3Hyper s3_hyper;
  S3State s3_state;
  AdamHyper adam_hyper;
  AdamState adam_state;
  SgdmState sgdm_state;
  double momentum = 0.0;
  NagState nag_state;
  double nag_beta = 0.0;

  Stepper(const json& opt, std::size_t dim)
      : kind(opt.at("kind").get<std::string>()),
        s3_state(dim),
        adam_state(dim),
        sgdm_state(dim),
        nag_state(NagVariant::II, dim) {
    if (kind == "s3") {
      s3_hyper.beta = opt.at("beta").get<double>();
      s3_hyper.p = opt.at("p").get<double>();
      s3_hyper.weight_decay = opt.at("weight_decay").get<double>();
    } else if (kind == "adam" || kind == "adamw") {
      adam_hyper.beta1 = opt.at("beta1").get<double>();
      adam_hyper.beta2 = opt.at("beta2").get<double>();
      adam_hyper.epsilon = opt.at("epsilon").get<double>();
      adam_hyper.weight_decay = opt.at("weight_decay").get<double>();
      if (opt.contains("update_clip")) {
        adam_hyper.update_clip = opt.at("update_clip").get<double>();
      }
    } else if (kind == "sgd" || kind == "sgdm") {
      momentum = opt.at("momentum").get<double>();
    } else if (kind == "nag") {
      const std::string v = opt.at("variant").get<std::string>();
      nag_state.variant = v == "I"    ? NagVariant::I
                          : v == "II" ? NagVariant::II
                                      : NagVariant::III;
      nag_beta = opt.at("beta").get<double>();
    }
  }

  ParamVector step(ParamVector& x, const GradFn& grad_at, double lr) {
    if (kind == "s3") {
      return s3_step(s3_state, s3_hyper, x, grad_at(x), lr).update;
    }
    if (kind == "adam" || kind == "adamw") {
      return adam_step(adam_state, adam_hyper, x, grad_at(x), lr).update;
    }
    if (kind == "sgd" || kind == "sgdm") {
      return sgdm_step(sgdm_state, x, grad_at(x), lr, momentum);
    }
    if (kind == "signsgd") {
      return signsgd_step(x, grad_at(x), lr);
    }
    return nag_step(nag_state, x, grad_at, lr, nag_beta);
  }
};

}  // namespace

RunConfig parse_run_config(const json& config) {
  const std::string ctx = "run config";
  check_keys(config,
             {"problem", "optimizer", "schedule", "seed", "steps", "x0",
              "grad_clip", "spike_window", "spike_threshold",
              "record_trajectory"},
             ctx);
  RunConfig cfg;

  if (!config.contains("problem")) {
    throw ConfigError("missing field 'problem' in " + ctx);
  }
  const auto& prob = config.at("problem");
  if (prob.is_string()) {
    cfg.problem_name = prob.get<std::string>();
    cfg.problem_options = json::object();
  } else {
    require_object(prob, ctx + ".problem");
    cfg.problem_name = get_field<std::string>(prob, "name", ctx + ".problem");
    cfg.problem_options = prob;
    cfg.problem_options.erase("name");
  }

  cfg.steps = get_field_or<long>(config, "steps", ctx, 1000);
  if (cfg.steps < 1) throw ConfigError("steps must be >= 1 in " + ctx);

  if (!config.contains("schedule")) {
    throw ConfigError("missing field 'schedule' in " + ctx);
  }
  cfg.schedule =
      parse_schedule(config.at("schedule"), ctx + ".schedule", cfg.steps);
  if (cfg.schedule.total_steps < cfg.steps) {
    throw ConfigError("schedule total_steps must be >= run steps in " + ctx);
  }

  if (!config.contains("optimizer")) {
    throw ConfigError("missing field 'optimizer' in " + ctx);
  }
  cfg.optimizer = parse_optimizer(config.at("optimizer"), cfg.schedule.peak_lr);

  cfg.seed = get_field_or<std::uint64_t>(config, "seed", ctx, 1);

  if (config.contains("x0") && !config.at("x0").is_null()) {
    cfg.x0 = get_field<ParamVector>(config, "x0", ctx);
    if (cfg.x0->empty() || !all_finite(*cfg.x0)) {
      throw ConfigError("x0 must be a non-empty finite vector in " + ctx);
    }
  }
  if (config.contains("grad_clip") && !config.at("grad_clip").is_null()) {
    cfg.grad_clip = get_field<double>(config, "grad_clip", ctx);
    if (!std::isfinite(*cfg.grad_clip) || *cfg.grad_clip <= 0.0) {
      throw ConfigError("grad_clip must be finite and > 0 in " + ctx);
    }
  }
  cfg.spike_window = get_field_or<long>(config, "spike_window", ctx, 100);
  if (cfg.spike_window < 8) {
    throw ConfigError("spike_window must be >= 8 in " + ctx);
  }
  cfg.spike_threshold =
      get_field_or<double>(config, "spike_threshold", ctx, 2.0);
  if (!std::isfinite(cfg.spike_threshold) || cfg.spike_threshold <= 1.0) {
    throw ConfigError("spike_threshold must be > 1 in " + ctx);
  }
  cfg.record_trajectory =
      get_field_or<bool>(config, "record_trajectory", ctx, false);

  // Normalized echo: replaying it reproduces the run bitwise.
  json problem_echo = cfg.problem_options;
  problem_echo["name"] = cfg.problem_name;
  cfg.normalized = json{
      {"problem", problem_echo},
      {"optimizer", cfg.optimizer},
      {"schedule",
       json{{"kind", cfg.schedule.kind == Schedule::Kind::Constant
                         ? "constant"
                         : "warmup_cosine"},
            {"peak_lr", cfg.schedule.peak_lr},
            {"warmup_steps", cfg.schedule.warmup_steps},
            {"total_steps", cfg.schedule.total_steps},
            {"floor_fraction", cfg.schedule.floor_fraction}}},
      {"seed", cfg.seed},
      {"steps", cfg.steps},
      {"spike_window", cfg.spike_window},
      {"spike_threshold", cfg.spike_threshold},
      {"record_trajectory", cfg.record_trajectory}};
  if (cfg.x0) cfg.normalized["x0"] = *cfg.x0;
  if (cfg.grad_clip) cfg.normalized["grad_clip"] = *cfg.grad_clip;
  return cfg;
}

RunRecord run(const RunConfig& cfg) {
  RunRecord rec;
  rec.config = cfg.normalized;

  problems::Problem prob =
      problems::make_problem(cfg.problem_name, cfg.problem_options);
  RngStream rng(cfg.seed);

  ParamVector x;
  if (cfg.x0) {
    x = *cfg.x0;
    if (x.size() != prob.dim) {
      throw ConfigError("x0 length " + std::to_string(x.size()) +
                        " does not match problem dim " +
                        std::to_string(prob.dim));
    }
  } else if (prob.init) {
    x = prob.init(rng);
  } else {
    x = prob.default_x0;
  }

  Stepper stepper(cfg.optimizer, x.size());

  double last_grad_l2 = 0.0;
  GradFn draw_grad = [&](const ParamVector& at) {
    ParamVector g = prob.stochastic_grad(at, rng);
    if (!all_finite(g)) throw DomainError("non-finite gradient");
    if (cfg.grad_clip) {
      const double n = norms(g).l2;
      if (n > *cfg.grad_clip) g = scale(g, *cfg.grad_clip / n);
    }
    last_grad_l2 = norms(g).l2;
    return g;
  };

  rec.stats.reserve(static_cast<std::size_t>(cfg.steps));
  for (long t = 1; t <= cfg.steps; ++t) {
    try {
      if (cfg.record_trajectory) rec.trajectory.push_back(x);
      const double loss = prob.loss(x);
      if (!std::isfinite(loss)) throw DomainError("non-finite loss");
      const double lr = lr_at(cfg.schedule, t - 1);
      const ParamVector update = stepper.step(x, draw_grad, lr);

      StepStats st;
      st.step = t;
      st.loss = loss;
      const ParamVector u = abs(update);
      st.max_update = *std::max_element(u.begin(), u.end());
      st.min_update = *std::min_element(u.begin(), u.end());
      double sum = 0.0;
      for (double v : u) sum += v;
      st.mean_update = sum / static_cast<double>(u.size());
      st.grad_l2 = last_grad_l2;
      st.lr = lr;
      rec.stats.push_back(st);

      if (!all_finite(x)) throw DomainError("non-finite parameters");
    } catch (const std::runtime_error&) {
      // Domain errors (pole crossings, non-finite values) and numeric
      // breakdowns terminate the run as a divergence; the partial record
      // up to the offending step is retained.
      rec.status = RunStatus::Diverged;
      rec.diverged_step = t;
      if (rec.trajectory.size() > rec.stats.size()) rec.trajectory.pop_back();
      break;
    }
  }

  rec.spikes = detect_spikes(rec.stats, cfg.spike_window, cfg.spike_threshold);
  rec.final_params = x;
  rec.final_params_digest = fnv1a_digest(x);
  if (rec.status == RunStatus::Completed) {
    try {
      const double fl = prob.loss(x);
      if (std::isfinite(fl)) rec.final_loss = fl;
    } catch (const std::runtime_error&) {
      // final point outside the domain: leave final_loss absent
    }
  }
  return rec;
}

RunRecord run(const json& config) { return run(parse_run_config(config)); }

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string stats_jsonl(const std::vector<StepStats>& stats) {
  std::string out;
  out.reserve(stats.size() * 96);
  for (const auto& s : stats) {
    out += "{\"step\":";
    out += std::to_string(s.step);
    out += ",\"loss\":";
    out += format_double(s.loss);
    out += ",\"mean_update\":";
    out += format_double(s.mean_update);
    out += ",\"max_update\":";
    out += format_double(s.max_update);
    out += ",\"min_update\":";
    out += format_double(s.min_update);
    out += ",\"grad_l2\":";
    out += format_double(s.grad_l2);
    out += ",\"lr\":";
    out += format_double(s.lr);
    out += "}\n";
  }
  return out;
}

std::string stats_csv(const std::vector<StepStats>& stats) {
  std::string out = "step,loss,mean_update,max_update,min_update,grad_l2,lr\n";
  out.reserve(out.size() + stats.size() * 64);
  for (const auto& s : stats) {
    out += std::to_string(s.step);
    out += ',';
    out += format_double(s.loss);
    out += ',';
    out += format_double(s.mean_update);
    out += ',';
    out += format_double(s.max_update);
    out += ',';
    out += format_double(s.min_update);
    out += ',';
    out += format_double(s.grad_l2);
    out += ',';
    out += format_double(s.lr);
    out += '\n';
  }
  return out;
}

nlohmann::json summary_json(const RunRecord& record) {
  json spikes = json::array();
  for (const auto& ev : record.spikes) {
    spikes.push_back(json{{"step", ev.step},
                          {"loss_before", ev.loss_before},
                          {"loss_at", ev.loss_at},
                          {"ratio", ev.ratio},
                          {"preceding_max_update", ev.preceding_max_update}});
  }
  json out{{"config", record.config},
           {"status", record.status == RunStatus::Completed ? "completed"
                                                            : "diverged"},
           {"steps_executed", record.stats.size()},
           {"final_params", record.final_params},
           {"final_params_digest", record.final_params_digest},
           {"spike_count", record.spikes.size()},
           {"spikes", spikes}};
  out["diverged_step"] = record.status == RunStatus::Diverged
                             ? json(record.diverged_step)
                             : json(nullptr);
  out["final_loss"] =
      record.final_loss ? json(*record.final_loss) : json(nullptr);
  return out;
}

std::string fnv1a_digest(const ParamVector& v) {
  std::uint64_t h = 14695981039346656037ULL;
  for (double d : v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  for (int i = 15; i >= 0; --i) {
    buf[i] = "0123456789abcdef"[h & 0xf];
    h >>= 4;
  }
  return std::string(buf, 16);
}

}  // namespace optikit::harness
