#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "optikit/schedule.hpp"
#include "optikit/telemetry.hpp"
#include "optikit/vec.hpp"

namespace optikit::harness {

enum class RunStatus { Completed, Diverged };

// A fully validated run description. Build one with parse_run_config; the
// normalized echo (defaults filled in) is what gets persisted, so replaying
// a record's config reproduces the run bitwise.
struct RunConfig {
  nlohmann::json normalized;
  std::string problem_name;
  nlohmann::json problem_options;  // options object, name stripped
  nlohmann::json optimizer;        // kind + hyperparameters, defaults filled
  Schedule schedule;
  std::uint64_t seed = 1;
  long steps = 0;
  std::optional<ParamVector> x0;   // overrides the problem's initializer
  std::optional<double> grad_clip;  // global l2 threshold
  long spike_window = 100;
  double spike_threshold = 2.0;
  bool record_trajectory = false;
};

// Strict parse. Top-level keys: problem (name string or {name, ...options}),
// optimizer ({kind, ...hypers}), schedule, seed, steps, x0, grad_clip,
// spike_window, spike_threshold, record_trajectory. Optimizer kinds:
//   s3       beta, p, weight_decay, coupled_wd
//   adam     beta1, beta2, epsilon, weight_decay, update_clip, coupled_wd
//   adamw    adam with weight_decay defaulting to 0.1
//   sgd      momentum fixed at 0
//   sgdm     momentum (default 0.9)
//   signsgd  (no hypers)
//   nag      variant ("I" | "II" | "III"), beta
// coupled_wd = {lr_adam, wd_adam} replaces weight_decay with
// lr_adam*wd_adam/peak_lr. Unknown keys anywhere throw ConfigError.
RunConfig parse_run_config(const nlohmann::json& config);

struct RunRecord {
  nlohmann::json config;  // normalized echo
  RunStatus status = RunStatus::Completed;
  long diverged_step = 0;  // 0 when completed
  std::vector<StepStats> stats;
  std::vector<SpikeEvent> spikes;
  // Noiseless loss at the final parameters; absent when the run diverged or
  // the final point is outside the problem's domain.
  std::optional<double> final_loss;
  ParamVector final_params;
  std::string final_params_digest;  // fnv1a-64 over the raw fp64 bytes, hex
  std::vector<ParamVector> trajectory;  // pre-update iterates when requested
};

// Steps the configured optimizer on the configured problem, recording
// telemetry each step. Non-finite loss/params or a domain error (e.g. a
// pole crossing) terminates the run with status Diverged at that step; the
// partial record is retained. Deterministic per seed and build.
RunRecord run(const RunConfig& cfg);
RunRecord run(const nlohmann::json& config);

// ---------------------------------------------------------------------------
// Persistence. All fp64 values are printed with shortest round-trip
// formatting, so equal runs produce byte-identical files.
// ---------------------------------------------------------------------------

std::string format_double(double v);

// One JSON object per line, keys in fixed order:
// step, loss, mean_update, max_update, min_update, grad_l2, lr.
std::string stats_jsonl(const std::vector<StepStats>& stats);

// Header step,loss,mean_update,max_update,min_update,grad_l2,lr.
std::string stats_csv(const std::vector<StepStats>& stats);

nlohmann::json summary_json(const RunRecord& record);

std::string fnv1a_digest(const ParamVector& v);

}  // namespace optikit::harness
