#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

namespace optikit::harness {

// A sweep runs base_config x seeds x optimizers, each run independent and
// independently seeded, fanned out over worker threads.
struct SweepConfig {
  nlohmann::json base;  // run config without "optimizer"/"seed"
  std::vector<std::uint64_t> seeds;
  std::vector<nlohmann::json> optimizers;  // each stripped of its "label"
  std::vector<std::string> labels;         // parallel to optimizers
  int jobs = 1;
};

// Strict parse. Keys: base (run config object), seeds (array of integers or
// {count, start}), optimizers (non-empty array of optimizer objects, each
// with an optional unique "label"), jobs (>= 1). Every optimizer is
// validated against the base config up front.
SweepConfig parse_sweep_config(const nlohmann::json& config);

// Executes the sweep and returns the report: per-optimizer final losses,
// medians, divergence and spike counts, plus pairwise win fractions
// (fraction of seeds where optimizer a's final loss <= optimizer b's;
// diverged runs count as +infinity).
nlohmann::json run_sweep(const SweepConfig& cfg);

}  // namespace optikit::harness
