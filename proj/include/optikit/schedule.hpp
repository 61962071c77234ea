#pragma once

#include <string>

#include <json.hpp>

namespace optikit::harness {

// Learning-rate schedule: constant, or a linear warmup from 0 to peak_lr
// followed by a cosine decay from peak_lr down to floor_fraction*peak_lr.
struct Schedule {
  enum class Kind { Constant, WarmupCosine };
  Kind kind = Kind::Constant;
  double peak_lr = 0.0;
  long warmup_steps = 0;
  long total_steps = 1;          // must exceed warmup_steps
  double floor_fraction = 0.0;   // final lr as a fraction of peak, in [0, 1]
  void validate() const;         // throws std::invalid_argument
};

// lr at an integer step in [0, total_steps]. Out of range throws
// std::invalid_argument. For warmup_cosine: lr(0) = 0 when warmup_steps > 0,
// lr(warmup_steps) = peak_lr, lr(total_steps) = floor_fraction*peak_lr.
double lr_at(const Schedule& schedule, long step);

// Strict JSON parse. Keys: kind ("constant" | "warmup_cosine"), peak_lr,
// warmup_steps, total_steps, floor_fraction. total_steps defaults to
// `default_total` when absent. Unknown keys throw ConfigError.
Schedule parse_schedule(const nlohmann::json& obj, const std::string& ctx,
                        long default_total);

// Weight-decay coupling rule keeping lr*wd constant across optimizers:
// returns lr_adam*wd_adam/lr. Throws std::invalid_argument when lr <= 0 or
// any input is non-finite or negative.
double coupled_weight_decay(double lr_adam, double wd_adam, double lr);

}  // namespace optikit::harness
