#include "optikit/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "optikit/errors.hpp"
#include "optikit/jsonutil.hpp"

namespace optikit::harness {

void Schedule::validate() const {
  if (!std::isfinite(peak_lr) || peak_lr <= 0.0) {
    throw std::invalid_argument("schedule peak_lr must be finite and > 0");
  }
  if (warmup_steps < 0) {
    throw std::invalid_argument("schedule warmup_steps must be >= 0");
  }
  if (total_steps <= warmup_steps) {
    throw std::invalid_argument(
        "schedule total_steps must exceed warmup_steps");
  }
  if (!std::isfinite(floor_fraction) || floor_fraction < 0.0 ||
      floor_fraction > 1.0) {
    throw std::invalid_argument(
        "schedule floor_fraction must lie within [0, 1]");
  }
}

double lr_at(const Schedule& schedule, long step) {
  schedule.validate();
  if (step < 0 || step > schedule.total_steps) {
    throw std::invalid_argument("schedule step " + std::to_string(step) +
                                " out of range [0, " +
                                std::to_string(schedule.total_steps) + "]");
  }
  if (schedule.kind == Schedule::Kind::Constant) return schedule.peak_lr;
  if (step < schedule.warmup_steps) {
    return schedule.peak_lr * static_cast<double>(step) /
           static_cast<double>(schedule.warmup_steps);
  }
  const double progress =
      static_cast<double>(step - schedule.warmup_steps) /
      static_cast<double>(schedule.total_steps - schedule.warmup_steps);
  const double floor = schedule.floor_fraction * schedule.peak_lr;
  return floor + (schedule.peak_lr - floor) * 0.5 *
                     (1.0 + std::cos(std::numbers::pi * progress));
}

Schedule parse_schedule(const nlohmann::json& obj, const std::string& ctx,
                        long default_total) {
  check_keys(obj,
             {"kind", "peak_lr", "warmup_steps", "total_steps",
              "floor_fraction"},
             ctx);
  Schedule s;
  const std::string kind =
      get_field_or<std::string>(obj, "kind", ctx, "constant");
  if (kind == "constant") {
    s.kind = Schedule::Kind::Constant;
  } else if (kind == "warmup_cosine") {
    s.kind = Schedule::Kind::WarmupCosine;
  } else {
    throw ConfigError("unknown schedule kind '" + kind + "' in " + ctx +
                      " (expected 'constant' or 'warmup_cosine')");
  }
  s.peak_lr = get_field<double>(obj, "peak_lr", ctx);
  s.warmup_steps = get_field_or<long>(obj, "warmup_steps", ctx, 0);
  s.total_steps = get_field_or<long>(obj, "total_steps", ctx, default_total);
  s.floor_fraction = get_field_or<double>(obj, "floor_fraction", ctx, 0.0);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(e.what()) + " in " + ctx);
  }
  return s;
}

double coupled_weight_decay(double lr_adam, double wd_adam, double lr) {
  if (!std::isfinite(lr_adam) || lr_adam < 0.0) {
    throw std::invalid_argument("lr_adam must be finite and >= 0");
  }
  if (!std::isfinite(wd_adam) || wd_adam < 0.0) {
    throw std::invalid_argument("wd_adam must be finite and >= 0");
  }
  if (!std::isfinite(lr) || lr <= 0.0) {
    throw std::invalid_argument(
        "coupled weight decay requires lr > 0 (lr*wd is kept constant)");
  }
  return lr_adam * wd_adam / lr;
}

}  // namespace optikit::harness
