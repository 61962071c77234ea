#include "optikit/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace optikit::harness {

namespace {

double window_median(std::vector<double>& scratch) {
  const std::size_t n = scratch.size();
  const std::size_t mid = n / 2;
  std::nth_element(scratch.begin(), scratch.begin() + mid, scratch.end());
  double med = scratch[mid];
  if (n % 2 == 0) {
    const double lo =
        *std::max_element(scratch.begin(), scratch.begin() + mid);
    med = 0.5 * (lo + med);
  }
  return med;
}

}  // namespace

std::vector<SpikeEvent> detect_spikes(const std::vector<double>& losses,
                                      const std::vector<double>& max_updates,
                                      long window, double threshold_ratio) {
  if (window < 8) {
    throw std::invalid_argument("spike window must be >= 8");
  }
  if (!std::isfinite(threshold_ratio) || threshold_ratio <= 1.0) {
    throw std::invalid_argument("spike threshold_ratio must be > 1");
  }
  if (losses.size() != max_updates.size()) {
    throw std::invalid_argument(
        "losses and max_updates series must have equal length");
  }
  std::vector<SpikeEvent> events;
  const std::size_t w = static_cast<std::size_t>(window);
  if (losses.size() <= w) return events;

  std::vector<double> scratch(w);
  for (std::size_t t = w; t < losses.size(); ++t) {
    std::copy(losses.begin() + (t - w), losses.begin() + t, scratch.begin());
    const double med = window_median(scratch);
    if (!std::isfinite(med) || med <= 0.0) continue;
    if (!(losses[t] >= threshold_ratio * med)) continue;
    SpikeEvent ev;
    ev.step = static_cast<long>(t) + 1;
    ev.loss_before = med;
    ev.loss_at = losses[t];
    ev.ratio = losses[t] / med;
    ev.preceding_max_update =
        *std::max_element(max_updates.begin() + (t - w),
                          max_updates.begin() + t);
    events.push_back(ev);
  }
  return events;
}

std::vector<SpikeEvent> detect_spikes(const std::vector<StepStats>& stats,
                                      long window, double threshold_ratio) {
  std::vector<double> losses(stats.size());
  std::vector<double> max_updates(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) {
    losses[i] = stats[i].loss;
    max_updates[i] = stats[i].max_update;
  }
  auto events = detect_spikes(losses, max_updates, window, threshold_ratio);
  // Re-anchor to the recorded step numbers (stats are 1-indexed already, but
  // a partial record could in principle start elsewhere).
  for (auto& ev : events) {
    ev.step = stats[static_cast<std::size_t>(ev.step - 1)].step;
  }
  return events;
}

}  // namespace optikit::harness
