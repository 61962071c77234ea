#pragma once

#include <vector>

namespace optikit::harness {

// Per-step run telemetry. mean_update is the average of per-coordinate
// absolute updates, so min_update <= mean_update <= max_update always.
struct StepStats {
  long step = 0;  // 1-indexed
  double loss = 0.0;
  double mean_update = 0.0;
  double max_update = 0.0;
  double min_update = 0.0;
  double grad_l2 = 0.0;
  double lr = 0.0;
};

// A step whose loss is at least threshold_ratio times the trailing-window
// median. Ratio-based, so the detector is invariant under positive rescaling
// of the loss series.
struct SpikeEvent {
  long step = 0;
  double loss_before = 0.0;          // trailing-window median
  double loss_at = 0.0;
  double ratio = 0.0;                // loss_at / loss_before
  double preceding_max_update = 0.0;  // max of max_update over the window
};

// Flags index t (0-based; reported step = t+1) when
//   losses[t] >= threshold_ratio * median(losses[t-window .. t-1]).
// Windows whose median is <= 0 or non-finite are skipped (no ratio exists).
// Requires window >= 8, threshold_ratio > 1, equal-length series; a series
// shorter than window+1 yields no events.
std::vector<SpikeEvent> detect_spikes(const std::vector<double>& losses,
                                      const std::vector<double>& max_updates,
                                      long window, double threshold_ratio);

std::vector<SpikeEvent> detect_spikes(const std::vector<StepStats>& stats,
                                      long window, double threshold_ratio);

}  // namespace optikit::harness
