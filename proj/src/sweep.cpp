#include "optikit/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

#include "optikit/errors.hpp"
#include "optikit/jsonutil.hpp"
#include "optikit/run.hpp"

namespace optikit::harness {

namespace {

using nlohmann::json;

struct CellResult {
  double final_loss = std::numeric_limits<double>::infinity();
  bool diverged = false;
  long spike_count = 0;
  std::string digest;
  std::string error;
};

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double med = v[mid];
  if (v.size() % 2 == 0) {
    med = 0.5 * (*std::max_element(v.begin(), v.begin() + mid) + med);
  }
  return med;
}

}  // namespace

SweepConfig parse_sweep_config(const json& config) {
  const std::string ctx = "sweep config";
  check_keys(config, {"base", "seeds", "optimizers", "jobs"}, ctx);
  SweepConfig cfg;

  if (!config.contains("base")) {
    throw ConfigError("missing field 'base' in " + ctx);
  }
  cfg.base = config.at("base");
  require_object(cfg.base, ctx + ".base");
  if (cfg.base.contains("optimizer") || cfg.base.contains("seed")) {
    throw ConfigError(
        "base must not set 'optimizer' or 'seed' (the sweep supplies them) in " +
        ctx);
  }

  if (!config.contains("seeds")) {
    throw ConfigError("missing field 'seeds' in " + ctx);
  }
  const auto& seeds = config.at("seeds");
  if (seeds.is_array()) {
    for (const auto& s : seeds) {
      if (!s.is_number_unsigned() && !s.is_number_integer()) {
        throw ConfigError("seeds entries must be integers in " + ctx);
      }
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  } else if (seeds.is_object()) {
    check_keys(seeds, {"count", "start"}, ctx + ".seeds");
    const long count = get_field<long>(seeds, "count", ctx + ".seeds");
    const std::uint64_t start =
        get_field_or<std::uint64_t>(seeds, "start", ctx + ".seeds", 1);
    if (count < 1) throw ConfigError("seeds.count must be >= 1 in " + ctx);
    for (long i = 0; i < count; ++i) {
      cfg.seeds.push_back(start + static_cast<std::uint64_t>(i));
    }
  } else {
    throw ConfigError("seeds must be an array or {count, start} in " + ctx);
  }
  if (cfg.seeds.empty()) {
    throw ConfigError("seeds must be non-empty in " + ctx);
  }

  if (!config.contains("optimizers")) {
    throw ConfigError("missing field 'optimizers' in " + ctx);
  }
  const auto& opts = config.at("optimizers");
  if (!opts.is_array() || opts.empty()) {
    throw ConfigError("optimizers must be a non-empty array in " + ctx);
  }
  for (const auto& o : opts) {
    require_object(o, ctx + ".optimizers entry");
    json opt = o;
    std::string label;
    if (opt.contains("label")) {
      label = get_field<std::string>(opt, "label", ctx + ".optimizers entry");
      opt.erase("label");
    } else {
      label = get_field<std::string>(opt, "kind", ctx + ".optimizers entry");
    }
    if (std::find(cfg.labels.begin(), cfg.labels.end(), label) !=
        cfg.labels.end()) {
      throw ConfigError("duplicate optimizer label '" + label + "' in " + ctx);
    }
    cfg.labels.push_back(label);
    cfg.optimizers.push_back(std::move(opt));
  }

  cfg.jobs = static_cast<int>(get_field_or<long>(config, "jobs", ctx, 1));
  if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1 in " + ctx);

  // Surface config errors before any threads spin up.
  for (const auto& opt : cfg.optimizers) {
    json probe = cfg.base;
    probe["optimizer"] = opt;
    probe["seed"] = cfg.seeds.front();
    parse_run_config(probe);
  }
  return cfg;
}

json run_sweep(const SweepConfig& cfg) {
  const std::size_t n_opt = cfg.optimizers.size();
  const std::size_t n_seed = cfg.seeds.size();
  const std::size_t total = n_opt * n_seed;
  std::vector<CellResult> results(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      const std::size_t oi = i / n_seed;
      const std::size_t si = i % n_seed;
      CellResult& cell = results[i];
      try {
        json run_cfg = cfg.base;
        run_cfg["optimizer"] = cfg.optimizers[oi];
        run_cfg["seed"] = cfg.seeds[si];
        const RunRecord rec = run(run_cfg);
        cell.diverged = rec.status == RunStatus::Diverged;
        cell.spike_count = static_cast<long>(rec.spikes.size());
        cell.digest = rec.final_params_digest;
        cell.final_loss = (!cell.diverged && rec.final_loss)
                              ? *rec.final_loss
                              : std::numeric_limits<double>::infinity();
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };

  const int jobs = std::min<int>(cfg.jobs, static_cast<int>(total));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(jobs > 1 ? jobs : 0));
  if (jobs > 1) {
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  } else {
    worker();
  }

  json report;
  report["seeds"] = cfg.seeds;
  report["jobs"] = cfg.jobs;
  report["base"] = cfg.base;
  report["optimizers"] = json::array();
  for (std::size_t oi = 0; oi < n_opt; ++oi) {
    json entry;
    entry["label"] = cfg.labels[oi];
    entry["optimizer"] = cfg.optimizers[oi];
    json losses = json::array();
    json spike_counts = json::array();
    std::vector<double> loss_vec;
    long divergences = 0;
    long total_spikes = 0;
    long errors = 0;
    for (std::size_t si = 0; si < n_seed; ++si) {
      const CellResult& cell = results[oi * n_seed + si];
      if (!cell.error.empty()) ++errors;
      if (cell.diverged) ++divergences;
      total_spikes += cell.spike_count;
      spike_counts.push_back(cell.spike_count);
      loss_vec.push_back(cell.final_loss);
      losses.push_back(std::isfinite(cell.final_loss) ? json(cell.final_loss)
                                                      : json(nullptr));
    }
    const double med = median_of(loss_vec);
    entry["final_losses"] = losses;
    entry["median_final_loss"] = std::isfinite(med) ? json(med) : json(nullptr);
    entry["divergences"] = divergences;
    entry["spike_counts"] = spike_counts;
    entry["total_spikes"] = total_spikes;
    if (errors > 0) entry["errors"] = errors;
    report["optimizers"].push_back(entry);
  }

  report["pairwise"] = json::array();
  for (std::size_t a = 0; a < n_opt; ++a) {
    for (std::size_t b = 0; b < n_opt; ++b) {
      if (a == b) continue;
      long wins = 0;
      for (std::size_t si = 0; si < n_seed; ++si) {
        const double la = results[a * n_seed + si].final_loss;
        const double lb = results[b * n_seed + si].final_loss;
        if (la <= lb) ++wins;
      }
      report["pairwise"].push_back(
          json{{"a", cfg.labels[a]},
               {"b", cfg.labels[b]},
               {"wins", wins},
               {"seeds", n_seed},
               {"a_le_b_fraction",
                static_cast<double>(wins) / static_cast<double>(n_seed)}});
    }
  }
  return report;
}

}  // namespace optikit::harness
