#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "optikit/errors.hpp"
#include "optikit/jsonutil.hpp"
#include "optikit/mlp.hpp"
#include "optikit/run.hpp"
#include "optikit/schedule.hpp"
#include "optikit/sweep.hpp"
#include "optikit/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Documented toy-problem reproduction settings (see README). The SGD lr is
// the largest round value below the curvature stability threshold at the
// minimum (2/lambda_max = 2.5e-3); the others share a base lr chosen so the
// sign-based and adaptive methods all train stably across 20 seeds.
constexpr double kFig1BaseLr = 1e-3;   // adam + s3 + signsgd
constexpr double kFig1SgdLr = 2e-3;    // sgd
constexpr double kFig1SignLr = 1e-3;   // signsgd
constexpr double kFig1Noise = 1e-3;    // gradient noise level for the comparison
constexpr long kFig1Steps = 10000;
constexpr std::uint64_t kFig1Seed = 1;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw optikit::ConfigError("cannot open config file '" + path + "'");
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw optikit::ConfigError("invalid JSON in '" + path +
                               "': " + std::string(e.what()));
  }
  return j;
}

json parse_override_value(const std::string& raw) {
  try {
    return json::parse(raw);
  } catch (const json::exception&) {
    return json(raw);  // bare strings need no quoting
  }
}

void apply_overrides(json& cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw optikit::ConfigError("--set expects key=value, got '" + s + "'");
    }
    const std::string path = s.substr(0, eq);
    const json value = parse_override_value(s.substr(eq + 1));
    json* node = &cfg;
    std::size_t pos = 0;
    for (;;) {
      const auto dot = path.find('.', pos);
      const std::string key =
          path.substr(pos, dot == std::string::npos ? std::string::npos
                                                    : dot - pos);
      if (key.empty()) {
        throw optikit::ConfigError("--set key '" + path +
                                   "' has an empty path segment");
      }
      if (dot == std::string::npos) {
        (*node)[key] = value;
        break;
      }
      json& child = (*node)[key];
      if (!child.is_object() && !child.is_null()) {
        throw optikit::ConfigError("--set key '" + path +
                                   "' descends into a non-object value");
      }
      node = &child;
      pos = dot + 1;
    }
  }
}

std::string resolve_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("OPTIKIT_OUT"); env && *env) return env;
  return ".";
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "."
                                                    : path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  out << content;
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Subcommand bodies.
// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& out_flag,
              const std::vector<std::string>& sets, bool seed_set,
              std::uint64_t seed) {
  json cfg = load_json_file(config_path);
  apply_overrides(cfg, sets);
  if (seed_set) cfg["seed"] = seed;
  const optikit::harness::RunConfig rc = optikit::harness::parse_run_config(cfg);
  const optikit::harness::RunRecord rec = optikit::harness::run(rc);

  const fs::path out_dir = resolve_out_dir(out_flag);
  fs::create_directories(out_dir);
  write_file(out_dir / "run.jsonl", optikit::harness::stats_jsonl(rec.stats));
  write_file(out_dir / "run.csv", optikit::harness::stats_csv(rec.stats));
  write_file(out_dir / "summary.json",
             pretty(optikit::harness::summary_json(rec)));

  if (rc.problem_name == "mlp") {
    const optikit::problems::MlpSpec spec = optikit::problems::parse_mlp_spec(
        rc.problem_options, "problem 'mlp' options");
    optikit::ParamVector p0;
    if (rc.x0.has_value()) {
      p0 = *rc.x0;
    } else {
      optikit::RngStream rng(rc.seed);
      p0 = optikit::problems::init_params(spec, rng);
    }
    std::string csv = "layer,grad_l2\n";
    for (const auto& row : optikit::problems::heterogeneity_report(spec, p0)) {
      csv += row.layer;
      csv += ',';
      csv += optikit::harness::format_double(row.norm);
      csv += '\n';
    }
    write_file(out_dir / "heterogeneity.csv", csv);
  }

  const bool diverged = rec.status == optikit::harness::RunStatus::Diverged;
  std::cout << "train: status="
            << (diverged ? "diverged" : "completed") << " steps="
            << rec.stats.size() << " spikes=" << rec.spikes.size()
            << " out=" << out_dir.string() << "\n";
  if (diverged) {
    std::cerr << "run diverged at step " << rec.diverged_step
              << " (partial record written)\n";
    return 3;
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_flag,
              const std::vector<std::string>& sets, bool jobs_set, long jobs) {
  json cfg = load_json_file(config_path);
  apply_overrides(cfg, sets);
  if (jobs_set) cfg["jobs"] = jobs;
  const optikit::harness::SweepConfig sc =
      optikit::harness::parse_sweep_config(cfg);
  const json report = optikit::harness::run_sweep(sc);

  const fs::path out_dir = resolve_out_dir(out_flag);
  write_file(out_dir / "sweep_report.json", pretty(report));
  for (const auto& entry : report.at("optimizers")) {
    std::cout << "sweep: " << entry.at("label").get<std::string>()
              << " median_final_loss=" << entry.at("median_final_loss").dump()
              << " divergences=" << entry.at("divergences").dump()
              << " total_spikes=" << entry.at("total_spikes").dump() << "\n";
  }
  std::cout << "sweep: report=" << (out_dir / "sweep_report.json").string()
            << "\n";
  return 0;
}

int cmd_verify(const std::string& theorem_id, const std::string& config_path,
               const std::string& out_flag,
               const std::vector<std::string>& sets) {
  json grid = config_path.empty() ? json::object()
                                  : load_json_file(config_path);
  apply_overrides(grid, sets);

  optikit::theory::TheoremReport report;
  if (theorem_id == "t1") {
    report = optikit::theory::verify_t1(grid);
  } else if (theorem_id == "t2") {
    report = optikit::theory::verify_t2(grid);
  } else if (theorem_id == "t3") {
    report = optikit::theory::verify_t3(grid);
  } else if (theorem_id == "t4") {
    report = optikit::theory::verify_t4(grid);
  } else {
    throw optikit::ConfigError("unknown theorem id '" + theorem_id +
                               "'; valid ids: t1, t2, t3, t4");
  }
  const json j = optikit::theory::report_to_json(report);
  const fs::path out_dir = resolve_out_dir(out_flag);
  write_file(out_dir / ("verify_" + theorem_id + ".json"), pretty(j));
  std::cout << pretty(j);
  return report.pass ? 0 : 4;
}

int cmd_adversarial(const std::string& out_flag,
                    const std::vector<std::string>& sets) {
  json cfg{{"beta1", 0.9}, {"beta2", 0.999}, {"steps", 6000},
           {"renorm_every", 500}};
  apply_overrides(cfg, sets);
  optikit::check_keys(cfg, {"beta1", "beta2", "steps", "renorm_every"},
                      "adversarial config");
  const auto rep = optikit::theory::run_adversarial_adam(
      cfg.at("beta1").get<double>(), cfg.at("beta2").get<double>(),
      cfg.at("steps").get<long>(), cfg.at("renorm_every").get<long>());
  const json j{{"beta1", rep.beta1},
               {"beta2", rep.beta2},
               {"steps", rep.steps},
               {"sup_ratio", rep.sup_ratio},
               {"sup_step", rep.sup_step},
               {"asymptotic_bound", rep.asymptotic_bound},
               {"max_bound_violation", rep.max_bound_violation},
               {"nondecreasing", rep.nondecreasing}};
  const fs::path out_dir = resolve_out_dir(out_flag);
  write_file(out_dir / "adversarial.json", pretty(j));
  std::cout << pretty(j);
  return 0;
}

int cmd_bound(const std::vector<std::string>& sets) {
  json cfg{{"kind", "adam"}};
  apply_overrides(cfg, sets);
  const std::string kind =
      optikit::get_field<std::string>(cfg, "kind", "bound config");
  json out{{"kind", kind}};
  if (kind == "adam") {
    optikit::check_keys(cfg, {"kind", "beta1", "beta2", "t"}, "bound config");
    const double b1 =
        optikit::get_field_or<double>(cfg, "beta1", "bound config", 0.9);
    const double b2 =
        optikit::get_field_or<double>(cfg, "beta2", "bound config", 0.999);
    out["beta1"] = b1;
    out["beta2"] = b2;
    if (cfg.contains("t")) {
      const long t = cfg.at("t").get<long>();
      out["t"] = t;
      out["value"] = optikit::theory::adam_ratio_bound(b1, b2, t);
    } else {
      out["value"] = optikit::theory::adam_ratio_bound(b1, b2);
    }
  } else if (kind == "s3") {
    optikit::check_keys(cfg, {"kind", "beta1", "beta2", "p"}, "bound config");
    const double b1 =
        optikit::get_field_or<double>(cfg, "beta1", "bound config", 0.95);
    const double b2 =
        optikit::get_field_or<double>(cfg, "beta2", "bound config", 0.95);
    const double p =
        optikit::get_field_or<double>(cfg, "p", "bound config", 3.0);
    out["beta1"] = b1;
    out["beta2"] = b2;
    out["p"] = p;
    out["value"] = optikit::theory::s3_ratio_bound(b1, b2, p);
  } else if (kind == "convergence") {
    optikit::check_keys(cfg,
                        {"kind", "L0", "L1", "R", "sigma", "F_gap",
                         "grad1_norm", "d", "U_max", "T"},
                        "bound config");
    optikit::theory::ConvergenceBudget b;
    b.L0 = optikit::get_field_or<double>(cfg, "L0", "bound config", b.L0);
    b.L1 = optikit::get_field_or<double>(cfg, "L1", "bound config", b.L1);
    b.R = optikit::get_field_or<double>(cfg, "R", "bound config", b.R);
    b.sigma =
        optikit::get_field_or<double>(cfg, "sigma", "bound config", b.sigma);
    b.F_gap =
        optikit::get_field_or<double>(cfg, "F_gap", "bound config", b.F_gap);
    b.grad1_norm = optikit::get_field_or<double>(cfg, "grad1_norm",
                                                 "bound config", b.grad1_norm);
    b.d = optikit::get_field_or<long>(cfg, "d", "bound config", b.d);
    b.U_max =
        optikit::get_field_or<double>(cfg, "U_max", "bound config", b.U_max);
    b.T = optikit::get_field_or<long>(cfg, "T", "bound config", b.T);
    const auto rep = optikit::theory::convergence_bound_terms(b);
    out["terms"] = json{{"init_gap", rep.term_init_gap},
                        {"grad1", rep.term_grad1},
                        {"noise", rep.term_noise},
                        {"beta", rep.term_beta},
                        {"tail", rep.term_tail}};
    out["value"] = rep.total;
    out["t_threshold"] = rep.t_threshold;
    out["in_regime"] = rep.in_regime;
    out["beta"] = b.beta();
    out["gamma"] = b.gamma();
  } else {
    throw optikit::ConfigError(
        "unknown bound kind '" + kind +
        "'; valid kinds: adam, s3, convergence");
  }
  std::cout << pretty(out);
  return 0;
}

int cmd_schedule_dump(const std::string& config_path,
                      const std::string& out_flag,
                      const std::vector<std::string>& sets) {
  json cfg = config_path.empty() ? json::object()
                                 : load_json_file(config_path);
  apply_overrides(cfg, sets);
  if (cfg.empty()) {
    throw optikit::ConfigError(
        "schedule-dump needs a schedule (via --config or --set)");
  }
  const optikit::harness::Schedule s = optikit::harness::parse_schedule(
      cfg, "schedule config", cfg.contains("total_steps")
                                  ? cfg.at("total_steps").get<long>()
                                  : 1000);
  std::string csv = "step,lr\n";
  for (long t = 0; t <= s.total_steps; ++t) {
    csv += std::to_string(t);
    csv += ',';
    csv += optikit::harness::format_double(optikit::harness::lr_at(s, t));
    csv += '\n';
  }
  const fs::path out_dir = resolve_out_dir(out_flag);
  write_file(out_dir / "schedule.csv", csv);
  std::cout << "schedule-dump: wrote "
            << (out_dir / "schedule.csv").string() << " (" << s.total_steps + 1
            << " rows)\n";
  return 0;
}

json fig1_run_config(const std::string& kind, double lr, std::uint64_t seed) {
  json optimizer;
  if (kind == "sgd") {
    optimizer = json{{"kind", "sgd"}};
  } else if (kind == "signsgd") {
    optimizer = json{{"kind", "signsgd"}};
  } else if (kind == "adam") {
    optimizer = json{{"kind", "adam"}};
  } else {
    optimizer = json{{"kind", "s3"}, {"beta", 0.95}, {"p", 3.0}};
  }
  return json{{"problem", json{{"name", "fig1"}, {"noise_sigma", kFig1Noise}}},
              {"optimizer", optimizer},
              {"schedule", json{{"kind", "constant"}, {"peak_lr", lr}}},
              {"seed", seed},
              {"steps", kFig1Steps},
              {"record_trajectory", true}};
}

int cmd_fig1(const std::string& out_flag, bool seed_set, std::uint64_t seed) {
  const std::uint64_t use_seed = seed_set ? seed : kFig1Seed;
  const fs::path out_dir = resolve_out_dir(out_flag);
  fs::create_directories(out_dir);

  const std::vector<std::pair<std::string, double>> setups = {
      {"sgd", kFig1SgdLr},
      {"signsgd", kFig1SignLr},
      {"adam", kFig1BaseLr},
      {"s3", kFig1BaseLr},
  };
  json sidecar;
  sidecar["runs"] = json::object();
  for (const auto& [kind, lr] : setups) {
    const json cfg = fig1_run_config(kind, lr, use_seed);
    const optikit::harness::RunRecord rec = optikit::harness::run(cfg);

    std::string csv = "step,x1,x2,loss,mean_update\n";
    for (std::size_t i = 0; i < rec.stats.size(); ++i) {
      const auto& st = rec.stats[i];
      const auto& x = rec.trajectory[i];
      csv += std::to_string(st.step);
      csv += ',';
      csv += optikit::harness::format_double(x[0]);
      csv += ',';
      csv += optikit::harness::format_double(x[1]);
      csv += ',';
      csv += optikit::harness::format_double(st.loss);
      csv += ',';
      csv += optikit::harness::format_double(st.mean_update);
      csv += '\n';
    }
    write_file(out_dir / (kind + ".csv"), csv);

    json meta;
    meta["config"] = rec.config;
    meta["status"] = rec.status == optikit::harness::RunStatus::Completed
                         ? "completed"
                         : "diverged";
    meta["final_params_digest"] = rec.final_params_digest;
    meta["spike_count"] = rec.spikes.size();
    sidecar["runs"][kind] = meta;
    std::cout << "fig1: wrote " << (out_dir / (kind + ".csv")).string()
              << " (" << rec.stats.size() << " rows, " << meta["status"].dump()
              << ")\n";
  }
  write_file(out_dir / "fig1_config.json", pretty(sidecar));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "optikit: a sign-like-optimizer laboratory with theorem verification "
      "grids, baselines, and a deterministic run harness"};
  app.require_subcommand(1);

  std::function<int()> action;

  // Shared flag storage (each subcommand binds its own copies).
  struct Common {
    std::string config;
    std::string out;
    std::vector<std::string> sets;
  };

  auto add_common = [](CLI::App* cmd, Common& c, bool config_required) {
    auto* opt = cmd->add_option("--config", c.config, "JSON config file");
    if (config_required) opt->required();
    cmd->add_option("--out", c.out,
                    "output directory (default: $OPTIKIT_OUT or '.')");
    cmd->add_option("--set", c.sets,
                    "dotted-path config override key=value (repeatable)");
  };

  // train
  auto train_c = std::make_shared<Common>();
  auto train_seed = std::make_shared<std::uint64_t>(0);
  auto* train = app.add_subcommand("train", "run one training configuration");
  add_common(train, *train_c, true);
  auto* train_seed_opt =
      train->add_option("--seed", *train_seed, "override the config seed");
  train->callback([train_c, train_seed, train_seed_opt, &action]() {
    action = [=]() {
      return cmd_train(train_c->config, train_c->out, train_c->sets,
                       train_seed_opt->count() > 0, *train_seed);
    };
  });

  // sweep
  auto sweep_c = std::make_shared<Common>();
  auto sweep_jobs = std::make_shared<long>(0);
  auto* sweep = app.add_subcommand(
      "sweep", "run a seed x optimizer grid and compare outcomes");
  add_common(sweep, *sweep_c, true);
  auto* sweep_jobs_opt =
      sweep->add_option("--jobs", *sweep_jobs, "worker thread count");
  sweep->callback([sweep_c, sweep_jobs, sweep_jobs_opt, &action]() {
    action = [=]() {
      return cmd_sweep(sweep_c->config, sweep_c->out, sweep_c->sets,
                       sweep_jobs_opt->count() > 0, *sweep_jobs);
    };
  });

  // verify
  auto verify_c = std::make_shared<Common>();
  auto verify_id = std::make_shared<std::string>();
  auto* verify = app.add_subcommand(
      "verify", "run a theorem verification grid (ids: t1, t2, t3, t4)");
  verify->add_option("id", *verify_id, "theorem id")->required();
  add_common(verify, *verify_c, false);
  verify->callback([verify_c, verify_id, &action]() {
    action = [=]() {
      return cmd_verify(*verify_id, verify_c->config, verify_c->out,
                        verify_c->sets);
    };
  });

  // adversarial
  auto adv_c = std::make_shared<Common>();
  auto* adv = app.add_subcommand(
      "adversarial",
      "drive the worst-case gradient stream through the adaptive-moment "
      "update and report the realized ratio");
  add_common(adv, *adv_c, false);
  adv->callback([adv_c, &action]() {
    action = [=]() { return cmd_adversarial(adv_c->out, adv_c->sets); };
  });

  // bound
  auto bound_c = std::make_shared<Common>();
  auto* bound = app.add_subcommand(
      "bound", "evaluate a theoretical bound (kind=adam|s3|convergence)");
  bound->add_option("--set", bound_c->sets,
                    "dotted-path config override key=value (repeatable)");
  bound->callback([bound_c, &action]() {
    action = [=]() { return cmd_bound(bound_c->sets); };
  });

  // schedule-dump
  auto sched_c = std::make_shared<Common>();
  auto* sched = app.add_subcommand("schedule-dump",
                                   "write the lr table for a schedule");
  add_common(sched, *sched_c, false);
  sched->callback([sched_c, &action]() {
    action = [=]() {
      return cmd_schedule_dump(sched_c->config, sched_c->out, sched_c->sets);
    };
  });

  // fig1
  auto fig1_c = std::make_shared<Common>();
  auto fig1_seed = std::make_shared<std::uint64_t>(0);
  auto* fig1 = app.add_subcommand(
      "fig1", "emit the four-optimizer toy-problem trajectory CSVs");
  fig1->add_option("--out", fig1_c->out,
                   "output directory (default: $OPTIKIT_OUT or '.')");
  auto* fig1_seed_opt =
      fig1->add_option("--seed", *fig1_seed, "trajectory seed (default 1)");
  fig1->callback([fig1_c, fig1_seed, fig1_seed_opt, &action]() {
    action = [=]() {
      return cmd_fig1(fig1_c->out, fig1_seed_opt->count() > 0, *fig1_seed);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return action ? action() : 2;
  } catch (const optikit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const optikit::DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
