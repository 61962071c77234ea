#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "optikit/errors.hpp"
#include "optikit/run.hpp"
#include "optikit/schedule.hpp"
#include "optikit/sweep.hpp"
#include "optikit/telemetry.hpp"
#include "optikit/theory.hpp"

using namespace optikit;
using namespace optikit::harness;
using nlohmann::json;

namespace {

json base_valley_config(const json& optimizer, double lr, long steps,
                        std::uint64_t seed) {
  return json{{"problem", json{{"name", "fig1"}, {"noise_sigma", 0.001}}},
              {"optimizer", optimizer},
              {"schedule", json{{"kind", "constant"}, {"peak_lr", lr}}},
              {"steps", steps},
              {"seed", seed}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Learning-rate schedule.
// ---------------------------------------------------------------------------

TEST_CASE("constant schedule holds its peak over the whole run") {
  Schedule s;
  s.kind = Schedule::Kind::Constant;
  s.peak_lr = 3e-3;
  s.total_steps = 100;
  for (long t : {0L, 1L, 50L, 100L}) CHECK(lr_at(s, t) == 3e-3);
  CHECK_THROWS_AS(lr_at(s, 101), std::invalid_argument);
  CHECK_THROWS_AS(lr_at(s, -1), std::invalid_argument);
}

TEST_CASE("warmup ramp is linear and the decay is cosine") {
  Schedule s;
  s.kind = Schedule::Kind::WarmupCosine;
  s.peak_lr = 6e-3;
  s.warmup_steps = 30;
  s.total_steps = 150;
  s.floor_fraction = 0.0;
  CHECK(lr_at(s, 0) == 0.0);
  CHECK(lr_at(s, 15) == doctest::Approx(3e-3).epsilon(1e-15));
  CHECK(lr_at(s, 30) == 6e-3);
  // cosine midpoint: halfway through the decay the lr is peak*(1+floor)/2
  CHECK(lr_at(s, 30 + 60) == doctest::Approx(3e-3).epsilon(1e-12));
  CHECK(lr_at(s, 150) <= 1e-18);  // cosine lands on the floor (0 here)

  s.floor_fraction = 0.1;
  CHECK(lr_at(s, 150) == doctest::Approx(0.1 * 6e-3).epsilon(1e-12));
  CHECK(lr_at(s, 90) ==
        doctest::Approx(6e-3 * (1.0 + 0.1) / 2.0).epsilon(1e-12));
}

TEST_CASE("schedule validation catches inconsistent fields") {
  Schedule s;
  s.peak_lr = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.peak_lr = 1e-3;
  s.warmup_steps = 10;
  s.total_steps = 10;  // must exceed warmup
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.total_steps = 20;
  s.floor_fraction = 1.5;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("schedule parsing is strict about keys and kinds") {
  CHECK_THROWS_AS(
      parse_schedule(json{{"kind", "linear"}, {"peak_lr", 1e-3}}, "s", 10),
      ConfigError);
  CHECK_THROWS_AS(
      parse_schedule(json{{"peak_lr", 1e-3}, {"bogus", 1}}, "s", 10),
      ConfigError);
  const Schedule s =
      parse_schedule(json{{"peak_lr", 2e-3}}, "s", 500);  // kind defaults
  CHECK(s.kind == Schedule::Kind::Constant);
  CHECK(s.total_steps == 500);
}

TEST_CASE("weight-decay coupling keeps lr times wd constant") {
  CHECK(coupled_weight_decay(3e-4, 0.1, 3e-3) ==
        doctest::Approx(0.01).epsilon(1e-15));
  CHECK(coupled_weight_decay(3e-4, 0.1, 3e-4) ==
        doctest::Approx(0.1).epsilon(1e-15));  // identity point
  const double full = coupled_weight_decay(1e-3, 0.2, 1e-2);
  const double halved = coupled_weight_decay(1e-3, 0.2, 5e-3);
  CHECK(halved == doctest::Approx(2.0 * full).epsilon(1e-15));
  CHECK_THROWS_AS(coupled_weight_decay(1e-3, 0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(coupled_weight_decay(-1e-3, 0.1, 1e-3),
                  std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Spike detection.
// ---------------------------------------------------------------------------

TEST_CASE("monotone decreasing series has no spikes") {
  std::vector<double> losses, updates;
  for (int i = 0; i < 200; ++i) {
    losses.push_back(100.0 / (1.0 + i));
    updates.push_back(0.5);
  }
  CHECK(detect_spikes(losses, updates, 100, 2.0).empty());
}

TEST_CASE("flat series with one tenfold point yields exactly one event") {
  std::vector<double> losses(200, 1.0), updates(200, 0.1);
  losses[150] = 10.0;
  updates[149] = 0.9;  // inside the lookback window of the spike
  const auto events = detect_spikes(losses, updates, 100, 2.0);
  REQUIRE(events.size() == 1);
  CHECK(events[0].step == 151);  // reported 1-indexed
  CHECK(events[0].loss_before == 1.0);
  CHECK(events[0].loss_at == 10.0);
  CHECK(events[0].ratio == 10.0);
  CHECK(events[0].preceding_max_update == 0.9);
}

TEST_CASE("detector is invariant under positive rescaling of the loss") {
  std::vector<double> losses, updates(300, 0.1);
  for (int i = 0; i < 300; ++i) {
    losses.push_back(2.0 + std::sin(i * 0.7));
  }
  losses[250] = 30.0;
  const auto base = detect_spikes(losses, updates, 100, 2.0);
  std::vector<double> scaled = losses;
  for (auto& v : scaled) v *= 1e6;
  const auto big = detect_spikes(scaled, updates, 100, 2.0);
  REQUIRE(base.size() == big.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(base[i].step == big[i].step);
    CHECK(base[i].ratio == doctest::Approx(big[i].ratio).epsilon(1e-12));
  }
}

TEST_CASE("detector enforces its parameter preconditions") {
  const std::vector<double> flat(50, 1.0);
  CHECK_THROWS_AS(detect_spikes(flat, flat, 7, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(detect_spikes(flat, flat, 100, 1.0), std::invalid_argument);
  CHECK(detect_spikes(flat, flat, 100, 2.0).empty());  // shorter than window
  const std::vector<double> other(49, 1.0);
  CHECK_THROWS_AS(detect_spikes(flat, other, 8, 2.0), std::invalid_argument);
}

TEST_CASE("windows with a nonpositive median are skipped") {
  std::vector<double> losses(120, 0.0), updates(120, 0.0);
  losses[110] = 5.0;  // median of the preceding window is 0: no ratio exists
  CHECK(detect_spikes(losses, updates, 100, 2.0).empty());
}

// ---------------------------------------------------------------------------
// Run configs.
// ---------------------------------------------------------------------------

TEST_CASE("run config parsing fills defaults and echoes them") {
  const json cfg = base_valley_config(json{{"kind", "adamw"}}, 1e-3, 50, 9);
  const RunConfig rc = parse_run_config(cfg);
  CHECK(rc.problem_name == "fig1");
  CHECK(rc.optimizer.at("weight_decay") == 0.1);  // adamw default
  CHECK(rc.optimizer.at("beta1") == 0.9);
  CHECK(rc.optimizer.at("epsilon") == 1e-8);
  CHECK(rc.seed == 9);
  CHECK(rc.spike_window == 100);
  CHECK(rc.spike_threshold == 2.0);
  CHECK(rc.normalized.at("optimizer").at("weight_decay") == 0.1);
  CHECK(rc.normalized.at("schedule").at("total_steps") == 50);
}

TEST_CASE("run config rejects unknown keys and bad hypers") {
  json cfg = base_valley_config(json{{"kind", "s3"}}, 1e-3, 10, 1);
  cfg["verbose"] = true;
  CHECK_THROWS_WITH_AS(parse_run_config(cfg), doctest::Contains("unknown key"),
                       ConfigError);

  json bad_p = base_valley_config(json{{"kind", "s3"}, {"p", 0.5}}, 1e-3, 10, 1);
  CHECK_THROWS_WITH_AS(parse_run_config(bad_p),
                       doctest::Contains("p within [1, +∞)"), ConfigError);

  json bad_kind = base_valley_config(json{{"kind", "adagrad"}}, 1e-3, 10, 1);
  CHECK_THROWS_WITH_AS(parse_run_config(bad_kind),
                       doctest::Contains("unknown optimizer kind"),
                       ConfigError);

  json no_sched = base_valley_config(json{{"kind", "sgd"}}, 1e-3, 10, 1);
  no_sched.erase("schedule");
  CHECK_THROWS_AS(parse_run_config(no_sched), ConfigError);

  json both_wd = base_valley_config(
      json{{"kind", "s3"},
           {"weight_decay", 0.1},
           {"coupled_wd", json{{"lr_adam", 1e-3}, {"wd_adam", 0.1}}}},
      1e-3, 10, 1);
  CHECK_THROWS_WITH_AS(parse_run_config(both_wd),
                       doctest::Contains("mutually exclusive"), ConfigError);
}

TEST_CASE("coupled weight decay resolves against the peak lr") {
  const json cfg = base_valley_config(
      json{{"kind", "s3"},
           {"coupled_wd", json{{"lr_adam", 3e-4}, {"wd_adam", 0.1}}}},
      3e-3, 10, 1);
  const RunConfig rc = parse_run_config(cfg);
  CHECK(rc.optimizer.at("weight_decay").get<double>() ==
        doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("short schedules cannot cover longer runs") {
  json cfg = base_valley_config(json{{"kind", "sgd"}}, 1e-3, 100, 1);
  cfg["schedule"]["total_steps"] = 50;
  cfg["schedule"]["kind"] = "warmup_cosine";
  cfg["schedule"]["warmup_steps"] = 5;
  CHECK_THROWS_WITH_AS(parse_run_config(cfg),
                       doctest::Contains("total_steps"), ConfigError);
}

// ---------------------------------------------------------------------------
// The run loop.
// ---------------------------------------------------------------------------

TEST_CASE("soft-sign run telemetry stays within the unit bound") {
  const json cfg = base_valley_config(
      json{{"kind", "s3"}, {"beta", 0.95}, {"p", 3.0}}, 1e-3, 2000, 4);
  const RunRecord rec = run(cfg);
  REQUIRE(rec.status == RunStatus::Completed);
  REQUIRE(rec.stats.size() == 2000);
  for (const auto& st : rec.stats) {
    CHECK(st.max_update <= 1.0 + 1e-12);
    CHECK(st.min_update <= st.mean_update);
    CHECK(st.mean_update <= st.max_update);
  }
}

TEST_CASE("sign-descent telemetry reports unit mean updates") {
  const json cfg = base_valley_config(json{{"kind", "signsgd"}}, 1e-3, 300, 5);
  const RunRecord rec = run(cfg);
  REQUIRE(rec.status == RunStatus::Completed);
  for (const auto& st : rec.stats) CHECK(st.mean_update == 1.0);
}

TEST_CASE("adaptive-moment telemetry respects the per-step ratio bound") {
  const json cfg = base_valley_config(
      json{{"kind", "adam"}, {"epsilon", 0.0}}, 1e-2, 2000, 6);
  const RunRecord rec = run(cfg);
  REQUIRE(rec.status == RunStatus::Completed);
  for (const auto& st : rec.stats) {
    CHECK(st.max_update <=
          theory::adam_ratio_bound(0.9, 0.999, st.step) + 1e-12);
  }
}

TEST_CASE("step stats are sequenced and carry the schedule lr") {
  json cfg = base_valley_config(json{{"kind", "sgd"}}, 1e-3, 40, 2);
  cfg["schedule"] = json{{"kind", "warmup_cosine"},
                         {"peak_lr", 1e-3},
                         {"warmup_steps", 10},
                         {"total_steps", 40}};
  const RunRecord rec = run(cfg);
  const RunConfig rc = parse_run_config(cfg);
  REQUIRE(rec.stats.size() == 40);
  for (std::size_t i = 0; i < rec.stats.size(); ++i) {
    CHECK(rec.stats[i].step == static_cast<long>(i) + 1);
    CHECK(rec.stats[i].lr == lr_at(rc.schedule, static_cast<long>(i)));
  }
}

TEST_CASE("infinitesimal steps never increase a noiseless bowl") {
  const std::vector<json> opts = {json{{"kind", "sgd"}}, json{{"kind", "s3"}},
                                  json{{"kind", "adam"}},
                                  json{{"kind", "nag"}}};
  for (const json& opt : opts) {
    json cfg{{"problem", json{{"name", "quadratic"}}},
             {"optimizer", opt},
             {"schedule", json{{"kind", "constant"}, {"peak_lr", 1e-6}}},
             {"steps", 500},
             {"seed", 1}};
    const RunRecord rec = run(cfg);
    REQUIRE(rec.status == RunStatus::Completed);
    for (std::size_t i = 1; i < rec.stats.size(); ++i) {
      CHECK(rec.stats[i].loss <= rec.stats[i - 1].loss + 1e-15);
    }
  }
}

TEST_CASE("runaway runs end with a diverged status and a partial record") {
  const json cfg{{"problem", json{{"name", "quartic"}}},
                 {"optimizer", json{{"kind", "sgd"}}},
                 {"schedule", json{{"kind", "constant"}, {"peak_lr", 1e6}}},
                 {"steps", 100},
                 {"seed", 1}};
  const RunRecord rec = run(cfg);
  CHECK(rec.status == RunStatus::Diverged);
  CHECK(rec.diverged_step >= 1);
  CHECK(rec.diverged_step <= 100);
  CHECK(rec.stats.size() < 100);
  CHECK_FALSE(rec.final_loss.has_value());
}

TEST_CASE("starting on the pole is a domain error, not a crash") {
  json cfg = base_valley_config(json{{"kind", "sgd"}}, 1e-3, 10, 1);
  cfg["x0"] = ParamVector{1.0, 0.0};
  const RunRecord rec = run(cfg);
  CHECK(rec.status == RunStatus::Diverged);
  CHECK(rec.diverged_step == 1);
  CHECK(rec.stats.empty());
}

TEST_CASE("explicit starting points must match the problem dimension") {
  json cfg = base_valley_config(json{{"kind", "sgd"}}, 1e-3, 10, 1);
  cfg["x0"] = ParamVector{1.0, 2.0, 3.0};
  CHECK_THROWS_WITH_AS(run(cfg), doctest::Contains("dim"), ConfigError);
}

TEST_CASE("gradient clipping caps the recorded gradient norm") {
  json cfg = base_valley_config(json{{"kind", "sgd"}}, 1e-4, 200, 3);
  cfg["grad_clip"] = 1.0;
  const RunRecord rec = run(cfg);
  REQUIRE(rec.status == RunStatus::Completed);
  for (const auto& st : rec.stats) CHECK(st.grad_l2 <= 1.0 + 1e-12);
  // the start point has gradient norm ~380, so clipping must be active
  CHECK(rec.stats.front().grad_l2 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("trajectory recording captures pre-update iterates") {
  json cfg = base_valley_config(json{{"kind", "sgd"}}, 1e-4, 20, 3);
  cfg["record_trajectory"] = true;
  const RunRecord rec = run(cfg);
  REQUIRE(rec.trajectory.size() == 20);
  CHECK(rec.trajectory.front() == ParamVector{1.0, 1.0});
  CHECK(rec.trajectory.back() != rec.final_params);
}

// ---------------------------------------------------------------------------
// Determinism and persistence.
// ---------------------------------------------------------------------------

TEST_CASE("identical configs replay to byte-identical records") {
  const json cfg = base_valley_config(
      json{{"kind", "s3"}, {"beta", 0.95}, {"p", 3.0}}, 1e-3, 500, 77);
  const RunRecord a = run(cfg);
  const RunRecord b = run(cfg);
  CHECK(stats_jsonl(a.stats) == stats_jsonl(b.stats));
  CHECK(stats_csv(a.stats) == stats_csv(b.stats));
  CHECK(a.final_params_digest == b.final_params_digest);
  CHECK(summary_json(a) == summary_json(b));

  json other = cfg;
  other["seed"] = 78;
  CHECK(run(other).final_params_digest != a.final_params_digest);
}

TEST_CASE("replaying a record's own normalized config is bitwise stable") {
  const json cfg = base_valley_config(
      json{{"kind", "adam"}}, 1e-3, 300, 12);
  const RunRecord a = run(cfg);
  const RunRecord b = run(a.config);  // normalized echo
  CHECK(stats_jsonl(a.stats) == stats_jsonl(b.stats));
  CHECK(a.final_params_digest == b.final_params_digest);
}

TEST_CASE("float formatting round-trips exactly") {
  RngStream rng(88);
  for (int i = 0; i < 1000; ++i) {
    const double v = (rng.next_unit() - 0.5) * std::pow(10.0, i % 40 - 20.0);
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("jsonl lines keep a fixed key order") {
  StepStats st;
  st.step = 3;
  st.loss = 1.5;
  st.mean_update = 0.25;
  st.max_update = 0.5;
  st.min_update = 0.1;
  st.grad_l2 = 2.0;
  st.lr = 1e-3;
  const std::string line = stats_jsonl({st});
  CHECK(line ==
        "{\"step\":3,\"loss\":1.5,\"mean_update\":0.25,\"max_update\":0.5,"
        "\"min_update\":0.1,\"grad_l2\":2,\"lr\":0.001}\n");
  CHECK(stats_csv({st}) ==
        "step,loss,mean_update,max_update,min_update,grad_l2,lr\n"
        "3,1.5,0.25,0.5,0.1,2,0.001\n");
}

TEST_CASE("parameter digests are stable and content-sensitive") {
  CHECK(fnv1a_digest({}) == "cbf29ce484222325");
  CHECK(fnv1a_digest({1.0}) == "aab1693229ba1db8");
  CHECK(fnv1a_digest({1.0, 2.0}) == "2f121cea1c5c97f8");
  CHECK(fnv1a_digest({0.0}) != fnv1a_digest({-0.0}));  // bit-level, not value
}

TEST_CASE("run summaries expose the record fields") {
  const json cfg = base_valley_config(json{{"kind", "sgd"}}, 1e-3, 150, 2);
  const RunRecord rec = run(cfg);
  const json s = summary_json(rec);
  CHECK(s.at("status") == "completed");
  CHECK(s.at("steps_executed") == 150);
  CHECK(s.at("final_params_digest") == rec.final_params_digest);
  CHECK(s.at("diverged_step").is_null());
  CHECK(s.at("final_loss").is_number());
  CHECK(s.at("config") == rec.config);
}

// ---------------------------------------------------------------------------
// Sweeps.
// ---------------------------------------------------------------------------

TEST_CASE("sweep config parsing validates shape and labels") {
  json cfg{{"base", base_valley_config(json{{"kind", "sgd"}}, 1e-3, 20, 1)},
           {"seeds", json{{"count", 3}}},
           {"optimizers", json::array({json{{"kind", "sgd"}},
                                       json{{"kind", "signsgd"}}})}};
  cfg["base"].erase("optimizer");
  cfg["base"].erase("seed");
  const SweepConfig sc = parse_sweep_config(cfg);
  CHECK(sc.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(sc.labels == std::vector<std::string>{"sgd", "signsgd"});

  json dup = cfg;
  dup["optimizers"] = json::array(
      {json{{"kind", "sgd"}, {"label", "a"}}, json{{"kind", "signsgd"}, {"label", "a"}}});
  CHECK_THROWS_WITH_AS(parse_sweep_config(dup), doctest::Contains("label"),
                       ConfigError);

  json with_opt = cfg;
  with_opt["base"]["optimizer"] = json{{"kind", "sgd"}};
  CHECK_THROWS_AS(parse_sweep_config(with_opt), ConfigError);

  json empty = cfg;
  empty["optimizers"] = json::array();
  CHECK_THROWS_AS(parse_sweep_config(empty), ConfigError);
}

TEST_CASE("sweep reports are complete and thread-count invariant") {
  json cfg{{"base", json{{"problem", json{{"name", "quadratic"},
                                          {"noise_sigma", 0.01}}},
                        {"schedule", json{{"kind", "constant"},
                                          {"peak_lr", 1e-2}}},
                        {"steps", 200}}},
           {"seeds", json{{"count", 4}}},
           {"optimizers",
            json::array({json{{"kind", "s3"}, {"beta", 0.95}, {"p", 3.0}},
                         json{{"kind", "sgd"}}})}};

  cfg["jobs"] = 1;
  json serial = run_sweep(parse_sweep_config(cfg));
  cfg["jobs"] = 4;
  json parallel = run_sweep(parse_sweep_config(cfg));
  // identical up to the echoed worker count
  serial.erase("jobs");
  parallel.erase("jobs");
  CHECK(serial == parallel);

  const auto& opts = serial.at("optimizers");
  REQUIRE(opts.size() == 2);
  for (const auto& o : opts) {
    CHECK(o.at("final_losses").size() == 4);
    CHECK(o.at("median_final_loss").is_number());
    CHECK(o.at("divergences") == 0);
    CHECK(o.at("spike_counts").size() == 4);
  }
  const auto& pairwise = serial.at("pairwise");
  REQUIRE(pairwise.size() == 2);  // both ordered pairs
  for (const auto& p : pairwise) {
    const double frac = p.at("a_le_b_fraction").get<double>();
    CHECK(frac >= 0.0);
    CHECK(frac <= 1.0);
    CHECK(p.at("seeds") == 4);
  }
}
