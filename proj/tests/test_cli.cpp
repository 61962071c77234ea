#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

// Fresh scratch directory per test case, unique across repeated runs.
fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() /
                     ("optikit_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

CmdResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path out = scratch / "stdout.txt";
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string("\"") + OPTIKIT_CLI_PATH + "\" " + args +
                          " >\"" + out.string() + "\" 2>\"" + err.string() +
                          "\"";
  const int rc = std::system(cmd.c_str());
  CmdResult r;
  if (rc >= 0 && WIFEXITED(rc)) r.exit_code = WEXITSTATUS(rc);
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

json valley_train_config(double lr, long steps) {
  return json{{"problem", json{{"name", "fig1"}, {"noise_sigma", 0.001}}},
              {"optimizer", json{{"kind", "s3"}, {"beta", 0.95}, {"p", 3.0}}},
              {"schedule", json{{"kind", "constant"}, {"peak_lr", lr}}},
              {"steps", steps},
              {"seed", 1}};
}

}  // namespace

TEST_CASE("train writes the run artifacts and exits cleanly") {
  const fs::path dir = fresh_dir("train_ok");
  write_text(dir / "cfg.json", valley_train_config(1e-3, 200).dump());
  const CmdResult r = run_cli(
      "train --config \"" + (dir / "cfg.json").string() + "\" --out \"" +
          dir.string() + "\"",
      dir);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("train: status=completed") != std::string::npos);
  REQUIRE(fs::exists(dir / "run.jsonl"));
  REQUIRE(fs::exists(dir / "run.csv"));
  REQUIRE(fs::exists(dir / "summary.json"));
  const json summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary.at("status") == "completed");
  CHECK(summary.at("steps_executed") == 200);
  CHECK(summary.at("final_loss").is_number());
  const auto csv = read_csv(dir / "run.csv");
  REQUIRE(csv.size() == 201);  // header + one row per step
  CHECK(csv[0] == std::vector<std::string>{"step", "loss", "mean_update",
                                           "max_update", "min_update",
                                           "grad_l2", "lr"});
}

TEST_CASE("train rejects invalid hyperparameters with a config error") {
  const fs::path dir = fresh_dir("train_bad_p");
  json cfg = valley_train_config(1e-3, 10);
  cfg["optimizer"]["p"] = 0.5;
  write_text(dir / "cfg.json", cfg.dump());
  const CmdResult r = run_cli(
      "train --config \"" + (dir / "cfg.json").string() + "\"", dir);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("config error") != std::string::npos);
  CHECK(r.err.find("p within [1, +") != std::string::npos);
}

TEST_CASE("train reports divergence with a partial record") {
  const fs::path dir = fresh_dir("train_div");
  const json cfg{{"problem", json{{"name", "quartic"}}},
                 {"optimizer", json{{"kind", "sgd"}}},
                 {"schedule", json{{"kind", "constant"}, {"peak_lr", 1e6}}},
                 {"steps", 50},
                 {"seed", 1}};
  write_text(dir / "cfg.json", cfg.dump());
  const CmdResult r = run_cli(
      "train --config \"" + (dir / "cfg.json").string() + "\" --out \"" +
          dir.string() + "\"",
      dir);
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("partial record written") != std::string::npos);
  const json summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary.at("status") == "diverged");
  CHECK(summary.at("diverged_step").is_number());
  CHECK(read_csv(dir / "run.csv").size() < 51);
}

TEST_CASE("train honors --seed and dotted --set overrides") {
  const fs::path dir = fresh_dir("train_set");
  write_text(dir / "cfg.json", valley_train_config(1e-3, 20).dump());
  const CmdResult r = run_cli(
      "train --config \"" + (dir / "cfg.json").string() + "\" --out \"" +
          dir.string() + "\" --seed 7 --set optimizer.beta=0.9" +
          " --set problem.noise_sigma=0.01",
      dir);
  REQUIRE(r.exit_code == 0);
  const json summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary.at("config").at("seed") == 7);
  CHECK(summary.at("config").at("optimizer").at("beta") == 0.9);
  CHECK(summary.at("config").at("problem").at("noise_sigma") == 0.01);
}

TEST_CASE("train replays byte-identically for equal configs") {
  const fs::path dir = fresh_dir("train_replay");
  write_text(dir / "cfg.json", valley_train_config(1e-3, 300).dump());
  const std::string base =
      "train --config \"" + (dir / "cfg.json").string() + "\" --out \"";
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  REQUIRE(run_cli(base + (dir / "a").string() + "\"", dir).exit_code == 0);
  REQUIRE(run_cli(base + (dir / "b").string() + "\"", dir).exit_code == 0);
  CHECK(slurp(dir / "a" / "run.jsonl") == slurp(dir / "b" / "run.jsonl"));
  CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));
  REQUIRE(run_cli(base + (dir / "c").string() + "\" --seed 8", dir).exit_code ==
          0);
  CHECK(slurp(dir / "a" / "run.jsonl") != slurp(dir / "c" / "run.jsonl"));
}

TEST_CASE("classifier training emits the per-layer gradient table") {
  const fs::path dir = fresh_dir("train_mlp");
  const json cfg{{"problem", json{{"name", "mlp"}}},
                 {"optimizer", json{{"kind", "s3"}}},
                 {"schedule", json{{"kind", "constant"}, {"peak_lr", 1e-2}}},
                 {"steps", 5},
                 {"seed", 1}};
  write_text(dir / "cfg.json", cfg.dump());
  const CmdResult r = run_cli(
      "train --config \"" + (dir / "cfg.json").string() + "\" --out \"" +
          dir.string() + "\"",
      dir);
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(dir / "heterogeneity.csv"));
  const auto rows = read_csv(dir / "heterogeneity.csv");
  REQUIRE(rows.size() == 4);  // header + one row per weight matrix
  CHECK(rows[0] == std::vector<std::string>{"layer", "grad_l2"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 2);
    CHECK(std::strtod(rows[i][1].c_str(), nullptr) > 0.0);
  }
}

TEST_CASE("usage errors exit with the config status") {
  const fs::path dir = fresh_dir("usage");
  CHECK(run_cli("frobnicate", dir).exit_code == 2);
  CHECK(run_cli("train", dir).exit_code == 2);  // --config is required
  CHECK(run_cli("train --config x.json --bogus", dir).exit_code == 2);
  CHECK(run_cli("verify", dir).exit_code == 2);  // id is required
  const CmdResult missing =
      run_cli("train --config \"" + (dir / "absent.json").string() + "\"", dir);
  CHECK(missing.exit_code == 2);
  CHECK(missing.err.find("cannot open config file") != std::string::npos);
}

TEST_CASE("verify t1 writes a passing report") {
  const fs::path dir = fresh_dir("verify_t1");
  const CmdResult r =
      run_cli("verify t1 --out \"" + dir.string() + "\"", dir);
  CHECK(r.exit_code == 0);
  REQUIRE(fs::exists(dir / "verify_t1.json"));
  const json rep = json::parse(slurp(dir / "verify_t1.json"));
  CHECK(rep.at("pass") == true);
  CHECK(json::parse(r.out).at("pass") == true);  // also printed to stdout
}

TEST_CASE("verify rejects unknown theorem ids") {
  const fs::path dir = fresh_dir("verify_bad");
  const CmdResult r = run_cli("verify t9", dir);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("valid ids: t1, t2, t3, t4") != std::string::npos);
}

TEST_CASE("adversarial reports the worst-case ratio trajectory") {
  const fs::path dir = fresh_dir("adversarial");
  const CmdResult r =
      run_cli("adversarial --out \"" + dir.string() + "\"", dir);
  REQUIRE(r.exit_code == 0);
  const json rep = json::parse(slurp(dir / "adversarial.json"));
  CHECK(rep.at("steps") == 6000);
  const double sup = rep.at("sup_ratio").get<double>();
  CHECK(sup >= 7.0);
  CHECK(sup <= 7.2706);
  CHECK(rep.at("max_bound_violation").get<double>() <= 1e-9);
  CHECK(rep.at("nondecreasing") == true);
  CHECK(rep.at("asymptotic_bound").get<double>() ==
        doctest::Approx(7.270291799999695).epsilon(1e-12));
}

TEST_CASE("bound prints closed-form values") {
  const fs::path dir = fresh_dir("bound");
  const CmdResult adam = run_cli("bound", dir);
  REQUIRE(adam.exit_code == 0);
  CHECK(json::parse(adam.out).at("value").get<double>() ==
        doctest::Approx(7.270291799999695).epsilon(1e-12));

  const CmdResult at_one = run_cli("bound --set t=1", dir);
  REQUIRE(at_one.exit_code == 0);
  CHECK(json::parse(at_one.out).at("value") == 1.0);

  const CmdResult shared = run_cli("bound --set kind=s3", dir);
  REQUIRE(shared.exit_code == 0);
  CHECK(json::parse(shared.out).at("value") == 1.0);  // shared default betas

  const CmdResult budget = run_cli(
      "bound --set kind=convergence --set T=16 --set L0=1 --set L1=1 "
      "--set R=1 --set sigma=1 --set F_gap=1 --set grad1_norm=1 "
      "--set d=1 --set U_max=1",
      dir);
  REQUIRE(budget.exit_code == 0);
  const json b = json::parse(budget.out);
  CHECK(b.at("value") == 4.8828125);
  CHECK(b.at("beta") == 0.75);
  CHECK(b.at("gamma") == 0.125);

  CHECK(run_cli("bound --set kind=frob", dir).exit_code == 2);
}

TEST_CASE("schedule-dump writes the lr table") {
  const fs::path dir = fresh_dir("schedule");
  const CmdResult r = run_cli(
      "schedule-dump --out \"" + dir.string() +
          "\" --set kind=warmup_cosine --set peak_lr=6e-3 "
          "--set warmup_steps=30 --set total_steps=150",
      dir);
  REQUIRE(r.exit_code == 0);
  const auto rows = read_csv(dir / "schedule.csv");
  REQUIRE(rows.size() == 152);  // header + steps 0..150
  CHECK(rows[0] == std::vector<std::string>{"step", "lr"});
  CHECK(rows[1] == std::vector<std::string>{"0", "0"});
  CHECK(rows[16] == std::vector<std::string>{"15", "0.003"});
  CHECK(rows[31] == std::vector<std::string>{"30", "0.006"});

  CHECK(run_cli("schedule-dump", dir).exit_code == 2);  // nothing to dump
}

TEST_CASE("toy-problem command emits four trajectories and a sidecar") {
  const fs::path dir = fresh_dir("fig1");
  const CmdResult r = run_cli("fig1 --out \"" + dir.string() + "\"", dir);
  REQUIRE(r.exit_code == 0);

  const json sidecar = json::parse(slurp(dir / "fig1_config.json"));
  for (const std::string kind : {"sgd", "signsgd", "adam", "s3"}) {
    REQUIRE(fs::exists(dir / (kind + ".csv")));
    CHECK(sidecar.at("runs").at(kind).at("status") == "completed");
  }

  const auto s3 = read_csv(dir / "s3.csv");
  REQUIRE(s3.size() == 10001);
  CHECK(s3[0] == std::vector<std::string>{"step", "x1", "x2", "loss",
                                          "mean_update"});
  for (std::size_t i = 1; i < s3.size(); ++i) {
    CHECK(std::strtod(s3[i][4].c_str(), nullptr) <= 1.0 + 1e-12);
  }
  const auto sign = read_csv(dir / "signsgd.csv");
  for (std::size_t i = 1; i < sign.size(); ++i) {
    CHECK(std::strtod(sign[i][4].c_str(), nullptr) == 1.0);
  }

  // reruns are byte-identical
  const fs::path again = fresh_dir("fig1_again");
  REQUIRE(run_cli("fig1 --out \"" + again.string() + "\"", again).exit_code ==
          0);
  for (const std::string kind : {"sgd", "signsgd", "adam", "s3"}) {
    CHECK(slurp(dir / (kind + ".csv")) == slurp(again / (kind + ".csv")));
  }
}

TEST_CASE("the output directory defaults to OPTIKIT_OUT") {
  const fs::path dir = fresh_dir("env_out");
  REQUIRE(::setenv("OPTIKIT_OUT", dir.string().c_str(), 1) == 0);
  const CmdResult r = run_cli(
      "schedule-dump --set kind=constant --set peak_lr=1e-3 "
      "--set total_steps=10",
      dir);
  ::unsetenv("OPTIKIT_OUT");
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(dir / "schedule.csv"));
  CHECK(read_csv(dir / "schedule.csv").size() == 12);
}
