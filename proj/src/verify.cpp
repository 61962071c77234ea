#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "optikit/errors.hpp"
#include "optikit/jsonutil.hpp"
#include "optikit/optim.hpp"
#include "optikit/problems.hpp"
#include "optikit/theory.hpp"

namespace optikit::theory {

namespace {

using nlohmann::json;

std::vector<std::pair<double, double>> parse_pairs(const json& cfg,
                                                   const char* key,
                                                   std::vector<std::pair<double, double>> fallback,
                                                   const std::string& ctx) {
  if (!cfg.contains(key)) return fallback;
  std::vector<std::pair<double, double>> out;
  const auto& arr = cfg.at(key);
  if (!arr.is_array()) throw ConfigError(std::string(key) + " must be an array in " + ctx);
  for (const auto& e : arr) {
    if (!e.is_array() || e.size() != 2) {
      throw ConfigError(std::string(key) + " entries must be [beta1, beta2] pairs in " + ctx);
    }
    out.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
  }
  if (out.empty()) throw ConfigError(std::string(key) + " must be non-empty in " + ctx);
  return out;
}

std::uint64_t cell_seed(std::uint64_t base, std::size_t a, std::size_t b) {
  return base + 1000003ULL * (a + 1) + 613ULL * (b + 1);
}

}  // namespace

json report_to_json(const TheoremReport& report) {
  return json{{"theorem", report.theorem},
              {"grid", report.grid},
              {"cells", report.cells},
              {"max_violation", report.max_violation},
              {"pass", report.pass}};
}

TheoremReport verify_t1(const json& grid_config) {
  const std::string ctx = "t1 grid config";
  check_keys(grid_config,
             {"pairs", "adversarial_steps", "stream_steps", "dim", "tolerance",
              "seed"},
             ctx);
  const auto pairs = parse_pairs(
      grid_config, "pairs",
      {{0.9, 0.999}, {0.9, 0.99}, {0.8, 0.99}, {0.95, 0.999}, {0.9, 0.95}, {0.5, 0.9}},
      ctx);
  const long adv_steps =
      get_field_or<long>(grid_config, "adversarial_steps", ctx, 6000);
  const long stream_steps =
      get_field_or<long>(grid_config, "stream_steps", ctx, 1000);
  const std::size_t dim = static_cast<std::size_t>(
      get_field_or<long>(grid_config, "dim", ctx, 4));
  const double tol = get_field_or<double>(grid_config, "tolerance", ctx, 1e-9);
  const std::uint64_t seed =
      get_field_or<std::uint64_t>(grid_config, "seed", ctx, 20240901);

  TheoremReport rep;
  rep.theorem = "t1";
  rep.grid = json{{"pairs", pairs},
                  {"adversarial_steps", adv_steps},
                  {"stream_steps", stream_steps},
                  {"dim", dim},
                  {"tolerance", tol},
                  {"seed", seed}};
  rep.cells = json::array();

  const auto& fams = gradient_stream_families();
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto [b1, b2] = pairs[pi];
    json cell{{"beta1", b1}, {"beta2", b2}};
    try {
      const AdversarialReport adv = run_adversarial_adam(b1, b2, adv_steps);
      double viol =
          std::max(adv.max_bound_violation,
                   adv.sup_ratio - adv.asymptotic_bound);
      cell["sup_ratio"] = adv.sup_ratio;
      cell["sup_step"] = adv.sup_step;
      cell["asymptotic_bound"] = adv.asymptotic_bound;
      cell["nondecreasing"] = adv.nondecreasing;

      AdamHyper hyper;
      hyper.beta1 = b1;
      hyper.beta2 = b2;
      hyper.epsilon = 0.0;
      double max_stream_ratio = 0.0;
      for (std::size_t fi = 0; fi < fams.size(); ++fi) {
        RngStream rng(cell_seed(seed, pi, fi));
        AdamState state(dim);
        ParamVector x(dim, 0.0);
        for (long t = 1; t <= stream_steps; ++t) {
          const ParamVector g = fams[fi].gen(rng, t - 1, dim);
          const StepIntermediates im = adam_step(state, hyper, x, g, 0.0);
          const double realized = max_abs(im.update);
          max_stream_ratio = std::max(max_stream_ratio, realized);
          viol = std::max(viol, realized - adam_ratio_bound(b1, b2, t));
        }
      }
      cell["max_stream_ratio"] = max_stream_ratio;
      cell["max_violation"] = viol;
      rep.max_violation = std::max(rep.max_violation, viol);
    } catch (const std::invalid_argument& e) {
      // Precondition violations (e.g. beta1^2 >= beta2) are recorded per
      // cell, not raised.
      cell["error"] = e.what();
    }
    rep.cells.push_back(cell);
  }
  rep.pass = rep.max_violation <= tol;
  return rep;
}

TheoremReport verify_t2(const json& grid_config) {
  const std::string ctx = "t2 grid config";
  check_keys(grid_config,
             {"betas", "ps", "steps", "dim", "tolerance_unit",
              "tolerance_ratio", "seed"},
             ctx);
  const auto betas = get_field_or<std::vector<double>>(
      grid_config, "betas", ctx, {0.5, 0.9, 0.95, 0.99});
  const auto ps = get_field_or<std::vector<double>>(grid_config, "ps", ctx,
                                                    {1.0, 2.0, 3.0, 5.0});
  const long steps = get_field_or<long>(grid_config, "steps", ctx, 1000);
  const std::size_t dim = static_cast<std::size_t>(
      get_field_or<long>(grid_config, "dim", ctx, 4));
  const double tol_unit =
      get_field_or<double>(grid_config, "tolerance_unit", ctx, 1e-12);
  const double tol_ratio =
      get_field_or<double>(grid_config, "tolerance_ratio", ctx, 1e-9);
  const std::uint64_t seed =
      get_field_or<std::uint64_t>(grid_config, "seed", ctx, 20240902);
  if (betas.empty() || ps.empty()) {
    throw ConfigError("betas and ps must be non-empty in " + ctx);
  }

  TheoremReport rep;
  rep.theorem = "t2";
  rep.grid = json{{"betas", betas}, {"ps", ps},       {"steps", steps},
                  {"dim", dim},     {"seed", seed},   {"tolerance_unit", tol_unit},
                  {"tolerance_ratio", tol_ratio}};
  rep.cells = json::array();
  const auto& fams = gradient_stream_families();

  double viol_unit = 0.0;
  double viol_ratio = 0.0;
  double viol_mono = 0.0;

  // Shared-coefficient unit bound: |u| <= 1 on every stream.
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    for (double p : ps) {
      double max_ratio = 0.0;
      for (std::size_t fi = 0; fi < fams.size(); ++fi) {
        RngStream rng(cell_seed(seed, bi, fi));
        TwoBetaS3 sim(dim, betas[bi], betas[bi], p);
        for (long t = 1; t <= steps; ++t) {
          const ParamVector g = fams[fi].gen(rng, t - 1, dim);
          max_ratio = std::max(max_ratio, max_abs(sim.step(g)));
        }
      }
      viol_unit = std::max(viol_unit, max_ratio - 1.0);
      rep.cells.push_back(json{{"check", "unit_bound"},
                               {"beta", betas[bi]},
                               {"p", p},
                               {"max_ratio", max_ratio}});
    }
  }

  // Two-coefficient ratio bound on precondition-satisfying pairs.
  for (std::size_t i = 0; i < betas.size(); ++i) {
    for (std::size_t j = 0; j < betas.size(); ++j) {
      for (double p : ps) {
        double bound;
        try {
          bound = s3_ratio_bound(betas[i], betas[j], p);
        } catch (const std::invalid_argument&) {
          continue;  // pair outside the theorem's domain
        }
        double max_ratio = 0.0;
        for (std::size_t fi = 0; fi < fams.size(); ++fi) {
          RngStream rng(cell_seed(seed + 7, i * betas.size() + j, fi));
          TwoBetaS3 sim(dim, betas[i], betas[j], p);
          for (long t = 1; t <= steps; ++t) {
            const ParamVector g = fams[fi].gen(rng, t - 1, dim);
            max_ratio = std::max(max_ratio, max_abs(sim.step(g)));
          }
        }
        viol_ratio = std::max(viol_ratio, max_ratio - bound);
        rep.cells.push_back(json{{"check", "two_beta_bound"},
                                 {"beta1", betas[i]},
                                 {"beta2", betas[j]},
                                 {"p", p},
                                 {"bound", bound},
                                 {"max_ratio", max_ratio}});
      }
    }
  }

  // Denominator monotonicity in p over a shared stream.
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    double max_excess = 0.0;
    for (std::size_t fi = 0; fi < fams.size(); ++fi) {
      std::vector<TwoBetaS3> sims;
      for (double p : ps) sims.emplace_back(dim, betas[bi], betas[bi], p);
      RngStream rng(cell_seed(seed + 13, bi, fi));
      for (long t = 1; t <= steps; ++t) {
        const ParamVector g = fams[fi].gen(rng, t - 1, dim);
        for (auto& sim : sims) sim.step(g);
        for (std::size_t a = 0; a + 1 < sims.size(); ++a) {
          for (std::size_t b = a + 1; b < sims.size(); ++b) {
            if (ps[a] > ps[b]) continue;
            const auto& lo = sims[a].last_denominator();
            const auto& hi = sims[b].last_denominator();
            for (std::size_t c = 0; c < dim; ++c) {
              // Relative slack for fp rounding at large magnitudes.
              max_excess =
                  std::max(max_excess, lo[c] - hi[c] - 1e-12 * hi[c]);
            }
          }
        }
      }
    }
    viol_mono = std::max(viol_mono, max_excess);
    rep.cells.push_back(json{{"check", "denominator_monotonicity"},
                             {"beta", betas[bi]},
                             {"max_excess", max_excess}});
  }

  rep.max_violation = std::max({viol_unit, viol_ratio, viol_mono});
  rep.pass = viol_unit <= tol_unit && viol_ratio <= tol_ratio &&
             viol_mono <= tol_ratio;
  return rep;
}

TheoremReport verify_t3(const json& grid_config) {
  const std::string ctx = "t3 grid config";
  check_keys(grid_config, {"cells", "tolerance"}, ctx);
  const double tol = get_field_or<double>(grid_config, "tolerance", ctx, 1e-9);

  json cells_cfg;
  if (grid_config.contains("cells")) {
    cells_cfg = grid_config.at("cells");
    if (!cells_cfg.is_array() || cells_cfg.empty()) {
      throw ConfigError("cells must be a non-empty array in " + ctx);
    }
  } else {
    cells_cfg = json::array({
        json{{"problem", "quadratic1d"}, {"beta", 0.9}, {"gamma", 0.1}, {"steps", 100}},
        json{{"problem", "quadratic1d"}, {"beta", 0.0}, {"gamma", 0.1}, {"steps", 100}},
        json{{"problem", "quadratic"}, {"beta", 0.9}, {"gamma", 5e-4}, {"steps", 1000}},
        json{{"problem", "fig1"}, {"beta", 0.9}, {"gamma", 1e-4}, {"steps", 1000}},
    });
  }

  TheoremReport rep;
  rep.theorem = "t3";
  rep.grid = json{{"cells", cells_cfg}, {"tolerance", tol}};
  rep.cells = json::array();
  bool all_pass = true;
  for (const auto& c : cells_cfg) {
    check_keys(c, {"problem", "beta", "gamma", "steps"}, ctx + " cell");
    const std::string pname = get_field<std::string>(c, "problem", ctx);
    const double beta = get_field<double>(c, "beta", ctx);
    const double gamma = get_field<double>(c, "gamma", ctx);
    const long steps = get_field_or<long>(c, "steps", ctx, 1000);

    problems::Problem prob;
    if (pname == "quadratic1d") {
      prob = problems::quadratic_problem({1.0});
    } else if (pname == "quadratic") {
      prob = problems::quadratic_problem({1.0, 100.0});
    } else if (pname == "fig1") {
      prob = problems::fig1_problem(0.0);
    } else if (pname == "rosenbrock") {
      prob = problems::rosenbrock_problem(0.0);
    } else if (pname == "quartic") {
      prob = problems::quartic_problem(0.0);
    } else {
      throw ConfigError("unknown problem '" + pname + "' in " + ctx);
    }

    const NagGapReport gaps = nag_equivalence_check(
        prob, prob.default_x0, beta, gamma, steps, tol);
    rep.max_violation =
        std::max({rep.max_violation, gaps.max_gap_I_II, gaps.max_gap_II_III});
    all_pass = all_pass && gaps.pass;
    rep.cells.push_back(json{{"problem", pname},
                             {"beta", beta},
                             {"gamma", gamma},
                             {"steps", steps},
                             {"max_gap_I_II", gaps.max_gap_I_II},
                             {"max_gap_II_III", gaps.max_gap_II_III},
                             {"pass", gaps.pass}});
  }
  rep.pass = all_pass && rep.max_violation <= tol;
  return rep;
}

TheoremReport verify_t4(const json& grid_config) {
  const std::string ctx = "t4 grid config";
  check_keys(grid_config, {"T_values", "tolerance"}, ctx);
  const auto t_values = get_field_or<std::vector<long>>(
      grid_config, "T_values", ctx, {16, 256, 4096});
  const double tol = get_field_or<double>(grid_config, "tolerance", ctx, 0.0);
  if (t_values.size() < 2) {
    throw ConfigError("T_values must list at least two budgets in " + ctx);
  }

  TheoremReport rep;
  rep.theorem = "t4";
  rep.grid = json{{"T_values", t_values}, {"tolerance", tol}};
  rep.cells = json::array();

  auto unit_budget = [](long T) {
    ConvergenceBudget b;
    b.L0 = 1.0;
    b.L1 = 0.0;
    b.sigma = 1.0;
    b.F_gap = 1.0;
    b.grad1_norm = 1.0;
    b.d = 1;
    b.U_max = 1.0;
    b.T = T;
    return b;
  };

  // Hand-derived reference point at T = 16: the five terms are
  // 1 + 0.75 + 2 + 1.125 + 0.0078125, all exactly representable.
  {
    const double total = convergence_bound(unit_budget(16));
    const double viol = std::fabs(total - 4.8828125);
    rep.max_violation = std::max(rep.max_violation, viol);
    rep.cells.push_back(json{{"check", "reference_T16"},
                             {"total", total},
                             {"expected", 4.8828125},
                             {"violation", viol}});
  }

  // Monotone decreasing in T.
  {
    double prev = std::numeric_limits<double>::infinity();
    double viol = 0.0;
    json totals = json::array();
    for (long T : t_values) {
      const double total = convergence_bound(unit_budget(T));
      viol = std::max(viol, total - prev);
      totals.push_back(json{{"T", T}, {"total", total}});
      prev = total;
    }
    rep.max_violation = std::max(rep.max_violation, viol);
    rep.cells.push_back(json{{"check", "monotone_in_T"},
                             {"totals", totals},
                             {"violation", viol}});
  }

  // Linearity in U_max: doubling U_max doubles the bound exactly.
  {
    ConvergenceBudget b = unit_budget(16);
    const double t1 = convergence_bound(b);
    b.U_max = 2.0;
    const double t2 = convergence_bound(b);
    const double viol = std::fabs(t2 - 2.0 * t1);
    rep.max_violation = std::max(rep.max_violation, viol);
    rep.cells.push_back(json{{"check", "linear_in_U_max"},
                             {"single", t1},
                             {"doubled", t2},
                             {"violation", viol}});
  }

  // Monotone increasing in each of {L0*F_gap, sigma, d, U_max}.
  {
    const double base = convergence_bound(unit_budget(16));
    double viol = 0.0;
    auto expect_ge = [&](ConvergenceBudget b) {
      viol = std::max(viol, base - convergence_bound(b));
    };
    ConvergenceBudget b = unit_budget(16);
    b.F_gap = 3.0;
    expect_ge(b);
    b = unit_budget(16);
    b.sigma = 3.0;
    expect_ge(b);
    b = unit_budget(16);
    b.d = 5;
    expect_ge(b);
    b = unit_budget(16);
    b.U_max = 3.0;
    expect_ge(b);
    rep.max_violation = std::max(rep.max_violation, viol);
    rep.cells.push_back(
        json{{"check", "monotone_in_constants"}, {"violation", viol}});
  }

  // Step-budget threshold flag: reported, bound still computed when unmet.
  {
    ConvergenceBudget smooth = unit_budget(16);
    const ConvergenceReport r0 = convergence_bound_terms(smooth);
    ConvergenceBudget rough = unit_budget(16);
    rough.L1 = 5.0;
    rough.d = 4;
    const ConvergenceReport r1 = convergence_bound_terms(rough);
    const double viol = (r0.in_regime ? 0.0 : 1.0) + (r1.in_regime ? 1.0 : 0.0);
    rep.max_violation = std::max(rep.max_violation, viol);
    rep.cells.push_back(json{{"check", "regime_flag"},
                             {"smooth_in_regime", r0.in_regime},
                             {"rough_in_regime", r1.in_regime},
                             {"rough_threshold", r1.t_threshold},
                             {"rough_total", r1.total},
                             {"violation", viol}});
  }

  rep.pass = rep.max_violation <= tol;
  return rep;
}

}  // namespace optikit::theory
