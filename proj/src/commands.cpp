#include "delaygame/commands.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <memory>
#include <sstream>

#include "delaygame/forward_sdde.hpp"

namespace delaygame {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

std::vector<std::string> names(const std::string& prefix, int dim) {
  if (dim == 1) return {prefix};
  std::vector<std::string> out;
  for (int i = 1; i <= dim; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

TrajectoryTable table(const std::string& stem, const std::string& prefix, const Trajectory& t) {
  return {stem + ".csv", names(prefix, t.dim()), t};
}

void require_kind(const ModelConfig& cfg, const std::string& sub, std::vector<ModelKind> kinds) {
  if (std::find(kinds.begin(), kinds.end(), cfg.kind) != kinds.end()) return;
  std::string list;
  for (ModelKind k : kinds) list += (list.empty() ? "" : " or ") + std::string(to_string(k));
  throw UsageError(sub + " needs kind " + list + ", the config has kind " + to_string(cfg.kind));
}

// Everything a subcommand needs, built once from the config.
struct Setup {
  TimeGrid grid;
  PathBundle paths;
  ObservedBasis basis;
  std::unique_ptr<GameModel> model;
  std::unique_ptr<CostModel> costs;
};

Setup setup(const ModelConfig& cfg) {
  Setup s{cfg.time_grid(), {}, cfg.simulation.basis, nullptr, nullptr};
  s.paths = sample_paths(s.grid, cfg.simulation.m_paths, cfg.simulation.master_seed);
  switch (cfg.kind) {
    case ModelKind::General:
      s.model = std::make_unique<LinearModel>(cfg.general.dims, cfg.general.sys);
      s.costs = std::make_unique<QuadraticCosts>(cfg.general.dims, cfg.general.w1, cfg.general.w2);
      break;
    case ModelKind::Lq:
      s.model = std::make_unique<LinearModel>(lq_game_model(cfg.lq));
      s.costs = std::make_unique<QuadraticCosts>(lq_costs(cfg.lq));
      break;
    case ModelKind::Pension:
      s.model = std::make_unique<PensionModel>(cfg.pension);
      s.costs = std::make_unique<PensionCosts>(cfg.pension);
      break;
  }
  return s;
}

// Candidate controls that need no equilibrium solve: the configured constants of a general
// model, zero for an LQ model, the equilibrium consumption of the pension model.
ControlPair simple_controls(const ModelConfig& cfg, const Setup& s) {
  const int n = s.grid.steps();
  const int m = s.paths.paths;
  if (cfg.kind == ModelKind::Pension) {
    const PensionAdjoint adj = qhat_khat_recursive(cfg.pension, s.grid, s.paths);
    return equilibrium_consumption(cfg.pension, adj.q, s.grid, cfg.mode).controls;
  }
  const Dimensions d = s.model->dims();
  ControlPair c = ControlPair::zeros(n, m, d.k1, d.k2);
  if (cfg.kind == ModelKind::General) {
    for (int j = 0; j <= n; ++j) {
      c.u1.at(j).rowwise() = cfg.general.u1.transpose();
      c.u2.at(j).rowwise() = cfg.general.u2.transpose();
    }
  }
  return c;
}

PensionOptions pension_options(const ModelConfig& cfg) {
  PensionOptions o;
  o.mode = cfg.mode;
  o.basis = cfg.simulation.basis;
  o.epsilons = cfg.verification.epsilons;
  o.directions = cfg.verification.directions;
  o.se_multiplier = cfg.verification.se_multiplier;
  o.negative_shift = cfg.verification.negative_shift;
  o.reseed_wbar = cfg.verification.wbar_reseed;
  return o;
}

json fixed_point_json(const LqSolution& sol) {
  return {{"iterations", exact(sol.iterations)},
          {"control_change", exact_series(sol.residuals)},
          {"monotone_after_three", sol.monotone_after_three}};
}

bool identical(const ControlPair& a, const ControlPair& b) {
  for (int i = 1; i <= 2; ++i)
    for (int j = a.player(i).first(); j <= a.player(i).last(); ++j)
      if (!(a.player(i).at(j).array() == b.player(i).at(j).array()).all()) return false;
  return true;
}

void simulate_forward(const ModelConfig& cfg, CommandOutput& out) {
  const Setup s = setup(cfg);
  const ControlPair controls = simple_controls(cfg, s);
  const Trajectory x = solve_forward(*s.model, controls, s.grid, s.paths);
  const int n = s.grid.steps();
  json xt = json::array();
  for (int c = 0; c < x.dim(); ++c) {
    const SampleStats st = sample_stats(x.at(n).col(c));
    xt.push_back(estimate(st.mean, st.se));
  }
  out.report.results["controls"] = cfg.kind == ModelKind::Pension ? "equilibrium consumption"
                                   : cfg.kind == ModelKind::Lq    ? "zero"
                                                                  : "configured constants";
  out.report.results["x_T_mean"] = xt;
  out.report.flags.push_back({"finite", true, "all forward values finite"});
  out.tables.push_back(table("x", "x", x));
  out.tables.push_back(table("u1", "u1", controls.u1));
  out.tables.push_back(table("u2", "u2", controls.u2));
}

void solve_lq(const ModelConfig& cfg, CommandOutput& out) {
  const Setup s = setup(cfg);
  const LqSolution sol = solve_lq_fixed_point(cfg.lq, s.grid, s.paths, s.basis, cfg.solver);
  out.report.results["fixed_point"] = fixed_point_json(sol);
  out.report.flags.push_back({"fixed_point_converged", true,
                              std::to_string(sol.iterations) + " iterations, last change " +
                                  num(sol.residuals.empty() ? 0.0 : sol.residuals.back())});

  const StateSolution st = solve_state(*s.model, sol.controls, s.grid, s.paths, s.basis);
  out.report.results["j1"] = to_json(eval_cost(1, *s.model, *s.costs, st, sol.controls, s.grid));
  out.report.results["j2"] = to_json(eval_cost(2, *s.model, *s.costs, st, sol.controls, s.grid));

  const FeatureProvider obs = observed_features(s.grid, s.paths, {&sol.filtered.x});
  const Dimensions d = cfg.lq.dims;
  for (int i = 1; i <= 2; ++i) {
    const auto dirs = select_directions(cfg.verification.directions, i == 1 ? d.k1 : d.k2,
                                        s.grid.horizon());
    const AdjointTrajectory adj = filtered_adjoint(sol.filtered, i);
    const FirstOrderStats fo =
        check_first_order(i, *s.model, *s.costs, st, adj, sol.controls, dirs, s.grid, obs, s.basis,
                          FirstOrderForm::Equality, cfg.verification.se_multiplier);
    const std::string name = "first_order_player" + std::to_string(i);
    out.report.results[name] = to_json(fo);
    out.report.flags.push_back({name, fo.pass, "max |mean| " + num(fo.max_abs) + ", statistic " +
                                                   num(fo.statistic) + " SE"});
  }
  out.tables.push_back(table("x_hat", "x", sol.filtered.x));
  out.tables.push_back(table("y_hat", "y", sol.filtered.y));
  out.tables.push_back(table("u1", "u1", sol.controls.u1));
  out.tables.push_back(table("u2", "u2", sol.controls.u2));
  for (int i = 0; i < 2; ++i) {
    const std::string id = std::to_string(i + 1);
    out.tables.push_back(table("p" + id + "_hat", "p" + id, sol.filtered.p[static_cast<std::size_t>(i)]));
    out.tables.push_back(table("q" + id + "_hat", "q" + id, sol.filtered.q[static_cast<std::size_t>(i)]));
  }
}

json pension_json(const PensionReport& rep) {
  json phat = json::array();
  for (const SampleStats& st : rep.phat_mean) phat.push_back(estimate(st.mean, st.se));
  json out = {{"j1", to_json(rep.j1)},
              {"j2", to_json(rep.j2)},
              {"risk_bsde", estimate(rep.risk_bsde.value, rep.risk_bsde.se)},
              {"risk_girsanov", estimate(rep.risk_girsanov.value, rep.risk_girsanov.se)},
              {"risk_gap", estimate(rep.risk_bsde.value - rep.risk_girsanov.value, rep.risk_gap_se)},
              {"phat_mean", phat},
              {"min_qhat", exact(rep.min_q)},
              {"min_consumption", exact(rep.min_c)},
              {"qhat_seam_jump", exact(rep.adjoint.factor.seam_jump)},
              {"qhat_factor", exact_series(rep.adjoint.factor.a)},
              {"floor_events", exact(rep.consumption.floor_events)},
              {"nash", to_json(rep.nash)}};
  for (int i = 0; i < 2; ++i) {
    const std::string id = std::to_string(i + 1);
    out["first_order_player" + id] = to_json(rep.first_order[i]);
    out["shifted_candidate_player" + id] = to_json(rep.shifted[i]);
  }
  return out;
}

void solve_pension(const ModelConfig& cfg, CommandOutput& out) {
  const Setup s = setup(cfg);
  const PensionReport rep = run_pension(cfg.pension, s.grid, s.paths, pension_options(cfg));
  out.report.results = pension_json(rep);
  out.report.results["mode"] = to_string(cfg.mode);
  out.report.flags = rep.flags;
  out.tables.push_back(table("x", "x", rep.state.x));
  out.tables.push_back(table("c1", "c1", rep.consumption.controls.u1));
  out.tables.push_back(table("c2", "c2", rep.consumption.controls.u2));
  out.tables.push_back(table("p_hat", "p", rep.adjoint.p));
  out.tables.push_back(table("q_hat", "q", rep.adjoint.q));
  out.tables.push_back(table("k_hat", "k", rep.adjoint.k));
}

void verify_nash_command(const ModelConfig& cfg, CommandOutput& out) {
  const Setup s = setup(cfg);
  if (cfg.kind == ModelKind::Pension) {
    const PensionReport rep = run_pension(cfg.pension, s.grid, s.paths, pension_options(cfg));
    out.report.results["nash"] = to_json(rep.nash);
    for (int i = 0; i < 2; ++i)
      out.report.results["shifted_candidate_player" + std::to_string(i + 1)] = to_json(rep.shifted[i]);
    for (const Flag& f : rep.flags)
      if (f.name == "nash" || f.name.rfind("shifted_candidate", 0) == 0) out.report.flags.push_back(f);
    return;
  }
  const LqSolution sol = solve_lq_fixed_point(cfg.lq, s.grid, s.paths, s.basis, cfg.solver);
  out.report.results["fixed_point"] = fixed_point_json(sol);
  const double T = s.grid.horizon();
  const auto d1 = select_directions(cfg.verification.directions, cfg.lq.dims.k1, T);
  const auto d2 = select_directions(cfg.verification.directions, cfg.lq.dims.k2, T);
  const NashReport nash = verify_nash(*s.model, *s.costs, sol.controls, d1, d2,
                                      cfg.verification.epsilons, s.grid, s.paths, s.basis,
                                      cfg.verification.se_multiplier);
  out.report.results["nash"] = to_json(nash);
  int failed = 0;
  for (const NashRow& r : nash.rows) failed += r.pass ? 0 : 1;
  out.report.flags.push_back({"nash", nash.pass, std::to_string(nash.rows.size()) + " rows, " +
                                                     std::to_string(failed) + " above the SE bound"});
}

void check_duality_command(const ModelConfig& cfg, CommandOutput& out) {
  const Setup s = setup(cfg);
  const ControlPair controls = simple_controls(cfg, s);
  const StateSolution st = solve_state(*s.model, controls, s.grid, s.paths, s.basis);
  const Dimensions d = s.model->dims();
  json rows = json::array();
  bool pass = true;
  double worst = 0.0;
  for (int i = 1; i <= 2; ++i) {
    const AdjointTrajectory adj =
        assemble_and_solve_adjoint(i, *s.model, *s.costs, st, controls, s.grid, s.paths, s.basis);
    for (const Direction& dir : select_directions(cfg.verification.directions,
                                                  i == 1 ? d.k1 : d.k2, s.grid.horizon())) {
      const Trajectory v = direction_trajectory(dir, controls.player(i), s.grid);
      const VariationalSolution var =
          solve_variational(i, *s.model, st, controls, v, s.grid, s.paths, s.basis);
      const DualityReport rep = check_duality(i, *s.model, st, adj, var, controls, s.grid, s.paths,
                                              s.basis, cfg.verification.se_multiplier);
      rows.push_back({{"player", i},
                      {"direction", dir.name},
                      {"delayed_drift", to_json(rep.delayed_drift)},
                      {"anticipated", to_json(rep.anticipated)},
                      {"pass", rep.pass}});
      pass = pass && rep.pass;
      for (const Residual* r : {&rep.delayed_drift, &rep.anticipated})
        if (r->se > 0.0) worst = std::max(worst, std::abs(r->value) / r->se);
    }
  }
  out.report.results["controls"] = cfg.kind == ModelKind::Pension ? "equilibrium consumption"
                                   : cfg.kind == ModelKind::Lq    ? "zero"
                                                                  : "configured constants";
  out.report.results["rows"] = rows;
  out.tables.push_back(table("x", "x", st.x));
  out.tables.push_back(table("y", "y", st.back.y));
  out.report.flags.push_back({"duality", pass, "largest residual " + num(worst) + " SE"});
}

void crosscheck_h4_command(const ModelConfig& cfg, CommandOutput& out) {
  const Setup s = setup(cfg);
  const char* label = cfg.h4_case == H4Case::A ? "A" : cfg.h4_case == H4Case::B ? "B" : "C";
  out.report.results["case"] = label;
  try {
    check_h4(cfg.lq, cfg.h4_case, s.grid);
  } catch (const std::invalid_argument& e) {
    out.report.flags.push_back({"h4_preconditions", false, e.what()});
    return;
  }
  out.report.flags.push_back({"h4_preconditions", true, std::string("case ") + label + " holds"});
  const H4Report rep = crosscheck_h4(cfg.lq, cfg.h4_case, s.grid, s.paths, s.basis, cfg.solver);
  out.report.results["solved"] = rep.solved;
  if (!rep.solved) return;
  out.report.results["relative_l2"] = {{"x", exact(rep.rel_x)}, {"y", exact(rep.rel_y)},
                                       {"z", exact(rep.rel_z)}, {"p", exact(rep.rel_p)},
                                       {"q", exact(rep.rel_q)}, {"k", exact(rep.rel_k)}};
  out.report.results["iterations_triple"] = exact(rep.iterations_triple);
  out.report.results["iterations_double"] = exact(rep.iterations_double);
  const double worst = std::max({rep.rel_p, rep.rel_q, rep.rel_k});
  out.report.flags.push_back({"h4_transform", rep.rel_p <= 1e-2,
                              "relative L2 of p " + num(rep.rel_p) + ", largest adjoint " + num(worst)});
}

void verify_adaptedness(const ModelConfig& cfg, CommandOutput& out) {
  const Setup s = setup(cfg);
  PathBundle other = s.paths;
  reseed_wbar(other, cfg.verification.wbar_reseed);
  ControlPair a, b;
  if (cfg.kind == ModelKind::Pension) {
    a = simple_controls(cfg, s);
    const PensionAdjoint adj = qhat_khat_recursive(cfg.pension, s.grid, other);
    b = equilibrium_consumption(cfg.pension, adj.q, s.grid, cfg.mode).controls;
  } else {
    a = solve_lq_fixed_point(cfg.lq, s.grid, s.paths, s.basis, cfg.solver).controls;
    b = solve_lq_fixed_point(cfg.lq, s.grid, other, s.basis, cfg.solver).controls;
  }
  const bool same = identical(a, b);
  out.report.results["wbar_seeds"] = {s.paths.wbar_seed, other.wbar_seed};
  out.report.results["bit_identical"] = same;
  out.report.flags.push_back({"adaptedness", same, same ? "controls bit-identical after reseeding Wbar"
                                                        : "controls changed after reseeding Wbar"});
}

using Body = std::function<void(const ModelConfig&, CommandOutput&)>;

struct Entry {
  std::string name;
  std::vector<ModelKind> kinds;
  Body body;
};

const std::vector<Entry>& table_of_commands() {
  static const std::vector<Entry> entries = {
      {"simulate-forward", {ModelKind::General, ModelKind::Lq, ModelKind::Pension}, simulate_forward},
      {"solve-lq", {ModelKind::Lq}, solve_lq},
      {"solve-pension", {ModelKind::Pension}, solve_pension},
      {"verify-nash", {ModelKind::Lq, ModelKind::Pension}, verify_nash_command},
      {"check-duality", {ModelKind::General, ModelKind::Lq, ModelKind::Pension}, check_duality_command},
      {"crosscheck-h4", {ModelKind::Lq}, crosscheck_h4_command},
      {"verify-adaptedness", {ModelKind::Lq, ModelKind::Pension}, verify_adaptedness},
  };
  return entries;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> v;
    for (const Entry& e : table_of_commands()) v.push_back(e.name);
    return v;
  }();
  return out;
}

CommandOutput execute(const std::string& subcommand, const ModelConfig& cfg) {
  const auto& entries = table_of_commands();
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const Entry& e) { return e.name == subcommand; });
  if (it == entries.end()) throw UsageError("unknown subcommand " + subcommand);
  require_kind(cfg, subcommand, it->kinds);

  CommandOutput out;
  out.report.subcommand = subcommand;
  out.report.config = cfg.source;
  const auto t0 = Clock::now();
  try {
    it->body(cfg, out);
  } catch (const ConvergenceError& e) {
    out.report.results["control_change"] = exact_series(e.history());
    out.report.flags.push_back({"fixed_point_converged", false, e.what()});
    out.tables.clear();
  } catch (const std::exception& e) {
    out.report.flags.push_back({"completed", false, e.what()});
    out.tables.clear();
  }
  out.report.timings["total_seconds"] = seconds_since(t0);
  return out;
}

int run(const std::string& subcommand, const ModelConfig& cfg, const std::filesystem::path& out_dir,
        std::ostream& log) {
  CommandOutput out;
  try {
    out = execute(subcommand, cfg);
  } catch (const UsageError& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  write_report(out_dir, out.report, out.tables, cfg.time_grid());
  for (const Flag& f : out.report.flags)
    log << (f.pass ? "PASS " : "FAIL ") << f.name << ": " << f.detail << '\n';
  log << "report written to " << (out_dir / "report.json").string() << '\n';
  return out.report.pass() ? 0 : 1;
}

}  // namespace delaygame
