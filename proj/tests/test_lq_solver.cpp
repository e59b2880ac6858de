#include <cmath>

#include <gtest/gtest.h>

#include "delaygame/lq_solver.hpp"
#include "fixtures.hpp"

using namespace delaygame;
using namespace delaygame::testing;

namespace {

bool mentions(const std::vector<std::string>& v, const std::string& text) {
  for (const auto& s : v)
    if (s.find(text) != std::string::npos) return true;
  return false;
}

FilteredTriple constant_triple(const TimeGrid& g, int paths, double p, double q, double k) {
  FilteredTriple f;
  f.x = Trajectory(-g.delay_steps(), g.steps(), paths, 1);
  f.y = Trajectory(0, g.last_index(), paths, 1);
  f.z = Trajectory(0, g.steps(), paths, 1);
  for (int i = 0; i < 2; ++i) {
    f.p[i] = Trajectory(-g.delay_steps(), g.steps(), paths, 1);
    f.q[i] = Trajectory(0, g.last_index(), paths, 1);
    f.k[i] = Trajectory(0, g.last_index(), paths, 1);
    for (int j = 0; j <= g.steps(); ++j) {
      f.p[i].at(j).setConstant(p);
      f.q[i].at(j).setConstant(q);
      f.k[i].at(j).setConstant(k);
    }
  }
  return f;
}

}  // namespace

TEST(LqSpec, PositiveControlWeightRejected) {
  LqModelSpec s = lq_game_spec();
  s.w1.R = S(1.0);
  const auto v = lq_violations(s);
  ASSERT_FALSE(v.empty());
  EXPECT_TRUE(mentions(v, "R_i must be negative definite"));
  EXPECT_TRUE(mentions(v, "R_1"));
  EXPECT_THROW(validate(s), std::invalid_argument);
}

TEST(LqSpec, AllViolationsListed) {
  LqModelSpec s = lq_game_spec();
  Mat asym(2, 2);
  asym << -1.0, 0.5, 0.0, -1.0;
  s.dims = {2, 1, 1, 1};
  s.sys = LinearCoefficients::zeros(s.dims);
  s.sys.xi = {TimeFunction(1.0), TimeFunction(1.0)};
  s.sys.phi = {TimeFunction(0.0)};
  s.w1 = PlayerWeights::zeros(s.dims, 1);
  s.w2 = PlayerWeights::zeros(s.dims, 2);
  s.w1.O = MatrixCoefficient(asym);
  s.w2.M = Mat::Identity(2, 2);
  s.w1.R = S(-1.0);
  s.w2.R = S(-1.0);
  const auto v = lq_violations(s);
  EXPECT_TRUE(mentions(v, "O_1"));
  EXPECT_TRUE(mentions(v, "M_2"));
  EXPECT_GE(v.size(), 2u);
}

TEST(LqSpec, ValidGameAccepted) { EXPECT_TRUE(lq_violations(lq_game_spec()).empty()); }

TEST(EquilibriumControls, ZeroAdjointsZeroControls) {
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 8);
  const ControlPair u = equilibrium_controls(lq_game_spec(), constant_triple(g, 5, 0, 0, 0), g);
  for (int j = 0; j <= 8; ++j) {
    EXPECT_EQ(u.u1.at(j).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(u.u2.at(j).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(EquilibriumControls, ScalarArithmetic) {
  LqModelSpec s = lq_game_spec();
  s.sys.B1 = S(1.0);
  s.sys.D1 = S(0.0);
  s.sys.H1 = S(0.0);
  s.w1.R = S(-1.0);
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 8);
  const ControlPair u = equilibrium_controls(s, constant_triple(g, 3, 0.7, 2.0, 0.4), g);
  for (int j = 0; j <= 8; ++j) EXPECT_DOUBLE_EQ(u.u1.at(j)(1, 0), 2.0);
}

TEST(FixedPoint, DecoupledZeroData) {
  LqModelSpec s;
  s.dims = {1, 1, 1, 1};
  s.sys = LinearCoefficients::zeros(s.dims);
  s.sys.A = S(0.2);
  s.sys.C = S(0.1);
  s.sys.xi = {TimeFunction(1.0)};
  s.sys.phi = {TimeFunction(0.0)};
  s.w1 = PlayerWeights::zeros(s.dims, 1);
  s.w2 = PlayerWeights::zeros(s.dims, 2);
  s.w1.R = S(-1.0);
  s.w2.R = S(-2.0);
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 20);
  const PathBundle b = sample_paths(g, 300, 1);
  const LqSolution sol = solve_lq_fixed_point(s, g, b, ObservedBasis{});
  EXPECT_EQ(sol.iterations, 1);
  for (int j = 0; j <= 20; ++j) EXPECT_EQ(sol.controls.u1.at(j).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FixedPoint, ConvergesOnCommutingSpec) {
  const TimeGrid g = TimeGrid::build(1.0, 0.2, 25);
  const PathBundle b = sample_paths(g, 3000, 2);
  ObservedBasis basis;
  basis.degree = 1;
  const LqSolution sol = solve_lq_fixed_point(h4a_spec(), g, b, basis, {0.5, 1e-6, 50});
  EXPECT_LE(sol.iterations, 50);
  EXPECT_LE(sol.residuals.back(), 1e-6);
}

TEST(FixedPoint, CandidateSatisfiesFirstOrderCondition) {
  const LqModelSpec spec = h4a_spec();
  const TimeGrid g = TimeGrid::build(1.0, 0.2, 25);
  const PathBundle b = sample_paths(g, 3000, 2);
  ObservedBasis basis;
  basis.degree = 1;
  const LqSolution sol = solve_lq_fixed_point(spec, g, b, basis);
  const LinearModel model = lq_game_model(spec);
  const QuadraticCosts costs = lq_costs(spec);
  const StateSolution st = solve_state(model, sol.controls, g, b, basis);
  const FeatureProvider obs = observed_features(g, b, {&sol.filtered.x});
  for (int i = 1; i <= 2; ++i) {
    const FirstOrderStats fo = check_first_order(i, model, costs, st, filtered_adjoint(sol.filtered, i),
                                                 sol.controls, default_directions(1, 1.0), g, obs, basis);
    EXPECT_LE(fo.statistic, 3.0);
  }
}

TEST(FixedPoint, IterationCapReported) {
  const TimeGrid g = TimeGrid::build(1.0, 0.2, 25);
  const PathBundle b = sample_paths(g, 1000, 2);
  ObservedBasis basis;
  basis.degree = 1;
  try {
    solve_lq_fixed_point(lq_game_spec(), g, b, basis, {0.5, 1e-6, 2});
    FAIL() << "two iterations should not reach 1e-6";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.history().size(), 2u);
  }
}

TEST(FixedPoint, RiccatiValueSmallRun) {
  const RiccatiCase rc;
  const LqModelSpec spec = riccati_spec(rc);
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 100);
  const PathBundle b = sample_paths(g, 4000, 13);
  ObservedBasis basis;
  basis.degree = 1;
  const LqSolution sol = solve_lq_fixed_point(spec, g, b, basis);
  const CostEstimate j = eval_cost(1, lq_game_model(spec), lq_costs(spec), sol.controls, g, b, basis);
  EXPECT_NEAR(j.value, riccati_value(rc), 0.02 * std::abs(riccati_value(rc)));
}

TEST(H4, RejectsNonCommutingOrNonZeroBlocks) {
  const TimeGrid g = TimeGrid::build(1.0, 0.2, 25);
  EXPECT_THROW(check_h4(lq_game_spec(), H4Case::A, g), std::invalid_argument);
  EXPECT_NO_THROW(check_h4(h4a_spec(), H4Case::A, g));
}

TEST(H4, ZeroAggregationLeavesHomogeneousState) {
  LqModelSpec s = h4a_spec();
  s.sys.B1 = S(0.0);
  s.sys.B2 = S(0.0);
  const TimeGrid g = TimeGrid::build(1.0, 0.2, 25);
  const PathBundle b = sample_paths(g, 1000, 3);
  ObservedBasis basis;
  basis.degree = 1;
  const DoubleSystem d = solve_dfbsdde(s, g, b, basis);
  const FilteredTriple f = solve_filtered_system(s, ControlPair::zeros(25, 1000, 1, 1), g, b, basis);
  EXPECT_LE(relative_l2(d.x, f.x, 0, 25), 1e-12);
}

TEST(H4, CrossCheckAgrees) {
  const TimeGrid g = TimeGrid::build(1.0, 0.2, 25);
  const PathBundle b = sample_paths(g, 2000, 3);
  ObservedBasis basis;
  basis.degree = 1;
  const H4Report r = crosscheck_h4(h4a_spec(), H4Case::A, g, b, basis);
  EXPECT_TRUE(r.solved);
  EXPECT_LE(r.rel_p, 1e-2);
  EXPECT_LE(r.rel_x, 1e-2);
}

TEST(H4, NoiselessSpecQuadratureOnly) {
  LqModelSpec s = h4a_spec();
  s.sys.C = S(0.0);
  s.sys.Cbar = S(0.0);
  s.sys.s0 = S(0.0);
  s.sys.sw0 = S(0.0);
  const TimeGrid g = TimeGrid::build(1.0, 0.2, 25);
  const PathBundle b = sample_paths(g, 50, 3);
  ObservedBasis basis;
  basis.degree = 1;
  const H4Report r = crosscheck_h4(s, H4Case::A, g, b, basis, {0.5, 1e-10, 400});
  EXPECT_LE(r.rel_x, 1e-8);
  EXPECT_LE(r.rel_p, 1e-8);
}
