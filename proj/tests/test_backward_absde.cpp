#include <cmath>

#include <gtest/gtest.h>

#include "delaygame/backward_absde.hpp"
#include "fixtures.hpp"

using namespace delaygame;
using namespace delaygame::testing;

namespace {

ConditionalEstimator w_estimator(const TimeGrid& grid, const PathBundle& paths) {
  const Mat W = brownian_levels(paths, Noise::W);
  const Mat Wb = brownian_levels(paths, Noise::WBar);
  (void)grid;
  return ConditionalEstimator(
      [W, Wb](int j) {
        Mat f(W.rows(), 2);
        f << W.col(j), Wb.col(j);
        return f;
      },
      ObservedBasis{});
}

BackwardSpec constant_driver(int paths, double terminal, double c) {
  BackwardSpec s;
  s.terminal = Mat::Constant(paths, 1, terminal);
  s.driver = [c](const BackwardStepInput& in) { return Mat::Constant(in.y_next.rows(), 1, c); };
  s.anticipation = [](const AnticipationView& v) { return v.y; };
  return s;
}

}  // namespace

TEST(SolveBsde, DeterministicTerminalZeroDriver) {
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 20);
  const PathBundle b = sample_paths(g, 400, 3);
  const auto est = w_estimator(g, b);
  const BackwardTrajectory r = solve_bsde(constant_driver(400, 2.0, 0.0), g, b, est);
  for (int j = 0; j <= g.steps(); ++j) {
    EXPECT_LE((r.y.at(j).array() - 2.0).abs().maxCoeff(), 1e-12);
    EXPECT_TRUE((r.z.at(j).array() == 0.0).all());
    EXPECT_TRUE((r.z_bar.at(j).array() == 0.0).all());
  }
}

TEST(SolveBsde, ConstantDriverIntegrates) {
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 20);
  const PathBundle b = sample_paths(g, 300, 3);
  const auto est = w_estimator(g, b);
  const BackwardTrajectory r = solve_bsde(constant_driver(300, 0.0, 0.7), g, b, est);
  for (int j = 0; j <= g.steps(); ++j) {
    EXPECT_LE((r.y.at(j).array() - 0.7 * (1.0 - g.time(j))).abs().maxCoeff(), 1e-12);
    EXPECT_TRUE((r.z.at(j).array() == 0.0).all());
  }
  EXPECT_NEAR(r.psi.mean(), r.y.at(0).mean(), 1e-12);
}

TEST(SolveBsde, MartingaleRepresentation) {
  // y = E_t[W(T)] = W(t), z = 1.
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 20);
  const PathBundle b = sample_paths(g, 20000, 5);
  const auto est = w_estimator(g, b);
  BackwardSpec s;
  s.terminal = brownian_levels(b, Noise::W).col(g.steps());
  s.driver = [](const BackwardStepInput& in) { return Mat::Zero(in.y_next.rows(), 1); };
  const BackwardTrajectory r = solve_bsde(s, g, b, est);
  EXPECT_NEAR(r.z.at(5).mean(), 1.0, 0.05);
  EXPECT_NEAR(r.z_bar.at(5).mean(), 0.0, 0.05);
  // Projections keep sample means, so y(0) is the sample mean of W(T).
  EXPECT_NEAR(r.y.at(0).mean(), s.terminal.mean(), 1e-12);
}

TEST(SolveAbsde, ZeroAnticipationMatchesBsde) {
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 20);
  const PathBundle b = sample_paths(g, 1000, 6);
  const auto est = w_estimator(g, b);
  BackwardSpec s;
  const Mat W = brownian_levels(b, Noise::W);
  s.terminal = W.col(g.steps()).array().square().matrix();
  s.driver = [](const BackwardStepInput& in) -> Mat { return 0.1 * in.y_next + 0.2 * in.z; };
  s.anticipation = [](const AnticipationView& v) { return v.y; };
  const BackwardTrajectory a = solve_absde(s, g, b, est);
  const BackwardTrajectory c = solve_bsde(s, g, b, est);
  for (int j = 0; j <= g.steps(); ++j) {
    EXPECT_LE((a.y.at(j) - c.y.at(j)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((a.z.at(j) - c.z.at(j)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SolveAbsde, DeterministicDelayedDriverMatchesOde) {
  const double rate = 0.02, alpha = 0.1;
  const TimeGrid g = TimeGrid::build(1.0, 0.4, 400);
  const PathBundle b = sample_paths(g, 50, 6);
  const auto est = w_estimator(g, b);
  BackwardSpec s;
  s.terminal = Mat::Ones(50, 1);
  s.driver = [&](const BackwardStepInput& in) -> Mat {
    return rate * in.y_next + alpha * in.anticipated;
  };
  s.anticipation = [](const AnticipationView& v) { return v.y; };
  const BackwardTrajectory r = solve_absde(s, g, b, est);
  const DelayedOdeSolution ode = solve_delayed_ode([&](double) { return rate; }, alpha, 1.0, 1.0, 0.4, 4000);
  for (int j = 0; j <= g.steps(); j += 10)
    EXPECT_NEAR(r.y.at(j)(0, 0), ode.at(g.time(j)), 1e-3) << "t = " << g.time(j);
  EXPECT_EQ(r.seams.front(), 400);
  EXPECT_EQ(r.seams.back(), 0);
}

TEST(SolveAbsde, ZeroData) {
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 20);
  const PathBundle b = sample_paths(g, 200, 6);
  const auto est = w_estimator(g, b);
  BackwardSpec s;
  s.terminal = Mat::Zero(200, 1);
  s.driver = [](const BackwardStepInput& in) -> Mat { return 0.3 * in.y_next + 0.5 * in.z + in.anticipated; };
  s.anticipation = [](const AnticipationView& v) { return v.y; };
  const BackwardTrajectory r = solve_absde(s, g, b, est);
  for (int j = 0; j <= g.steps(); ++j) {
    EXPECT_TRUE((r.y.at(j).array() == 0.0).all());
    EXPECT_TRUE((r.z.at(j).array() == 0.0).all());
    EXPECT_TRUE((r.z_bar.at(j).array() == 0.0).all());
  }
}

TEST(DelayedOde, PlainLinear) {
  const DelayedOdeSolution s = solve_delayed_ode([](double) { return 0.3; }, 0.0, 1.0, 1.0, 0.25, 2000);
  for (double t : {0.0, 0.3, 0.77, 1.0}) EXPECT_NEAR(s.at(t), std::exp(0.3 * (1.0 - t)), 1e-6);
}

TEST(DelayedOde, ZeroNetRateLastInterval) {
  const DelayedOdeSolution s = solve_delayed_ode([](double) { return 0.0; }, 0.1, 1.0, 1.0, 0.25, 400);
  for (int i = 300; i <= 400; ++i) EXPECT_DOUBLE_EQ(s.values[static_cast<std::size_t>(i)], 1.0);
}

TEST(DelayedOde, MethodOfStepsClosedForm) {
  const DelayedOdeSolution s = solve_delayed_ode([](double) { return 0.02; }, 0.1, 1.0, 1.0, 0.4, 4000);
  for (double t : {0.0, 0.1, 0.2, 0.35, 0.6, 0.9})
    EXPECT_NEAR(s.at(t), delayed_ode_exact(0.02, 0.1, 1.0, 0.4, t), 1e-8) << "t = " << t;
}
