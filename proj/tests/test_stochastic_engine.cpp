#include <cmath>

#include <gtest/gtest.h>

#include "delaygame/stochastic_engine.hpp"

using namespace delaygame;

TEST(TimeGrid, StepAndDelaySteps) {
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 8);
  EXPECT_DOUBLE_EQ(g.step(), 0.125);
  EXPECT_EQ(g.delay_steps(), 2);
  EXPECT_EQ(g.first_index(), -2);
  EXPECT_EQ(g.last_index(), 10);

  const TimeGrid g2 = TimeGrid::build(2.0, 0.5, 400);
  EXPECT_DOUBLE_EQ(g2.step(), 0.005);
  EXPECT_EQ(g2.delay_steps(), 100);
}

TEST(TimeGrid, RejectsMisalignedDelay) {
  try {
    TimeGrid::build(1.0, 0.3, 8);
    FAIL() << "misaligned delay accepted";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("not a multiple"), std::string::npos);
  }
}

TEST(TimeGrid, RejectsDegenerateInputs) {
  EXPECT_THROW(TimeGrid::build(1.0, 1.0, 8), std::invalid_argument);
  EXPECT_THROW(TimeGrid::build(1.0, 0.0, 8), std::invalid_argument);
  EXPECT_THROW(TimeGrid::build(-1.0, 0.25, 8), std::invalid_argument);
  EXPECT_THROW(TimeGrid::build(1.0, 0.75, 4), std::invalid_argument);  // n < 2k
}

TEST(SamplePaths, Reproducible) {
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 20);
  const PathBundle a = sample_paths(g, 50, 9);
  const PathBundle b = sample_paths(g, 50, 9);
  EXPECT_EQ(a.dw.cols(), 20);
  EXPECT_TRUE((a.dw.array() == b.dw.array()).all());
  EXPECT_TRUE((a.dwbar.array() == b.dwbar.array()).all());
  const PathBundle c = sample_paths(g, 50, 10);
  EXPECT_FALSE((a.dw.array() == c.dw.array()).all());
}

TEST(SamplePaths, PathIndependentOfBundleSize) {
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 20);
  const PathBundle small = sample_paths(g, 5, 3);
  const PathBundle large = sample_paths(g, 50, 3);
  EXPECT_TRUE((small.dw.array() == large.dw.topRows(5).array()).all());
}

TEST(SamplePaths, ReseedKeepsW) {
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 20);
  const PathBundle a = sample_paths(g, 50, 9);
  PathBundle b = a;
  reseed_wbar(b, 77);
  EXPECT_TRUE((a.dw.array() == b.dw.array()).all());
  EXPECT_FALSE((a.dwbar.array() == b.dwbar.array()).all());
}

TEST(SamplePaths, IncrementMomentsLargeSample) {
  const int m = 100000;
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 100);
  const PathBundle b = sample_paths(g, m, 1);
  const double h = g.step();
  const double bound = 4.0 * std::sqrt(h / m);
  for (int j = 0; j < g.steps(); ++j) {
    EXPECT_LE(std::abs(b.dw.col(j).mean()), bound) << "column " << j;
    EXPECT_LE(std::abs(b.dwbar.col(j).mean()), bound) << "column " << j;
  }
  const Vec wT = b.dw.rowwise().sum();
  const double var = (wT.array() - wT.mean()).square().sum() / (m - 1);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Projector, ConstantTargets) {
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 12);
  const PathBundle b = sample_paths(g, 500, 2);
  const Mat W = brownian_levels(b, Noise::W);
  const Vec est = estimate_conditional(Vec::Constant(500, 3.5), 5, W.col(5), ObservedBasis{});
  EXPECT_LE((est.array() - 3.5).abs().maxCoeff(), 1e-12);
}

TEST(Projector, TargetInSpan) {
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 12);
  const PathBundle b = sample_paths(g, 2000, 2);
  const Vec w = brownian_levels(b, Noise::W).col(6);
  const Vec target = w.array().square();
  ObservedBasis basis;
  basis.degree = 2;
  basis.ridge = 0.0;
  const Vec est = estimate_conditional(target, 6, w, basis);
  EXPECT_LE((est - target).cwiseAbs().maxCoeff(), 1e-8);
  // The default ridge only shrinks the fit slightly.
  const Vec shrunk = estimate_conditional(target, 6, w, ObservedBasis{});
  EXPECT_LE((shrunk - target).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Projector, MartingaleProjection) {
  const int m = 20000;
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 20);
  const PathBundle b = sample_paths(g, m, 4);
  const Mat W = brownian_levels(b, Noise::W);
  const int j = 8;
  const double t = g.time(j);
  const Vec est = estimate_conditional(W.col(g.steps()), j, W.col(j), ObservedBasis{});
  const double rms = std::sqrt((est - W.col(j)).squaredNorm() / m);
  EXPECT_LE(rms, 3.0 * std::sqrt((1.0 - t) / m) * 4.0);
}

TEST(Projector, CollinearPolicy) {
  const TimeGrid g = TimeGrid::build(1.0, 0.25, 12);
  const PathBundle b = sample_paths(g, 300, 2);
  const Vec w = brownian_levels(b, Noise::W).col(4);
  Mat f(300, 2);
  f << w, 2.0 * w;
  ObservedBasis strict;
  strict.collinear = CollinearPolicy::Error;
  try {
    Projector p(f, strict, {"W", "twice W"});
    FAIL() << "collinear design accepted";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("twice W"), std::string::npos);
  }
  ObservedBasis lenient;
  lenient.collinear = CollinearPolicy::Drop;
  const Projector p(f, lenient);
  EXPECT_EQ(p.kept_features().size(), 1u);
}

TEST(Projector, DeterministicFeatureDropped) {
  Mat f(100, 2);
  f.col(0).setConstant(2.0);
  f.col(1) = Vec::LinSpaced(100, -1.0, 1.0);
  const Projector p(f, ObservedBasis{});
  ASSERT_EQ(p.kept_features().size(), 1u);
  EXPECT_EQ(p.kept_features()[0], 1);
}

TEST(SampleStats, MeanAndError) {
  Vec v(4);
  v << 1.0, 2.0, 3.0, 4.0;
  const SampleStats s = sample_stats(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.se, std::sqrt((1.25 * 4 / 3.0) / 4.0), 1e-15);
}
