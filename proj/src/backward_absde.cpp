#include "delaygame/backward_absde.hpp"

#include <algorithm>
#include <cmath>

#include "delaygame/forward_sdde.hpp"

namespace delaygame {

namespace {

Mat terminal_path_rows(const BackwardSpec& spec, double t, int paths) {
  if (!spec.terminal_path) return Mat::Zero(paths, spec.dim);
  const Vec v = spec.terminal_path(t);
  if (v.size() != spec.dim) throw std::invalid_argument("terminal path has the wrong dimension");
  return v.transpose().replicate(paths, 1);
}

BackwardTrajectory solve_core(const BackwardSpec& spec, const TimeGrid& grid,
                              const PathBundle& paths, const ConditionalEstimator& estimator,
                              bool anticipate) {
  const int n_steps = grid.steps();
  const int k = grid.delay_steps();
  const int m_paths = paths.paths;
  const int dim = spec.dim;
  const double h = grid.step();
  if (spec.terminal.rows() != m_paths || spec.terminal.cols() != dim) {
    throw std::invalid_argument("backward solver: terminal value must be paths x dim");
  }
  if (!spec.driver) throw std::invalid_argument("backward solver: driver missing");
  if (anticipate && !spec.anticipation) {
    throw std::invalid_argument("backward solver: anticipation map missing");
  }
  const bool with_bar = spec.use_wbar && paths.has_wbar();

  BackwardTrajectory out;
  out.y = Trajectory(0, n_steps + k, m_paths, dim);
  out.z = Trajectory(0, n_steps, m_paths, dim);
  out.z_bar = Trajectory(0, n_steps, m_paths, dim);
  out.y.at(n_steps) = spec.terminal;
  require_finite(spec.terminal, "terminal value", n_steps);
  for (int i = n_steps + 1; i <= n_steps + k; ++i)
    out.y.at(i) = terminal_path_rows(spec, grid.time(i), m_paths);
  out.psi = spec.terminal;

  const Mat zeros = Mat::Zero(m_paths, dim);
  const Mat no_anticipation(m_paths, 0);
  std::vector<Mat> anticipated(static_cast<std::size_t>(n_steps));

  for (int e = n_steps; e > 0; e -= k) out.seams.push_back(e);
  out.seams.push_back(0);

  // Interval recursion: each block [e - k, e] only reads values at or after e.
  for (std::size_t s = 0; s + 1 < out.seams.size(); ++s) {
    const int end = out.seams[s];
    const int start = std::max(end - k, 0);
    for (int j = end - 1; j >= start; --j) {
      const Projector& proj = estimator.at(j);
      const Mat& y_next = out.y.at(j + 1);

      Mat psi_future;
      if (anticipate) {
        const int i = j + k;
        if (i >= n_steps) {
          const Mat y_post = terminal_path_rows(spec, grid.time(i), m_paths);
          psi_future = spec.anticipation({i, grid.time(i), true, y_post, zeros, zeros});
        } else {
          psi_future = spec.anticipation(
              {i, grid.time(i), false, out.y.at(i), out.z.at(i), out.z_bar.at(i)});
        }
        if (psi_future.rows() != m_paths) {
          throw std::invalid_argument("backward solver: anticipation map returned wrong row count");
        }
      }
      const Eigen::Index a_cols = anticipate ? psi_future.cols() : 0;
      const Eigen::Index bar_cols = with_bar ? dim : 0;
      Mat targets(m_paths, dim + bar_cols + a_cols);
      targets.leftCols(dim) = y_next.array().colwise() * paths.dw.col(j).array();
      if (with_bar)
        targets.middleCols(dim, dim) = y_next.array().colwise() * paths.dwbar.col(j).array();
      if (a_cols > 0) targets.rightCols(a_cols) = psi_future;
      const Mat fitted = proj.apply(targets);

      Mat z = fitted.leftCols(dim) / h;
      Mat z_bar = with_bar ? Mat(fitted.middleCols(dim, dim) / h) : zeros;
      // A deterministic y_next has no martingale part; keep the regression noise out of z.
      for (int c = 0; c < dim; ++c) {
        const double lo = y_next.col(c).minCoeff(), hi = y_next.col(c).maxCoeff();
        if (hi - lo <= 1e-10 * std::max({1.0, std::abs(hi), std::abs(lo)})) {
          z.col(c).setZero();
          z_bar.col(c).setZero();
        }
      }
      Mat ant = a_cols > 0 ? Mat(fitted.rightCols(a_cols)) : no_anticipation;

      const Mat f = spec.driver({j, grid.time(j), y_next, z, z_bar, ant});
      if (f.rows() != m_paths || f.cols() != dim) {
        throw std::invalid_argument("backward solver: driver returned wrong shape");
      }
      require_finite(f, "driver value", j);
      Mat y = proj.apply(Mat(y_next + h * f));
      require_finite(y, "backward state", j);
      out.psi += h * f;
      out.y.at(j) = std::move(y);
      out.z.at(j) = std::move(z);
      out.z_bar.at(j) = std::move(z_bar);
      anticipated[static_cast<std::size_t>(j)] = std::move(ant);
    }
  }
  out.z.at(n_steps) = out.z.at(n_steps - 1);
  out.z_bar.at(n_steps) = out.z_bar.at(n_steps - 1);

  const int a_dim = n_steps > 0 ? static_cast<int>(anticipated.front().cols()) : 0;
  out.anticipated = Trajectory(0, std::max(n_steps - 1, 0), m_paths, a_dim);
  for (int j = 0; j < n_steps; ++j) out.anticipated.at(j) = std::move(anticipated[static_cast<std::size_t>(j)]);
  return out;
}

}  // namespace

BackwardTrajectory solve_bsde(const BackwardSpec& spec, const TimeGrid& grid,
                              const PathBundle& paths, const ConditionalEstimator& estimator) {
  return solve_core(spec, grid, paths, estimator, false);
}

BackwardTrajectory solve_absde(const BackwardSpec& spec, const TimeGrid& grid,
                               const PathBundle& paths, const ConditionalEstimator& estimator) {
  return solve_core(spec, grid, paths, estimator, true);
}

double DelayedOdeSolution::at(double t) const {
  if (values.empty()) return 0.0;
  const double u = std::clamp(t / horizon, 0.0, 1.0) * steps;
  const int lo = std::min(static_cast<int>(std::floor(u)), steps - 1);
  const double w = u - lo;
  return (1.0 - w) * values[static_cast<std::size_t>(lo)] + w * values[static_cast<std::size_t>(lo + 1)];
}

DelayedOdeSolution solve_delayed_ode(const std::function<double(double)>& rate, double alpha,
                                     double terminal, double horizon, double delay, int fine_steps) {
  const TimeGrid fine = TimeGrid::build(horizon, delay, fine_steps);
  const int n = fine.steps();
  const int k = fine.delay_steps();
  const double h = fine.step();
  DelayedOdeSolution sol;
  sol.horizon = horizon;
  sol.steps = n;
  sol.values.assign(static_cast<std::size_t>(n + 1), 0.0);
  sol.values[static_cast<std::size_t>(n)] = terminal;
  // y(s + delta) vanishes for s + delta > T, so the left end of a step uses the right limit.
  auto ahead = [&](int i, bool right_limit) {
    return (right_limit ? i < n : i <= n) ? sol.values[static_cast<std::size_t>(i)] : 0.0;
  };
  // Crank-Nicolson, implicit in the local term.
  for (int j = n - 1; j >= 0; --j) {
    const double c0 = rate(fine.time(j));
    const double c1 = rate(fine.time(j + 1));
    const double rhs = sol.values[static_cast<std::size_t>(j + 1)] * (1.0 + 0.5 * h * c1) +
                       0.5 * h * alpha * (ahead(j + k, true) + ahead(j + 1 + k, false));
    sol.values[static_cast<std::size_t>(j)] = rhs / (1.0 - 0.5 * h * c0);
  }
  return sol;
}

}  // namespace delaygame
