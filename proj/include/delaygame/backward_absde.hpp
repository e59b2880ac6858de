#ifndef DELAYGAME_BACKWARD_ABSDE_HPP
#define DELAYGAME_BACKWARD_ABSDE_HPP

#include <functional>
#include <vector>

#include "delaygame/stochastic_engine.hpp"

namespace delaygame {

// What the driver sees at grid index j: y at j + 1 (explicit scheme), the z estimates at j
// and the conditional expectation of the anticipated quantity.
struct BackwardStepInput {
  int index;
  double t;
  const Mat& y_next;
  const Mat& z;
  const Mat& z_bar;
  const Mat& anticipated;
};

// Solution values at an already solved index i, handed to the anticipation map.
// For i >= N the values are the terminal-path extension (z = z_bar = 0).
struct AnticipationView {
  int index;
  double t;
  bool post_terminal;
  const Mat& y;
  const Mat& z;
  const Mat& z_bar;
};

struct BackwardSpec {
  int dim = 1;
  Mat terminal;                              // paths x dim, y at T
  std::function<Vec(double)> terminal_path;  // phi on (T, T + delta]; zero when empty
  std::function<Mat(const BackwardStepInput&)> driver;
  // Quantity whose conditional expectation at t enters the driver; it is read at t + delta.
  std::function<Mat(const AnticipationView&)> anticipation;
  bool use_wbar = true;
};

struct BackwardTrajectory {
  Trajectory y;            // [0, N + k]
  Trajectory z;            // [0, N], z_N repeats z_{N-1}
  Trajectory z_bar;        // [0, N]
  Trajectory anticipated;  // [0, N - 1]
  Mat psi;                 // per-path y_N + sum_j h F_j; its mean is y_0
  std::vector<int> seams;  // grid indices T - n delta that start each recursion interval
};

BackwardTrajectory solve_bsde(const BackwardSpec& spec, const TimeGrid& grid,
                              const PathBundle& paths, const ConditionalEstimator& estimator);

BackwardTrajectory solve_absde(const BackwardSpec& spec, const TimeGrid& grid,
                               const PathBundle& paths, const ConditionalEstimator& estimator);

// Fine-grid solution of y' = -c(t) y - alpha y(t + delta) on [0, T], y(T) = terminal,
// y = 0 on (T, T + delta].
struct DelayedOdeSolution {
  double horizon = 0.0;
  int steps = 0;
  std::vector<double> values;  // on the fine grid, index 0 is t = 0

  double at(double t) const;
};

DelayedOdeSolution solve_delayed_ode(const std::function<double(double)>& rate, double alpha,
                                     double terminal, double horizon, double delay, int fine_steps);

}  // namespace delaygame

#endif  // DELAYGAME_BACKWARD_ABSDE_HPP
