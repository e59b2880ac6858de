#include "delaygame/forward_sdde.hpp"

#include <cmath>

namespace delaygame {

void require_finite(const Mat& values, const std::string& what, int time_index) {
  if (values.allFinite()) return;
  for (Eigen::Index p = 0; p < values.rows(); ++p)
    if (!values.row(p).allFinite())
      throw NumericalError("non-finite " + what, time_index, static_cast<int>(p));
}

Trajectory solve_forward(const GameModel& model, const ControlPair& controls, const TimeGrid& grid,
                         const PathBundle& paths) {
  const Dimensions dim = model.dims();
  const int n_steps = grid.steps();
  const int k = grid.delay_steps();
  const double h = grid.step();
  if (paths.steps != n_steps) throw std::invalid_argument("solve_forward: bundle/grid step mismatch");
  if (controls.u1.first() > 0 || controls.u1.last() < n_steps - 1 || controls.u2.first() > 0 ||
      controls.u2.last() < n_steps - 1) {
    throw std::invalid_argument("solve_forward: controls must cover grid indices 0..N-1");
  }
  if (controls.u1.dim() != dim.k1 || controls.u2.dim() != dim.k2) {
    throw std::invalid_argument("solve_forward: control dimension does not match the model");
  }

  Trajectory x(-k, n_steps, paths.paths, dim.n);
  for (int j = -k; j <= 0; ++j) {
    const Vec xi = model.initial_path(grid.time(j));
    x.at(j) = xi.transpose().replicate(paths.paths, 1);
  }
  for (int j = 0; j < n_steps; ++j) {
    const ForwardBatch c =
        model.forward_batch(grid.time(j), x.at(j), x.at(j - k), controls.u1.at(j), controls.u2.at(j));
    Mat next = x.at(j) + h * c.b;
    for (int col = 0; col < dim.n; ++col) {
      next.col(col).array() += c.sigma.col(col).array() * paths.dw.col(j).array();
      if (paths.has_wbar())
        next.col(col).array() += c.sigma_bar.col(col).array() * paths.dwbar.col(j).array();
    }
    require_finite(next, "forward state", j + 1);
    x.at(j + 1) = std::move(next);
  }
  return x;
}

Trajectory exact_linear_reference(double a, double s, double x0, const TimeGrid& grid,
                                  const PathBundle& paths) {
  const int k = grid.delay_steps();
  Trajectory x(-k, grid.steps(), paths.paths, 1);
  for (int j = -k; j <= 0; ++j) x.at(j).setConstant(x0);
  Vec w = Vec::Zero(paths.paths);
  for (int j = 1; j <= grid.steps(); ++j) {
    w += paths.dw.col(j - 1);
    const double t = grid.time(j);
    x.at(j).col(0) = x0 * ((a - 0.5 * s * s) * t + s * w.array()).exp();
  }
  return x;
}

Mat linear_sde_step(const Mat& p, const Mat& a, const Mat& c, const Mat& cb, const Mat& f,
                    const Mat& d, const Mat& db, const Eigen::Ref<const Vec>& dw,
                    const Eigen::Ref<const Vec>& dwbar, double h) {
  const Eigen::Index m = p.cols();
  const bool has_bar = dwbar.size() == dw.size();
  if (m == 1) {
    const double a0 = a(0, 0), c0 = c(0, 0), cb0 = cb(0, 0);
    Eigen::ArrayXd expo = (a0 - 0.5 * c0 * c0) * h + c0 * dw.array();
    // Ito correction for the cross variation of the multiplicative and additive noise.
    Eigen::ArrayXd inner = p.col(0).array() + (f.col(0).array() - c0 * d.col(0).array()) * h +
                           d.col(0).array() * dw.array();
    if (has_bar) {
      expo += -0.5 * cb0 * cb0 * h + cb0 * dwbar.array();
      inner += -cb0 * db.col(0).array() * h + db.col(0).array() * dwbar.array();
    }
    return (expo.exp() * inner).matrix();
  }
  Mat next = p + (p * a.transpose() + f) * h;
  const Mat diff = p * c.transpose() + d;
  next += (diff.array().colwise() * dw.array()).matrix();
  if (has_bar) {
    const Mat diff_bar = p * cb.transpose() + db;
    next += (diff_bar.array().colwise() * dwbar.array()).matrix();
  }
  return next;
}

}  // namespace delaygame
