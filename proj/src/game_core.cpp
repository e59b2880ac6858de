#include "delaygame/game_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>

#include "delaygame/forward_sdde.hpp"

namespace delaygame {

namespace {

struct Jacobians {
  ForwardJacobian f;
  DriverJacobian d;
};

// Jacobians of all paths at one grid time; a single copy when they do not depend on state.
class JacobianSlice {
 public:
  JacobianSlice(const GameModel& model, double t, const Mat& x, const Mat& xd, const Mat& y,
                const Mat& z, const Mat& zb, const Mat& ya, const Mat& v1, const Mat& v2)
      : shared_(model.state_independent_jacobians()) {
    const Eigen::Index count = shared_ ? 1 : x.rows();
    jac_.reserve(static_cast<std::size_t>(count));
    StatePoint s;
    for (Eigen::Index p = 0; p < count; ++p) {
      s.x = x.row(p).transpose();
      s.x_delay = xd.row(p).transpose();
      s.y = y.row(p).transpose();
      s.z = z.row(p).transpose();
      s.z_bar = zb.row(p).transpose();
      s.y_ant = ya.cols() > 0 ? Vec(ya.row(p).transpose()) : Vec(Vec::Zero(y.cols()));
      const Vec u1 = v1.row(p).transpose();
      const Vec u2 = v2.row(p).transpose();
      jac_.push_back({model.forward_jacobian(t, s.x, s.x_delay, u1, u2),
                      model.driver_jacobian(t, s, u1, u2)});
    }
  }

  // Rows r_p^T J_p, i.e. the transpose of J_p^T r_p.
  template <class Get>
  Mat rows_times(const Mat& rows, Get get) const {
    if (shared_) return rows * get(jac_.front());
    const Mat& first = get(jac_.front());
    Mat out(rows.rows(), first.cols());
    for (Eigen::Index p = 0; p < rows.rows(); ++p)
      out.row(p) = rows.row(p) * get(jac_[static_cast<std::size_t>(p)]);
    return out;
  }

  // Rows (J_p r_p)^T.
  template <class Get>
  Mat rows_times_transpose(const Mat& rows, Get get) const {
    if (shared_) return rows * get(jac_.front()).transpose();
    const Mat& first = get(jac_.front());
    Mat out(rows.rows(), first.rows());
    for (Eigen::Index p = 0; p < rows.rows(); ++p)
      out.row(p) = rows.row(p) * get(jac_[static_cast<std::size_t>(p)]).transpose();
    return out;
  }

  bool shared() const { return shared_; }
  const Jacobians& at(Eigen::Index p) const { return jac_[shared_ ? 0 : static_cast<std::size_t>(p)]; }

  template <class Get>
  bool all_zero(Get get) const {
    return std::all_of(jac_.begin(), jac_.end(), [&](const Jacobians& j) { return get(j).isZero(0.0); });
  }

 private:
  bool shared_;
  std::vector<Jacobians> jac_;
};

const Mat& control_at(const Trajectory& u, int j) { return u.at(std::min(j, u.last())); }

const Mat& anticipated_at(const StateSolution& s, int j, int n_steps, int k) {
  if (j < n_steps) return s.back.anticipated.at(j);
  return s.back.y.at(std::min(j + k, s.back.y.last()));
}

JacobianSlice slice_at(const GameModel& model, const StateSolution& s, const ControlPair& controls,
                       const TimeGrid& grid, int j) {
  const int n = grid.steps();
  const int k = grid.delay_steps();
  const int jz = std::min(j, n);
  return JacobianSlice(model, grid.time(j), s.x.at(j), s.x.at(j - k), s.back.y.at(j),
                       s.back.z.at(jz), s.back.z_bar.at(jz), anticipated_at(s, j, n, k),
                       control_at(controls.u1, j), control_at(controls.u2, j));
}

StatePoint state_point(const StateSolution& s, const TimeGrid& grid, int j, int p) {
  const int n = grid.steps();
  const int k = grid.delay_steps();
  const int jz = std::min(j, n);
  StatePoint sp;
  sp.x = s.x.point(j, p);
  sp.x_delay = s.x.point(j - k, p);
  sp.y = s.back.y.point(j, p);
  sp.z = s.back.z.point(jz, p);
  sp.z_bar = s.back.z_bar.point(jz, p);
  const Mat& ya = anticipated_at(s, j, n, k);
  sp.y_ant = ya.cols() > 0 ? Vec(ya.row(p).transpose()) : Vec(Vec::Zero(sp.y.size()));
  return sp;
}

struct CostRows {
  Mat lx, ly, lz, lzb, lv;
};

CostRows cost_rows(int player, const GameModel& model, const CostModel& costs,
                   const StateSolution& s, const ControlPair& controls, const TimeGrid& grid,
                   int j) {
  const Dimensions d = model.dims();
  const int m_paths = s.x.paths();
  const int kv = player == 1 ? d.k1 : d.k2;
  CostRows r{Mat(m_paths, d.n), Mat(m_paths, d.m), Mat(m_paths, d.m), Mat(m_paths, d.m),
             Mat(m_paths, kv)};
  const Mat& u1 = control_at(controls.u1, j);
  const Mat& u2 = control_at(controls.u2, j);
  for (int p = 0; p < m_paths; ++p) {
    const StatePoint sp = state_point(s, grid, j, p);
    const CostGradient g =
        costs.running_gradient(player, grid.time(j), sp, u1.row(p).transpose(), u2.row(p).transpose());
    r.lx.row(p) = g.l_x.transpose();
    r.ly.row(p) = g.l_y.transpose();
    r.lz.row(p) = g.l_z.transpose();
    r.lzb.row(p) = g.l_zb.transpose();
    r.lv.row(p) = (player == 1 ? g.l_v1 : g.l_v2).transpose();
  }
  return r;
}

ObservedBasis solver_basis(const ObservedBasis& basis) {
  ObservedBasis b = basis;
  b.collinear = CollinearPolicy::Drop;
  return b;
}

Vec rowwise_dot(const Mat& a, const Mat& b) { return (a.array() * b.array()).rowwise().sum(); }

}  // namespace

double hamiltonian(int player, double t, const StatePoint& s, const Vec& v1, const Vec& v2,
                   const AdjointPoint& a, const GameModel& model, const CostModel& costs) {
  const Dimensions d = model.dims();
  if (a.q.size() != d.n || a.k.size() != d.n || a.k_bar.size() != d.n || a.p.size() != d.m ||
      s.x.size() != d.n || s.y.size() != d.m || v1.size() != d.k1 || v2.size() != d.k2) {
    throw std::invalid_argument("hamiltonian: argument dimensions do not match the model");
  }
  const ForwardCoefficients c = model.forward(t, s.x, s.x_delay, v1, v2);
  return a.q.dot(c.b) + a.k.dot(c.sigma) + a.k_bar.dot(c.sigma_bar) -
         a.p.dot(model.driver(t, s, v1, v2)) + costs.running(player, t, s, v1, v2);
}

Vec hamiltonian_control_gradient(int player, double t, const StatePoint& s, const Vec& v1,
                                 const Vec& v2, const AdjointPoint& a, const GameModel& model,
                                 const CostModel& costs) {
  const Dimensions d = model.dims();
  if (a.q.size() != d.n || a.k.size() != d.n || a.k_bar.size() != d.n || a.p.size() != d.m ||
      v1.size() != d.k1 || v2.size() != d.k2) {
    throw std::invalid_argument("hamiltonian_control_gradient: dimension mismatch");
  }
  const ForwardJacobian fj = model.forward_jacobian(t, s.x, s.x_delay, v1, v2);
  const DriverJacobian dj = model.driver_jacobian(t, s, v1, v2);
  const CostGradient g = costs.running_gradient(player, t, s, v1, v2);
  if (player == 1) {
    return fj.b_v1.transpose() * a.q + fj.s_v1.transpose() * a.k + fj.sb_v1.transpose() * a.k_bar -
           dj.f_v1.transpose() * a.p + g.l_v1;
  }
  return fj.b_v2.transpose() * a.q + fj.s_v2.transpose() * a.k + fj.sb_v2.transpose() * a.k_bar -
         dj.f_v2.transpose() * a.p + g.l_v2;
}

FeatureProvider full_information_features(const Trajectory& x, const TimeGrid& grid,
                                          const PathBundle& paths,
                                          std::vector<const Trajectory*> extra) {
  auto w = std::make_shared<Mat>(brownian_levels(paths, Noise::W));
  std::shared_ptr<Mat> wb;
  if (paths.has_wbar()) wb = std::make_shared<Mat>(brownian_levels(paths, Noise::WBar));
  const int k = grid.delay_steps();
  const Trajectory* xp = &x;
  return [w, wb, k, xp, extra](int j) {
    Eigen::Index cols = 1 + (wb ? 1 : 0) + 2 * xp->dim();
    for (const Trajectory* e : extra) cols += e->dim();
    Mat f(w->rows(), cols);
    Eigen::Index c = 0;
    f.col(c++) = w->col(j);
    if (wb) f.col(c++) = wb->col(j);
    f.middleCols(c, xp->dim()) = xp->at(j);
    c += xp->dim();
    f.middleCols(c, xp->dim()) = xp->at(j - k);
    c += xp->dim();
    for (const Trajectory* e : extra) {
      f.middleCols(c, e->dim()) = e->at(j);
      c += e->dim();
    }
    return f;
  };
}

FeatureProvider observed_features(const TimeGrid& grid, const PathBundle& paths,
                                  std::vector<const Trajectory*> observed) {
  (void)grid;
  auto w = std::make_shared<Mat>(brownian_levels(paths, Noise::W));
  return [w, observed](int j) {
    Eigen::Index cols = 1;
    for (const Trajectory* e : observed) cols += e->dim();
    Mat f(w->rows(), cols);
    f.col(0) = w->col(j);
    Eigen::Index c = 1;
    for (const Trajectory* e : observed) {
      f.middleCols(c, e->dim()) = e->at(j);
      c += e->dim();
    }
    return f;
  };
}

StateSolution solve_state(const GameModel& model, const ControlPair& controls,
                          const TimeGrid& grid, const PathBundle& paths,
                          const ObservedBasis& basis) {
  StateSolution s;
  s.x = solve_forward(model, controls, grid, paths);
  const int n = grid.steps();
  ConditionalEstimator est(full_information_features(s.x, grid, paths), solver_basis(basis));
  BackwardSpec spec;
  spec.dim = model.dims().m;
  spec.terminal = model.terminal_batch(s.x.at(n));
  spec.terminal_path = [&model](double t) { return model.terminal_path(t); };
  spec.driver = [&](const BackwardStepInput& in) {
    return model.driver_batch(in.t, s.x.at(in.index), in.y_next, in.z, in.z_bar, in.anticipated,
                              controls.u1.at(in.index), controls.u2.at(in.index));
  };
  spec.anticipation = [](const AnticipationView& v) { return v.y; };
  s.back = solve_absde(spec, grid, paths, est);
  return s;
}

AdjointPoint AdjointTrajectory::point(int j, int path) const {
  return {p.point(j, path), q.point(j, path), k.point(j, path), k_bar.point(j, path)};
}

AdjointTrajectory assemble_and_solve_adjoint(int player, const GameModel& model,
                                             const CostModel& costs, const StateSolution& state,
                                             const ControlPair& controls, const TimeGrid& grid,
                                             const PathBundle& paths, const ObservedBasis& basis) {
  const Dimensions d = model.dims();
  const int n = grid.steps();
  const int k = grid.delay_steps();
  const int m_paths = paths.paths;
  const double h = grid.step();
  const bool with_bar = paths.has_wbar();

  AdjointTrajectory adj;
  adj.p = Trajectory(-k, n, m_paths, d.m);

  // p(0) = -gamma_y(y(0)), zero before 0.
  for (int p = 0; p < m_paths; ++p)
    adj.p.at(0).row(p) = -costs.initial_gradient(player, state.back.y.point(0, p)).transpose();

  for (int j = 0; j < n; ++j) {
    const JacobianSlice now = slice_at(model, state, controls, grid, j);
    const CostRows cr = cost_rows(player, model, costs, state, controls, grid, j);
    Mat inhom = -cr.ly;
    if (j - k >= 0) {
      const JacobianSlice past = slice_at(model, state, controls, grid, j - k);
      inhom += past.rows_times(adj.p.at(j - k), [](const Jacobians& J) -> const Mat& { return J.d.f_yp; });
    }
    const Mat d_w = -cr.lz;
    const Mat d_wb = -cr.lzb;
    const auto dw = paths.dw.col(j);
    const Vec dwb = with_bar ? Vec(paths.dwbar.col(j)) : Vec();
    if (now.shared()) {
      const Jacobians& J = now.at(0);
      adj.p.at(j + 1) = linear_sde_step(adj.p.at(j), J.d.f_y.transpose(), J.d.f_z.transpose(),
                                        J.d.f_zb.transpose(), inhom, d_w, d_wb, dw, dwb, h);
    } else {
      Mat next(m_paths, d.m);
      for (int p = 0; p < m_paths; ++p) {
        const Jacobians& J = now.at(p);
        const Vec dwp = dw.segment(p, 1);
        const Vec dwbp = with_bar ? Vec(dwb.segment(p, 1)) : Vec();
        next.row(p) = linear_sde_step(adj.p.at(j).row(p), J.d.f_y.transpose(), J.d.f_z.transpose(),
                                      J.d.f_zb.transpose(), inhom.row(p), d_w.row(p), d_wb.row(p),
                                      dwp, dwbp, h);
      }
      adj.p.at(j + 1) = std::move(next);
    }
    require_finite(adj.p.at(j + 1), "adjoint p", j + 1);
  }

  // q(T) = -G_x^T p(T) + Phi_x(x(T)).
  Mat terminal(m_paths, d.n);
  for (int p = 0; p < m_paths; ++p) {
    const Vec xT = state.x.point(n, p);
    terminal.row(p) = (-model.terminal_jacobian(xT).transpose() * adj.p.point(n, p) +
                       costs.terminal_gradient(player, xT))
                          .transpose();
  }

  ConditionalEstimator est(full_information_features(state.x, grid, paths, {&adj.p}),
                           solver_basis(basis));
  BackwardSpec spec;
  spec.dim = d.n;
  spec.terminal = terminal;
  spec.driver = [&](const BackwardStepInput& in) {
    const JacobianSlice J = slice_at(model, state, controls, grid, in.index);
    const CostRows cr = cost_rows(player, model, costs, state, controls, grid, in.index);
    Mat f = J.rows_times(in.y_next, [](const Jacobians& a) -> const Mat& { return a.f.b_x; }) +
            J.rows_times(in.z, [](const Jacobians& a) -> const Mat& { return a.f.s_x; }) -
            J.rows_times(adj.p.at(in.index), [](const Jacobians& a) -> const Mat& { return a.d.f_x; }) +
            in.anticipated + cr.lx;
    if (with_bar)
      f += J.rows_times(in.z_bar, [](const Jacobians& a) -> const Mat& { return a.f.sb_x; });
    return f;
  };
  spec.anticipation = [&](const AnticipationView& v) -> Mat {
    if (v.post_terminal) return Mat::Zero(m_paths, d.n);
    const JacobianSlice J = slice_at(model, state, controls, grid, v.index);
    Mat a = J.rows_times(v.y, [](const Jacobians& x) -> const Mat& { return x.f.b_xd; }) +
            J.rows_times(v.z, [](const Jacobians& x) -> const Mat& { return x.f.s_xd; });
    if (with_bar) a += J.rows_times(v.z_bar, [](const Jacobians& x) -> const Mat& { return x.f.sb_xd; });
    return a;
  };
  BackwardTrajectory back = solve_absde(spec, grid, paths, est);

  adj.q = Trajectory(0, n + k, m_paths, d.n);
  adj.k = Trajectory(0, n + k, m_paths, d.n);
  adj.k_bar = Trajectory(0, n + k, m_paths, d.n);
  for (int j = 0; j <= n; ++j) {
    adj.q.at(j) = back.y.at(j);
    adj.k.at(j) = back.z.at(j);
    adj.k_bar.at(j) = back.z_bar.at(j);
  }
  return adj;
}

CostEstimate eval_cost(int player, const GameModel& model, const CostModel& costs,
                       const StateSolution& state, const ControlPair& controls,
                       const TimeGrid& grid) {
  (void)model;
  const int n = grid.steps();
  const int m_paths = state.x.paths();
  const double h = grid.step();
  CostEstimate out;
  out.samples = Vec::Zero(m_paths);
  for (int j = 0; j <= n; ++j) {
    const double w = (j == 0 || j == n) ? 0.5 * h : h;
    const Mat& u1 = control_at(controls.u1, j);
    const Mat& u2 = control_at(controls.u2, j);
    for (int p = 0; p < m_paths; ++p) {
      const StatePoint sp = state_point(state, grid, j, p);
      out.samples(p) +=
          w * costs.running(player, grid.time(j), sp, u1.row(p).transpose(), u2.row(p).transpose());
    }
  }
  for (int p = 0; p < m_paths; ++p) out.samples(p) += costs.terminal(player, state.x.point(n, p));

  // gamma(y(0)) with y(0) the regression value, linearized per path through psi so the
  // sampling error of y(0) is carried into the standard error.
  const Vec y0 = state.back.y.at(0).colwise().mean().transpose();
  const double g0 = costs.initial(player, y0);
  const Vec gy = costs.initial_gradient(player, y0);
  for (int p = 0; p < m_paths; ++p)
    out.samples(p) += g0 + (state.back.psi.row(p).transpose() - y0).dot(gy);

  const SampleStats st = sample_stats(out.samples);
  out.value = st.mean;
  out.se = st.se;
  out.exact = (out.samples.array() == out.samples(0)).all();
  if (out.exact) out.se = 0.0;
  return out;
}

CostEstimate eval_cost(int player, const GameModel& model, const CostModel& costs,
                       const ControlPair& controls, const TimeGrid& grid, const PathBundle& paths,
                       const ObservedBasis& basis) {
  const StateSolution s = solve_state(model, controls, grid, paths, basis);
  return eval_cost(player, model, costs, s, controls, grid);
}

VariationalSolution solve_variational(int player, const GameModel& model,
                                      const StateSolution& state, const ControlPair& controls,
                                      const Trajectory& direction, const TimeGrid& grid,
                                      const PathBundle& paths, const ObservedBasis& basis) {
  const Dimensions d = model.dims();
  const int n = grid.steps();
  const int k = grid.delay_steps();
  const int m_paths = paths.paths;
  const double h = grid.step();
  const bool with_bar = paths.has_wbar();
  if (direction.dim() != (player == 1 ? d.k1 : d.k2)) {
    throw std::invalid_argument("solve_variational: direction dimension mismatch");
  }

  VariationalSolution out;
  out.x1 = Trajectory(-k, n, m_paths, d.n);
  for (int j = 0; j < n; ++j) {
    const JacobianSlice J = slice_at(model, state, controls, grid, j);
    const Mat& x1 = out.x1.at(j);
    const Mat& x1d = out.x1.at(j - k);
    const Mat& v = direction.at(j);
    auto lin = [&](auto gx, auto gxd, auto gv) {
      return Mat(J.rows_times_transpose(x1, gx) + J.rows_times_transpose(x1d, gxd) +
                 J.rows_times_transpose(v, gv));
    };
    Mat drift, diff, diff_bar;
    if (player == 1) {
      drift = lin([](const Jacobians& a) -> const Mat& { return a.f.b_x; },
                  [](const Jacobians& a) -> const Mat& { return a.f.b_xd; },
                  [](const Jacobians& a) -> const Mat& { return a.f.b_v1; });
      diff = lin([](const Jacobians& a) -> const Mat& { return a.f.s_x; },
                 [](const Jacobians& a) -> const Mat& { return a.f.s_xd; },
                 [](const Jacobians& a) -> const Mat& { return a.f.s_v1; });
      diff_bar = lin([](const Jacobians& a) -> const Mat& { return a.f.sb_x; },
                     [](const Jacobians& a) -> const Mat& { return a.f.sb_xd; },
                     [](const Jacobians& a) -> const Mat& { return a.f.sb_v1; });
    } else {
      drift = lin([](const Jacobians& a) -> const Mat& { return a.f.b_x; },
                  [](const Jacobians& a) -> const Mat& { return a.f.b_xd; },
                  [](const Jacobians& a) -> const Mat& { return a.f.b_v2; });
      diff = lin([](const Jacobians& a) -> const Mat& { return a.f.s_x; },
                 [](const Jacobians& a) -> const Mat& { return a.f.s_xd; },
                 [](const Jacobians& a) -> const Mat& { return a.f.s_v2; });
      diff_bar = lin([](const Jacobians& a) -> const Mat& { return a.f.sb_x; },
                     [](const Jacobians& a) -> const Mat& { return a.f.sb_xd; },
                     [](const Jacobians& a) -> const Mat& { return a.f.sb_v2; });
    }
    Mat next = x1 + h * drift;
    next += Mat(diff.array().colwise() * paths.dw.col(j).array());
    if (with_bar) next += Mat(diff_bar.array().colwise() * paths.dwbar.col(j).array());
    require_finite(next, "variational state", j + 1);
    out.x1.at(j + 1) = std::move(next);
  }

  Mat terminal(m_paths, d.m);
  for (int p = 0; p < m_paths; ++p)
    terminal.row(p) = (model.terminal_jacobian(state.x.point(n, p)) * out.x1.point(n, p)).transpose();

  ConditionalEstimator est(full_information_features(state.x, grid, paths, {&out.x1}),
                           solver_basis(basis));
  BackwardSpec spec;
  spec.dim = d.m;
  spec.terminal = terminal;
  spec.driver = [&](const BackwardStepInput& in) {
    const JacobianSlice J = slice_at(model, state, controls, grid, in.index);
    Mat f = J.rows_times_transpose(out.x1.at(in.index), [](const Jacobians& a) -> const Mat& { return a.d.f_x; }) +
            J.rows_times_transpose(in.y_next, [](const Jacobians& a) -> const Mat& { return a.d.f_y; }) +
            J.rows_times_transpose(in.z, [](const Jacobians& a) -> const Mat& { return a.d.f_z; }) +
            J.rows_times_transpose(in.z_bar, [](const Jacobians& a) -> const Mat& { return a.d.f_zb; }) +
            J.rows_times_transpose(in.anticipated, [](const Jacobians& a) -> const Mat& { return a.d.f_yp; });
    if (player == 1)
      f += J.rows_times_transpose(direction.at(in.index), [](const Jacobians& a) -> const Mat& { return a.d.f_v1; });
    else
      f += J.rows_times_transpose(direction.at(in.index), [](const Jacobians& a) -> const Mat& { return a.d.f_v2; });
    return f;
  };
  spec.anticipation = [](const AnticipationView& v) { return v.y; };
  out.back = solve_absde(spec, grid, paths, est);
  return out;
}

DualityReport check_duality(int player, const GameModel& model, const StateSolution& state,
                            const AdjointTrajectory& adjoint,
                            const VariationalSolution& variational, const ControlPair& controls,
                            const TimeGrid& grid, const PathBundle& paths,
                            const ObservedBasis& basis, double se_multiplier) {
  (void)player;
  const int n = grid.steps();
  const int k = grid.delay_steps();
  const int m_paths = paths.paths;
  const double h = grid.step();

  // The conditional expectations pair with x1(t) and p(t); both join the regression
  // features so that the projection residual is orthogonal to them.
  ConditionalEstimator est(
      full_information_features(state.x, grid, paths, {&variational.x1, &adjoint.p}),
      solver_basis(basis));

  std::vector<JacobianSlice> slices;
  slices.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) slices.push_back(slice_at(model, state, controls, grid, j));
  auto b_xd = [](const Jacobians& a) -> const Mat& { return a.f.b_xd; };
  auto f_yp = [](const Jacobians& a) -> const Mat& { return a.d.f_yp; };
  const bool drift_zero = std::all_of(slices.begin(), slices.end(),
                                       [&](const JacobianSlice& s) { return s.all_zero(b_xd); });
  const bool ant_zero = std::all_of(slices.begin(), slices.end(),
                                    [&](const JacobianSlice& s) { return s.all_zero(f_yp); });

  Vec r1 = Vec::Zero(m_paths);
  Vec r2 = Vec::Zero(m_paths);
  const Trajectory& y1 = variational.back.y;
  for (int j = 0; j < n; ++j) {
    const JacobianSlice& J = slices[static_cast<std::size_t>(j)];
    const Projector* proj = nullptr;
    if (!drift_zero || !ant_zero) proj = &est.at(j);
    if (!drift_zero) {
      r1 += h * rowwise_dot(J.rows_times(adjoint.q.at(j), b_xd), variational.x1.at(j - k));
      if (j + k < n) {
        const Mat g = slices[static_cast<std::size_t>(j + k)].rows_times(adjoint.q.at(j + k), b_xd);
        r1 -= h * rowwise_dot(proj->apply(g), variational.x1.at(j));
      }
    }
    if (!ant_zero) {
      if (j - k >= 0)
        r2 += h * rowwise_dot(slices[static_cast<std::size_t>(j - k)].rows_times(adjoint.p.at(j - k), f_yp),
                              y1.at(j));
      if (j + k < n) {
        const Mat cond = proj->apply(y1.at(j + k));
        r2 -= h * rowwise_dot(adjoint.p.at(j), J.rows_times_transpose(cond, f_yp));
      }
    }
  }

  auto finish = [&](const Vec& samples, bool exact) {
    Residual r;
    const SampleStats st = sample_stats(samples);
    r.value = st.mean;
    r.se = st.se;
    r.exact = exact;
    r.pass = std::abs(r.value) <= se_multiplier * r.se || std::abs(r.value) <= 1e-8;
    return r;
  };
  DualityReport rep;
  rep.delayed_drift = finish(r1, drift_zero);
  rep.anticipated = finish(r2, ant_zero);
  rep.pass = rep.delayed_drift.pass && rep.anticipated.pass;
  return rep;
}

std::vector<Direction> default_directions(int dim, double horizon, std::uint64_t seed,
                                          bool relative) {
  std::vector<Direction> out;
  out.push_back({"constant", [dim](double) { return Vec(Vec::Ones(dim)); }, relative});
  out.push_back({"sine",
                 [dim, horizon](double t) {
                   return Vec(Vec::Constant(dim, std::sin(std::numbers::pi * t / horizon)));
                 },
                 relative});
  constexpr int pieces = 8;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto levels = std::make_shared<Mat>(pieces, dim);
  for (int i = 0; i < pieces; ++i)
    for (int c = 0; c < dim; ++c) (*levels)(i, c) = unif(rng);
  out.push_back({"piecewise_random",
                 [levels, horizon](double t) {
                   const int i = std::clamp(static_cast<int>(std::floor(t / horizon * pieces)), 0,
                                            pieces - 1);
                   return Vec(levels->row(i).transpose());
                 },
                 relative});
  return out;
}

std::vector<Direction> select_directions(const std::vector<std::string>& names, int dim,
                                         double horizon, bool relative) {
  const auto all = default_directions(dim, horizon, 20240611, relative);
  std::vector<Direction> out;
  for (const std::string& n : names) {
    auto it = std::find_if(all.begin(), all.end(), [&](const Direction& d) { return d.name == n; });
    if (it == all.end()) throw std::invalid_argument("unknown direction " + n);
    out.push_back(*it);
  }
  return out;
}

Trajectory direction_trajectory(const Direction& d, const Trajectory& candidate,
                                const TimeGrid& grid) {
  Trajectory out(candidate.first(), candidate.last(), candidate.paths(), candidate.dim());
  for (int j = candidate.first(); j <= candidate.last(); ++j) {
    const Vec v = d.value(grid.time(j));
    if (v.size() != candidate.dim()) throw std::invalid_argument("direction dimension mismatch");
    if (d.relative)
      out.at(j) = candidate.at(j).array().rowwise() * v.transpose().array();
    else
      out.at(j) = v.transpose().replicate(candidate.paths(), 1);
  }
  return out;
}

Mat control_gradient_field(int player, const GameModel& model, const CostModel& costs,
                           const StateSolution& state, const AdjointTrajectory& adjoint,
                           const ControlPair& controls, const TimeGrid& grid, int j) {
  const JacobianSlice J = slice_at(model, state, controls, grid, j);
  const CostRows cr = cost_rows(player, model, costs, state, controls, grid, j);
  const bool one = player == 1;
  Mat g = J.rows_times(adjoint.q.at(j), [one](const Jacobians& a) -> const Mat& { return one ? a.f.b_v1 : a.f.b_v2; }) +
          J.rows_times(adjoint.k.at(j), [one](const Jacobians& a) -> const Mat& { return one ? a.f.s_v1 : a.f.s_v2; }) +
          J.rows_times(adjoint.k_bar.at(j), [one](const Jacobians& a) -> const Mat& { return one ? a.f.sb_v1 : a.f.sb_v2; }) -
          J.rows_times(adjoint.p.at(j), [one](const Jacobians& a) -> const Mat& { return one ? a.d.f_v1 : a.d.f_v2; }) +
          cr.lv;
  return g;
}

FirstOrderStats first_order_statistic(const std::function<Mat(int)>& gradient,
                                      const ControlPair& controls, int player,
                                      const std::vector<Direction>& directions,
                                      const TimeGrid& grid, const FeatureProvider& observed,
                                      const ObservedBasis& basis, FirstOrderForm form,
                                      double se_multiplier) {
  // Means below this size are rounding noise of an identically vanishing gradient.
  constexpr double zero_floor = 1e-10;
  const Trajectory& u = controls.player(player);
  FirstOrderStats st;
  const ObservedBasis b = solver_basis(basis);
  for (int j = 0; j < grid.steps(); ++j) {
    const Mat g = gradient(j);
    const Projector proj(observed(j), b);
    for (const Direction& d : directions) {
      const Vec v = d.value(grid.time(j));
      Mat dir = v.transpose().replicate(g.rows(), 1);
      if (d.relative) dir = dir.array() * u.at(j).array();
      const Vec raw = rowwise_dot(g, dir);
      const Vec est = proj.apply(raw);
      const double mean = est.mean();
      const double rms = std::sqrt(est.squaredNorm() / static_cast<double>(est.size()));
      const double se = sample_stats(raw).se;
      const double signed_mean = form == FirstOrderForm::Equality ? std::abs(mean) : std::max(mean, 0.0);
      double ratio = 0.0;
      if (signed_mean > zero_floor)
        ratio = se > 0.0 ? signed_mean / se : std::numeric_limits<double>::infinity();
      st.max_rms = std::max(st.max_rms, rms);
      if (ratio > st.statistic || st.worst_index < 0) {
        st.statistic = std::max(ratio, st.statistic);
        st.max_abs = std::abs(mean);
        st.se_at_max = se;
        st.worst_index = j;
        st.worst_direction = d.name;
      }
    }
  }
  st.pass = st.statistic <= se_multiplier;
  return st;
}

FirstOrderStats check_first_order(int player, const GameModel& model, const CostModel& costs,
                                  const StateSolution& state, const AdjointTrajectory& adjoint,
                                  const ControlPair& controls,
                                  const std::vector<Direction>& directions, const TimeGrid& grid,
                                  const FeatureProvider& observed, const ObservedBasis& basis,
                                  FirstOrderForm form, double se_multiplier) {
  auto gradient = [&](int j) {
    return control_gradient_field(player, model, costs, state, adjoint, controls, grid, j);
  };
  return first_order_statistic(gradient, controls, player, directions, grid, observed, basis, form,
                               se_multiplier);
}

NashReport verify_nash(const GameModel& model, const CostModel& costs, const ControlPair& candidate,
                       const std::vector<Direction>& directions1,
                       const std::vector<Direction>& directions2,
                       const std::vector<double>& epsilons, const TimeGrid& grid,
                       const PathBundle& paths, const ObservedBasis& basis,
                       double se_multiplier) {
  NashReport rep;
  const StateSolution base = solve_state(model, candidate, grid, paths, basis);
  rep.j1 = eval_cost(1, model, costs, base, candidate, grid);
  rep.j2 = eval_cost(2, model, costs, base, candidate, grid);
  rep.pass = true;
  for (int player = 1; player <= 2; ++player) {
    const auto& dirs = player == 1 ? directions1 : directions2;
    const CostEstimate& j0 = player == 1 ? rep.j1 : rep.j2;
    for (const Direction& d : dirs) {
      const Trajectory v = direction_trajectory(d, candidate.player(player), grid);
      for (double eps : epsilons) {
        ControlPair perturbed = candidate;
        Trajectory& u = perturbed.player(player);
        for (int j = u.first(); j <= u.last(); ++j) u.at(j) += eps * v.at(j);
        if (!perturbed.admissible(player).contains(u)) {
          throw std::invalid_argument("verify_nash: direction " + d.name + " with epsilon " +
                                      std::to_string(eps) + " leaves the admissible set of player " +
                                      std::to_string(player));
        }
        const StateSolution s = solve_state(model, perturbed, grid, paths, basis);
        const CostEstimate jp = eval_cost(player, model, costs, s, perturbed, grid);
        const Vec diff = jp.samples - j0.samples;
        const SampleStats st = sample_stats(diff);
        NashRow row;
        row.player = player;
        row.direction = d.name;
        row.epsilon = eps;
        row.delta = st.mean;
        row.exact = (diff.array() == diff(0)).all();
        row.se = row.exact ? 0.0 : st.se;
        row.pass = row.delta <= se_multiplier * row.se + 1e-12;
        rep.pass = rep.pass && row.pass;
        rep.rows.push_back(row);
      }
    }
  }
  return rep;
}

}  // namespace delaygame
