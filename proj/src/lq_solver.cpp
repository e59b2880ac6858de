#include "delaygame/lq_solver.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "delaygame/backward_absde.hpp"
#include "delaygame/forward_sdde.hpp"

namespace delaygame {

namespace {

using WeightFn = std::function<Mat(double)>;

struct AdjointWeights {
  WeightFn O, P, Q;
  Mat M, N;
};

AdjointWeights player_weights(const PlayerWeights& w) {
  return {[&w](double t) { return w.O(t); }, [&w](double t) { return w.P(t); },
          [&w](double t) { return w.Q(t); }, w.M, w.N};
}

Mat inverse_checked(const Mat& r, double cap, const std::string& name) {
  Eigen::JacobiSVD<Mat> svd(r);
  const auto& s = svd.singularValues();
  const double cond = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= cap)) {
    std::ostringstream msg;
    msg << name << " is numerically singular (condition number " << cond << " exceeds " << cap << ")";
    throw std::invalid_argument(msg.str());
  }
  return r.inverse();
}

// S_i = B_i R_i^{-1} B_i^T
Mat aggregation(const LqModelSpec& spec, int i, double t) {
  const Mat rinv = inverse_checked(spec.weights(i).R(t), spec.condition_cap, i == 1 ? "R_1" : "R_2");
  return spec.B(i)(t) * rinv * spec.B(i)(t).transpose();
}

FeatureProvider filtered_features(const TimeGrid& grid, const PathBundle& paths, const Trajectory& x,
                                  const Trajectory* extra) {
  auto w = std::make_shared<Mat>(brownian_levels(paths, Noise::W));
  const int k = grid.delay_steps();
  const Trajectory* xp = &x;
  return [w, k, xp, extra](int j) {
    const Eigen::Index n = xp->dim();
    const Eigen::Index e = extra ? extra->dim() : 0;
    Mat f(w->rows(), 1 + 2 * n + e);
    f.col(0) = w->col(j);
    f.middleCols(1, n) = xp->at(j);
    f.middleCols(1 + n, n) = xp->at(j - k);
    if (extra) f.rightCols(e) = extra->at(j);
    return f;
  };
}

ObservedBasis dropping(const ObservedBasis& b) {
  ObservedBasis out = b;
  out.collinear = CollinearPolicy::Drop;
  return out;
}

// x-hat with extra drift and diffusion rows supplied per grid index.
Trajectory filtered_forward(const LqModelSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                            const std::function<Mat(int)>& drift_extra,
                            const std::function<Mat(int)>& diff_extra) {
  const LinearCoefficients& c = spec.sys;
  const int n_steps = grid.steps();
  const int k = grid.delay_steps();
  const double h = grid.step();
  Trajectory x(-k, n_steps, paths.paths, spec.dims.n);
  for (int j = -k; j <= 0; ++j) x.at(j) = evaluate(c.xi, grid.time(j)).transpose().replicate(paths.paths, 1);
  for (int j = 0; j < n_steps; ++j) {
    const double t = grid.time(j);
    Mat drift = x.at(j) * c.A(t).transpose() + x.at(j - k) * c.Abar(t).transpose() + drift_extra(j);
    drift.rowwise() += c.b0(t).col(0).transpose();
    Mat diff = x.at(j) * c.C(t).transpose() + x.at(j - k) * c.Cbar(t).transpose() + diff_extra(j);
    diff.rowwise() += c.s0(t).col(0).transpose();
    Mat next = x.at(j) + h * drift;
    next += Mat(diff.array().colwise() * paths.dw.col(j).array());
    require_finite(next, "filtered state", j + 1);
    x.at(j + 1) = std::move(next);
  }
  return x;
}

struct FilteredBackward {
  Trajectory y, z;
};

FilteredBackward filtered_backward(const LqModelSpec& spec, const TimeGrid& grid,
                                   const PathBundle& paths, const Trajectory& x,
                                   const std::function<Mat(int)>& control_term,
                                   const ObservedBasis& basis) {
  const LinearCoefficients& c = spec.sys;
  const int n_steps = grid.steps();
  ConditionalEstimator est(filtered_features(grid, paths, x, nullptr), dropping(basis));
  BackwardSpec b;
  b.dim = spec.dims.m;
  b.use_wbar = false;
  b.terminal = x.at(n_steps) * c.MT.transpose();
  b.terminal_path = [&c](double t) { return evaluate(c.phi, t); };
  b.driver = [&](const BackwardStepInput& in) {
    const double t = in.t;
    Mat f = x.at(in.index) * c.E(t).transpose() + in.y_next * c.F(t).transpose() +
            in.z * c.G(t).transpose() + in.anticipated * c.Fbar(t).transpose() +
            control_term(in.index);
    f.rowwise() += c.f0(t).col(0).transpose();
    return f;
  };
  b.anticipation = [](const AnticipationView& v) { return v.y; };
  BackwardTrajectory bt = solve_absde(b, grid, paths, est);
  return {std::move(bt.y), std::move(bt.z)};
}

struct FilteredAdjoint {
  Trajectory p, q, k;
};

FilteredAdjoint solve_filtered_adjoint(const LqModelSpec& spec, const TimeGrid& grid,
                                 const PathBundle& paths, const Trajectory& x, const Trajectory& y,
                                 const Trajectory& z, const AdjointWeights& w,
                                 const ObservedBasis& basis) {
  const LinearCoefficients& c = spec.sys;
  const int n_steps = grid.steps();
  const int kd = grid.delay_steps();
  const int m_paths = paths.paths;
  const double h = grid.step();
  const int n = spec.dims.n;
  const int m = spec.dims.m;

  FilteredAdjoint out;
  out.p = Trajectory(-kd, n_steps, m_paths, m);
  out.p.at(0) = -y.at(0) * w.N.transpose();
  const Vec no_bar;
  const Mat zeros_m = Mat::Zero(m_paths, m);
  for (int j = 0; j < n_steps; ++j) {
    const double t = grid.time(j);
    Mat inhom = -y.at(j) * w.P(t).transpose();
    if (j - kd >= 0) inhom += out.p.at(j - kd) * c.Fbar(grid.time(j - kd));
    const Mat d = -z.at(j) * w.Q(t).transpose();
    out.p.at(j + 1) = linear_sde_step(out.p.at(j), c.F(t).transpose(), c.G(t).transpose(),
                                      Mat::Zero(m, m), inhom, d, zeros_m, paths.dw.col(j), no_bar, h);
    require_finite(out.p.at(j + 1), "filtered adjoint p", j + 1);
  }

  ConditionalEstimator est(filtered_features(grid, paths, x, &out.p), dropping(basis));
  BackwardSpec b;
  b.dim = n;
  b.use_wbar = false;
  b.terminal = -out.p.at(n_steps) * c.MT + x.at(n_steps) * w.M.transpose();
  b.driver = [&](const BackwardStepInput& in) {
    const double t = in.t;
    return Mat(in.y_next * c.A(t) + in.z * c.C(t) - out.p.at(in.index) * c.E(t) + in.anticipated +
               x.at(in.index) * w.O(t).transpose());
  };
  b.anticipation = [&](const AnticipationView& v) -> Mat {
    if (v.post_terminal) return Mat::Zero(m_paths, n);
    return v.y * c.Abar(v.t) + v.z * c.Cbar(v.t);
  };
  BackwardTrajectory bt = solve_absde(b, grid, paths, est);
  out.q = Trajectory(0, n_steps + kd, m_paths, n);
  out.k = Trajectory(0, n_steps + kd, m_paths, n);
  for (int j = 0; j <= n_steps; ++j) {
    out.q.at(j) = bt.y.at(j);
    out.k.at(j) = bt.z.at(j);
  }
  return out;
}

double control_change(const ControlPair& a, const ControlPair& b, const TimeGrid& grid) {
  double acc = 0.0;
  for (int j = 0; j < grid.steps(); ++j) {
    acc += (a.u1.at(j) - b.u1.at(j)).squaredNorm() + (a.u2.at(j) - b.u2.at(j)).squaredNorm();
  }
  return std::sqrt(grid.step() * acc / static_cast<double>(a.u1.paths()));
}

void check_symmetric_sign(const MatrixCoefficient& m, const std::string& name, bool strict,
                          double cap, std::vector<std::string>& out) {
  for (const Mat& piece : m.pieces()) {
    if (piece.rows() != piece.cols()) {
      out.push_back(name + " must be square, got " + std::to_string(piece.rows()) + "x" +
                    std::to_string(piece.cols()));
      return;
    }
    if ((piece - piece.transpose()).norm() > 1e-12) {
      out.push_back(name + " must be symmetric");
      return;
    }
    if (piece.size() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Mat> eig(piece);
    const double top = eig.eigenvalues().maxCoeff();
    if (strict) {
      if (top > -1e-10) {
        out.push_back("R_i must be negative definite (" + name + " has largest eigenvalue " +
                      std::to_string(top) + ")");
        return;
      }
      const double cond = eig.eigenvalues().cwiseAbs().maxCoeff() / eig.eigenvalues().cwiseAbs().minCoeff();
      if (cond > cap) {
        out.push_back(name + " condition number " + std::to_string(cond) + " exceeds cap " +
                      std::to_string(cap));
        return;
      }
    } else if (top > 1e-10) {
      out.push_back(name + " must be non-positive (largest eigenvalue " + std::to_string(top) + ")");
      return;
    }
  }
}

}  // namespace

std::vector<std::string> lq_violations(const LqModelSpec& spec) {
  std::vector<std::string> out;
  try {
    spec.sys.check_shapes(spec.dims);
  } catch (const std::invalid_argument& e) {
    out.emplace_back(e.what());
  }
  for (int i = 1; i <= 2; ++i) {
    const PlayerWeights& w = spec.weights(i);
    const std::string s = "_" + std::to_string(i);
    check_symmetric_sign(w.O, "O" + s, false, spec.condition_cap, out);
    check_symmetric_sign(w.P, "P" + s, false, spec.condition_cap, out);
    check_symmetric_sign(w.Q, "Q" + s, false, spec.condition_cap, out);
    check_symmetric_sign(w.Qbar, "Qbar" + s, false, spec.condition_cap, out);
    check_symmetric_sign(MatrixCoefficient(w.M), "M" + s, false, spec.condition_cap, out);
    check_symmetric_sign(MatrixCoefficient(w.N), "N" + s, false, spec.condition_cap, out);
    check_symmetric_sign(w.R, "R" + s, true, spec.condition_cap, out);
    const int k = i == 1 ? spec.dims.k1 : spec.dims.k2;
    if (w.R.rows() != k) out.push_back("R" + s + " must be " + std::to_string(k) + "x" + std::to_string(k));
  }
  return out;
}

void validate(const LqModelSpec& spec) {
  const auto v = lq_violations(spec);
  if (v.empty()) return;
  std::string msg = "invalid LQ specification:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw std::invalid_argument(msg);
}

LinearModel lq_game_model(const LqModelSpec& spec) { return LinearModel(spec.dims, spec.sys); }

QuadraticCosts lq_costs(const LqModelSpec& spec) { return QuadraticCosts(spec.dims, spec.w1, spec.w2); }

ControlPair equilibrium_controls(const LqModelSpec& spec, const FilteredTriple& f,
                                 const TimeGrid& grid) {
  const int n_steps = grid.steps();
  const int m_paths = f.x.paths();
  ControlPair u = ControlPair::zeros(n_steps, m_paths, spec.dims.k1, spec.dims.k2);
  for (int i = 1; i <= 2; ++i) {
    const auto idx = static_cast<std::size_t>(i - 1);
    Trajectory& ui = u.player(i);
    for (int j = 0; j <= n_steps; ++j) {
      const double t = grid.time(j);
      const Mat rinv = inverse_checked(spec.weights(i).R(t), spec.condition_cap, i == 1 ? "R_1" : "R_2");
      const Mat w = f.q[idx].at(j) * spec.B(i)(t) + f.k[idx].at(j) * spec.D(i)(t) -
                    f.p[idx].at(j) * spec.H(i)(t);
      ui.at(j) = -w * rinv.transpose();
    }
  }
  return u;
}

FilteredTriple solve_filtered_system(const LqModelSpec& spec, const ControlPair& u,
                                     const TimeGrid& grid, const PathBundle& paths,
                                     const ObservedBasis& basis) {
  const LinearCoefficients& c = spec.sys;
  FilteredTriple f;
  f.x = filtered_forward(
      spec, grid, paths,
      [&](int j) {
        const double t = grid.time(j);
        return Mat(u.u1.at(j) * c.B1(t).transpose() + u.u2.at(j) * c.B2(t).transpose());
      },
      [&](int j) {
        const double t = grid.time(j);
        return Mat(u.u1.at(j) * c.D1(t).transpose() + u.u2.at(j) * c.D2(t).transpose());
      });
  FilteredBackward fb = filtered_backward(
      spec, grid, paths, f.x,
      [&](int j) {
        const double t = grid.time(j);
        return Mat(u.u1.at(j) * c.H1(t).transpose() + u.u2.at(j) * c.H2(t).transpose());
      },
      basis);
  f.y = std::move(fb.y);
  f.z = std::move(fb.z);
  for (int i = 1; i <= 2; ++i) {
    FilteredAdjoint a = solve_filtered_adjoint(spec, grid, paths, f.x, f.y, f.z,
                                         player_weights(spec.weights(i)), basis);
    const auto idx = static_cast<std::size_t>(i - 1);
    f.p[idx] = std::move(a.p);
    f.q[idx] = std::move(a.q);
    f.k[idx] = std::move(a.k);
  }
  return f;
}

LqSolution solve_lq_fixed_point(const LqModelSpec& spec, const TimeGrid& grid,
                                const PathBundle& paths, const ObservedBasis& basis,
                                const FixedPointOptions& options) {
  validate(spec);
  if (!(options.damping > 0.0 && options.damping <= 1.0)) {
    throw std::invalid_argument("solve_lq_fixed_point: damping must lie in (0, 1]");
  }
  LqSolution sol;
  ControlPair u = ControlPair::zeros(grid.steps(), paths.paths, spec.dims.k1, spec.dims.k2);
  bool converged = false;
  for (int it = 1; it <= options.max_iter; ++it) {
    FilteredTriple f = solve_filtered_system(spec, u, grid, paths, basis);
    ControlPair u_new = equilibrium_controls(spec, f, grid);
    const double res = control_change(u_new, u, grid);
    sol.residuals.push_back(res);
    sol.iterations = it;
    if (res <= options.tol) {
      // The candidate is read off the last filtered system, so the two stay consistent.
      sol.filtered = std::move(f);
      sol.controls = std::move(u_new);
      converged = true;
      break;
    }
    for (int i = 1; i <= 2; ++i) {
      Trajectory& ui = u.player(i);
      for (int j = ui.first(); j <= ui.last(); ++j)
        ui.at(j) = (1.0 - options.damping) * ui.at(j) + options.damping * u_new.player(i).at(j);
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "solve_lq_fixed_point: no convergence after " << options.max_iter
        << " iterations, residual history:";
    for (double r : sol.residuals) msg << ' ' << r;
    throw ConvergenceError(msg.str(), sol.residuals);
  }
  for (std::size_t i = 3; i < sol.residuals.size(); ++i)
    if (sol.residuals[i] > sol.residuals[i - 1]) sol.monotone_after_three = false;
  return sol;
}

void check_h4(const LqModelSpec& spec, H4Case which, const TimeGrid& grid) {
  const LinearCoefficients& c = spec.sys;
  if (spec.dims.n != spec.dims.m) {
    throw std::invalid_argument("H4: dimension of x (" + std::to_string(spec.dims.n) +
                                ") must equal that of y (" + std::to_string(spec.dims.m) + ")");
  }
  if (!c.Gbar.is_zero()) throw std::invalid_argument("H4: Gbar must vanish");
  for (int i = 1; i <= 2; ++i) {
    const std::string s = std::to_string(i);
    if (!spec.B(i).is_constant()) throw std::invalid_argument("H4: B_" + s + " must be constant in time");
    if (!spec.D(i).is_constant()) throw std::invalid_argument("H4: D_" + s + " must be constant in time");
    if (!spec.H(i).is_constant()) throw std::invalid_argument("H4: H_" + s + " must be constant in time");
  }
  const char* zero_names[3][2] = {{"D", "H"}, {"B", "H"}, {"B", "D"}};
  const int case_idx = which == H4Case::A ? 0 : which == H4Case::B ? 1 : 2;
  for (int i = 1; i <= 2; ++i) {
    for (const char* nm : zero_names[case_idx]) {
      const MatrixCoefficient& m = nm[0] == 'B' ? spec.B(i) : nm[0] == 'D' ? spec.D(i) : spec.H(i);
      if (!m.is_zero()) {
        throw std::invalid_argument(std::string("H4: case requires ") + nm + "_" + std::to_string(i) + " = 0");
      }
    }
  }
  for (int j = 0; j <= grid.steps(); ++j) {
    const double t = grid.time(j);
    for (int i = 1; i <= 2; ++i) {
      const MatrixCoefficient& act = which == H4Case::A ? spec.B(i) : which == H4Case::B ? spec.D(i) : spec.H(i);
      const Mat rinv = inverse_checked(spec.weights(i).R(t), spec.condition_cap, "R_" + std::to_string(i));
      const Mat s = act(t) * rinv * act(t).transpose();
      const PlayerWeights& w = spec.weights(i);
      const std::vector<std::pair<std::string, Mat>> listed = {
          {"A", c.A(t)},       {"Abar", c.Abar(t)}, {"C", c.C(t)},   {"Cbar", c.Cbar(t)},
          {"E", c.E(t)},       {"F", c.F(t)},       {"Fbar", c.Fbar(t)}, {"G", c.G(t)},
          {"MT", c.MT},        {"O_" + std::to_string(i), w.O(t)}, {"P_" + std::to_string(i), w.P(t)},
          {"Q_" + std::to_string(i), w.Q(t)}, {"M_" + std::to_string(i), w.M},
          {"N_" + std::to_string(i), w.N}};
      for (const auto& [name, mat] : listed) {
        const Mat st = mat.transpose();
        if ((s * st - st * s).norm() > 1e-10) {
          std::ostringstream msg;
          msg << "H4: commutation fails for " << name << " with player " << i
              << " aggregation at t = " << t << " (residual " << (s * st - st * s).norm() << ")";
          throw std::invalid_argument(msg.str());
        }
      }
    }
  }
}

DoubleSystem solve_dfbsdde(const LqModelSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                           const ObservedBasis& basis, const FixedPointOptions& options) {
  validate(spec);
  check_h4(spec, H4Case::A, grid);
  const int n_steps = grid.steps();
  const int m_paths = paths.paths;
  const int n = spec.dims.n;

  auto agg = [&spec](double t, auto pick) {
    Mat out = aggregation(spec, 1, t) * pick(spec.w1, t);
    out += aggregation(spec, 2, t) * pick(spec.w2, t);
    return out;
  };
  AdjointWeights w;
  w.O = [agg](double t) { return agg(t, [](const PlayerWeights& p, double s) { return Mat(p.O(s)); }); };
  w.P = [agg](double t) { return agg(t, [](const PlayerWeights& p, double s) { return Mat(p.P(s)); }); };
  w.Q = [agg](double t) { return agg(t, [](const PlayerWeights& p, double s) { return Mat(p.Q(s)); }); };
  w.M = aggregation(spec, 1, grid.horizon()) * spec.w1.M + aggregation(spec, 2, grid.horizon()) * spec.w2.M;
  w.N = aggregation(spec, 1, 0.0) * spec.w1.N + aggregation(spec, 2, 0.0) * spec.w2.N;

  DoubleSystem out;
  Trajectory q(0, n_steps, m_paths, n);
  const Mat zero_rows = Mat::Zero(m_paths, n);
  bool converged = false;
  for (int it = 1; it <= options.max_iter; ++it) {
    Trajectory x = filtered_forward(
        spec, grid, paths, [&](int j) { return Mat(-q.at(j)); }, [&](int) { return zero_rows; });
    FilteredBackward fb = filtered_backward(
        spec, grid, paths, x, [&](int) { return Mat(Mat::Zero(m_paths, spec.dims.m)); }, basis);
    FilteredAdjoint a = solve_filtered_adjoint(spec, grid, paths, x, fb.y, fb.z, w, basis);
    double acc = 0.0;
    for (int j = 0; j < n_steps; ++j) acc += (a.q.at(j) - q.at(j)).squaredNorm();
    const double res = std::sqrt(grid.step() * acc / m_paths);
    out.residuals.push_back(res);
    out.iterations = it;
    if (res <= options.tol) {
      out.x = std::move(x);
      out.y = std::move(fb.y);
      out.z = std::move(fb.z);
      out.p = std::move(a.p);
      out.q = std::move(a.q);
      out.k = std::move(a.k);
      converged = true;
      break;
    }
    for (int j = 0; j <= n_steps; ++j)
      q.at(j) = (1.0 - options.damping) * q.at(j) + options.damping * a.q.at(j);
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "solve_dfbsdde: no convergence after " << options.max_iter << " iterations, residual history:";
    for (double r : out.residuals) msg << ' ' << r;
    throw ConvergenceError(msg.str(), out.residuals);
  }
  return out;
}

AdjointTrajectory filtered_adjoint(const FilteredTriple& f, int player) {
  const auto idx = static_cast<std::size_t>(player - 1);
  AdjointTrajectory a;
  a.p = f.p[idx];
  a.q = f.q[idx];
  a.k = f.k[idx];
  a.k_bar = Trajectory(a.q.first(), a.q.last(), a.q.paths(), a.q.dim());
  return a;
}

double relative_l2(const Trajectory& a, const Trajectory& reference, int first, int last) {
  double num = 0.0, den = 0.0;
  for (int j = first; j <= last; ++j) {
    num += (a.at(j) - reference.at(j)).squaredNorm();
    den += reference.at(j).squaredNorm();
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::sqrt(num);
  return std::sqrt(num / den);
}

H4Report crosscheck_h4(const LqModelSpec& spec, H4Case which, const TimeGrid& grid,
                       const PathBundle& paths, const ObservedBasis& basis,
                       const FixedPointOptions& options) {
  validate(spec);
  check_h4(spec, which, grid);
  H4Report rep;
  rep.which = which;
  if (which != H4Case::A) return rep;

  const LqSolution tri = solve_lq_fixed_point(spec, grid, paths, basis, options);
  const DoubleSystem dbl = solve_dfbsdde(spec, grid, paths, basis, options);
  const int n_steps = grid.steps();
  const int m_paths = paths.paths;
  const int n = spec.dims.n;
  Trajectory p(0, n_steps, m_paths, n), q(0, n_steps, m_paths, n), k(0, n_steps, m_paths, n);
  for (int j = 0; j <= n_steps; ++j) {
    const double t = grid.time(j);
    const Mat s1 = aggregation(spec, 1, t);
    const Mat s2 = aggregation(spec, 2, t);
    p.at(j) = tri.filtered.p[0].at(j) * s1.transpose() + tri.filtered.p[1].at(j) * s2.transpose();
    q.at(j) = tri.filtered.q[0].at(j) * s1.transpose() + tri.filtered.q[1].at(j) * s2.transpose();
    k.at(j) = tri.filtered.k[0].at(j) * s1.transpose() + tri.filtered.k[1].at(j) * s2.transpose();
  }
  rep.solved = true;
  rep.rel_p = relative_l2(dbl.p, p, 0, n_steps);
  rep.rel_q = relative_l2(dbl.q, q, 0, n_steps);
  rep.rel_k = relative_l2(dbl.k, k, 0, n_steps - 1);
  rep.rel_x = relative_l2(dbl.x, tri.filtered.x, 0, n_steps);
  rep.rel_y = relative_l2(dbl.y, tri.filtered.y, 0, n_steps);
  rep.rel_z = relative_l2(dbl.z, tri.filtered.z, 0, n_steps - 1);
  rep.iterations_triple = tri.iterations;
  rep.iterations_double = dbl.iterations;
  return rep;
}

}  // namespace delaygame
