#include "delaygame/pension.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "delaygame/backward_absde.hpp"

namespace delaygame {

namespace {

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

Flag make_flag(std::string name, bool pass, std::string detail) {
  return {std::move(name), pass, std::move(detail)};
}

}  // namespace

std::vector<std::string> pension_violations(const PensionSpec& s) {
  std::vector<std::string> out;
  if (!(s.gamma > 0.0 && s.gamma < 1.0)) out.push_back("gamma must lie in (0, 1), got " + num(s.gamma));
  if (!(s.alpha >= 0.0)) out.push_back("alpha must be non-negative, got " + num(s.alpha));
  if (!(s.L1 > 0.0)) out.push_back("L1 must be positive, got " + num(s.L1));
  if (!(s.L2 > 0.0)) out.push_back("L2 must be positive, got " + num(s.L2));
  if (!(s.x0 > 0.0)) out.push_back("x0 must be positive, got " + num(s.x0));
  if (!(s.horizon > 0.0)) out.push_back("T must be positive, got " + num(s.horizon));
  if (!(s.delay > 0.0 && s.delay <= s.horizon))
    out.push_back("delta must lie in (0, T], got " + num(s.delay));
  // sigma is checked on a fine sample of [0, T]; all supported forms are piecewise linear.
  for (int i = 0; i <= 1000 && s.horizon > 0.0; ++i) {
    const double t = s.horizon * i / 1000.0;
    if (std::abs(s.sigma(t)) < 1e-8) {
      out.push_back("sigma must stay away from 0, vanishes near t = " + num(t));
      break;
    }
  }
  return out;
}

void validate(const PensionSpec& spec) {
  const auto v = pension_violations(spec);
  if (v.empty()) return;
  std::string msg = "invalid pension specification:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw std::invalid_argument(msg);
}

const char* to_string(DiscountMode mode) { return mode == DiscountMode::Paper ? "paper" : "derived"; }
const char* to_string(RiskMethod method) { return method == RiskMethod::Bsde ? "bsde" : "girsanov"; }

Trajectory phat(const PensionSpec& spec, const TimeGrid& grid, const PathBundle& paths) {
  const int n = grid.steps();
  const double h = grid.step();
  Trajectory p(0, n, paths.paths, 1);
  Vec logp = Vec::Zero(paths.paths);
  p.at(0).setOnes();
  for (int j = 0; j < n; ++j) {
    const double g = spec.g(grid.time(j));
    logp.array() += g * paths.dw.col(j).array() - 0.5 * g * g * h;
    p.at(j + 1).col(0) = logp.array().exp();
  }
  return p;
}

QhatFactor qhat_factor(const PensionSpec& spec, const TimeGrid& grid) {
  const int n = grid.steps();
  const int k = grid.delay_steps();
  const double h = grid.step();
  // R[j] = int_0^{t_j} (r - alpha)
  std::vector<double> R(static_cast<std::size_t>(n + 1), 0.0);
  for (int j = 0; j < n; ++j) {
    R[j + 1] = R[j] + 0.5 * h * (spec.r(grid.time(j)) + spec.r(grid.time(j + 1))) - h * spec.alpha;
  }
  QhatFactor f;
  f.a.assign(static_cast<std::size_t>(n + 1), 0.0);
  f.a[n] = 1.0;
  auto ahead = [&](int i) { return i <= n ? f.a[static_cast<std::size_t>(i)] : 0.0; };

  for (int upper = n; upper > 0; upper -= k) {
    f.seams.push_back(upper);
    const int lower = std::max(upper - k, 0);
    // Suffix sums of the trapezoid terms of int_t^upper e^{R(s)} a(s + delta) ds.
    std::vector<double> tail(static_cast<std::size_t>(upper - lower + 1), 0.0);
    for (int i = upper - 1; i >= lower; --i) {
      const double right = upper == n ? 0.0 : std::exp(R[i + 1]) * ahead(i + 1 + k);
      const double left = upper == n ? 0.0 : std::exp(R[i]) * ahead(i + k);
      tail[i - lower] = tail[i + 1 - lower] + 0.5 * h * (left + right);
    }
    auto formula = [&](int j) {
      return std::exp(R[upper] - R[j]) * f.a[upper] + spec.alpha * std::exp(-R[j]) * tail[j - lower];
    };
    f.seam_jump = std::max(f.seam_jump, std::abs(formula(upper) - f.a[upper]));
    for (int j = upper - 1; j >= lower; --j) f.a[j] = formula(j);
  }
  return f;
}

PensionAdjoint qhat_khat_recursive(const PensionSpec& spec, const TimeGrid& grid,
                                   const PathBundle& paths) {
  if (grid.delay() > grid.horizon()) throw std::invalid_argument("qhat_khat_recursive: delta exceeds T");
  const int n = grid.steps();
  const int k = grid.delay_steps();
  PensionAdjoint out;
  out.factor = qhat_factor(spec, grid);
  out.p = phat(spec, grid, paths);
  out.q = Trajectory(0, n + k, paths.paths, 1);
  out.k = Trajectory(0, n + k, paths.paths, 1);
  for (int j = 0; j <= n; ++j) {
    const double a = out.factor.a[static_cast<std::size_t>(j)];
    out.q.at(j) = a * out.p.at(j);
    out.k.at(j) = a * spec.g(grid.time(j)) * out.p.at(j);
  }
  return out;
}

Consumption equilibrium_consumption(const PensionSpec& spec, const Trajectory& qhat,
                                    const TimeGrid& grid, DiscountMode mode) {
  const int n = grid.steps();
  const int m_paths = qhat.paths();
  Consumption out;
  out.controls = ControlPair::zeros(n, m_paths, 1, 1);
  out.controls.set1 = AdmissibleSet::positive(1);
  out.controls.set2 = AdmissibleSet::positive(1);
  const double expo = 1.0 / (spec.gamma - 1.0);
  for (int j = 0; j <= n; ++j) {
    const double t = grid.time(j);
    const double disc = mode == DiscountMode::Paper ? std::exp(spec.r(t) * t) : std::exp(spec.beta * t);
    for (int p = 0; p < m_paths; ++p) {
      double q = qhat.at(j)(p, 0);
      if (!(q >= kQhatFloor)) {
        q = kQhatFloor;
        ++out.floor_events;
      }
      for (int i = 1; i <= 2; ++i) out.controls.player(i).at(j)(p, 0) = std::pow(disc * q / spec.L(i), expo);
    }
  }
  return out;
}

RiskMeasureResult evaluate_risk(const TimeFunction& g, const Vec& xi, const TimeGrid& grid,
                                const PathBundle& paths, RiskMethod method,
                                const ObservedBasis& basis, const FeatureProvider& features) {
  if (xi.size() != paths.paths) throw std::invalid_argument("evaluate_risk: one sample per path expected");
  RiskMeasureResult out;
  out.method = method;
  if (method == RiskMethod::Girsanov) {
    PensionSpec s;
    s.g = g;
    const Trajectory p = phat(s, grid, paths);
    out.samples = -(p.at(grid.steps()).col(0).array() * xi.array()).matrix();
  } else {
    FeatureProvider f = features;
    if (!f) {
      auto w = std::make_shared<Mat>(brownian_levels(paths, Noise::W));
      std::shared_ptr<Mat> wb;
      if (paths.has_wbar()) wb = std::make_shared<Mat>(brownian_levels(paths, Noise::WBar));
      f = [w, wb](int j) {
        Mat out(w->rows(), wb ? 2 : 1);
        out.col(0) = w->col(j);
        if (wb) out.col(1) = wb->col(j);
        return out;
      };
    }
    ObservedBasis b = basis;
    b.collinear = CollinearPolicy::Drop;
    ConditionalEstimator est(f, b);
    BackwardSpec spec;
    spec.dim = 1;
    spec.terminal = -xi;
    spec.driver = [&g](const BackwardStepInput& in) { return Mat(g(in.t) * in.z); };
    BackwardTrajectory bt = solve_bsde(spec, grid, paths, est);
    out.samples = bt.psi.col(0);
  }
  const SampleStats st = sample_stats(out.samples);
  out.value = st.mean;
  out.exact = (out.samples.array() == out.samples(0)).all();
  out.se = out.exact ? 0.0 : st.se;
  return out;
}

Vec PensionModel::initial_path(double t) const { return Vec::Constant(1, t < 0.0 ? 0.0 : s_.x0); }

ForwardCoefficients PensionModel::forward(double t, const Vec& x, const Vec& x_delay, const Vec& v1,
                                          const Vec& v2) const {
  const double r = s_.r(t);
  ForwardCoefficients c;
  c.b = Vec::Constant(1, r * x(0) + (s_.mu(t) - r) * s_.pi(t) - s_.alpha * (x(0) - x_delay(0)) -
                             v1(0) - v2(0));
  c.sigma = Vec::Constant(1, s_.pi(t) * s_.sigma(t));
  c.sigma_bar = Vec::Constant(1, s_.sigma_bar(t));
  return c;
}

ForwardJacobian PensionModel::forward_jacobian(double t, const Vec&, const Vec&, const Vec&,
                                               const Vec&) const {
  const Mat zero = Mat::Zero(1, 1);
  ForwardJacobian j{zero, zero, zero, zero, zero, zero, zero, zero, zero, zero, zero, zero};
  j.b_x(0, 0) = s_.r(t) - s_.alpha;
  j.b_xd(0, 0) = s_.alpha;
  j.b_v1(0, 0) = -1.0;
  j.b_v2(0, 0) = -1.0;
  return j;
}

Vec PensionModel::driver(double t, const StatePoint& s, const Vec&, const Vec&) const {
  return Vec::Constant(1, s_.g(t) * s.z(0));
}

DriverJacobian PensionModel::driver_jacobian(double t, const StatePoint&, const Vec&,
                                             const Vec&) const {
  const Mat zero = Mat::Zero(1, 1);
  DriverJacobian j{zero, zero, zero, zero, zero, zero, zero};
  j.f_z(0, 0) = s_.g(t);
  return j;
}

ForwardBatch PensionModel::forward_batch(double t, const Mat& x, const Mat& x_delay, const Mat& v1,
                                         const Mat& v2) const {
  const double r = s_.r(t);
  ForwardBatch b;
  b.b = ((r - s_.alpha) * x.array() + s_.alpha * x_delay.array() - v1.array() - v2.array() +
         (s_.mu(t) - r) * s_.pi(t))
            .matrix();
  b.sigma = Mat::Constant(x.rows(), 1, s_.pi(t) * s_.sigma(t));
  b.sigma_bar = Mat::Constant(x.rows(), 1, s_.sigma_bar(t));
  return b;
}

Mat PensionModel::driver_batch(double t, const Mat&, const Mat&, const Mat& z, const Mat&,
                               const Mat&, const Mat&, const Mat&) const {
  return s_.g(t) * z;
}

double PensionCosts::running(int player, double t, const StatePoint&, const Vec& v1,
                             const Vec& v2) const {
  const double c = player == 1 ? v1(0) : v2(0);
  return std::exp(-s_.beta * t) * s_.L(player) * std::pow(c, s_.gamma) / s_.gamma;
}

CostGradient PensionCosts::running_gradient(int player, double t, const StatePoint&, const Vec& v1,
                                            const Vec& v2) const {
  const Vec zero = Vec::Zero(1);
  CostGradient g{zero, zero, zero, zero, zero, zero};
  const double c = player == 1 ? v1(0) : v2(0);
  const double lv = std::exp(-s_.beta * t) * s_.L(player) * std::pow(c, s_.gamma - 1.0);
  (player == 1 ? g.l_v1 : g.l_v2)(0) = lv;
  return g;
}

AdjointTrajectory closed_form_adjoint(const PensionAdjoint& a, const TimeGrid& grid) {
  const int n = grid.steps();
  const int k = grid.delay_steps();
  const int m_paths = a.p.paths();
  AdjointTrajectory out;
  out.p = Trajectory(-k, n, m_paths, 1);
  for (int j = 0; j <= n; ++j) out.p.at(j) = a.p.at(j);
  out.q = a.q;
  out.k = a.k;
  out.k_bar = Trajectory(0, n + k, m_paths, 1);
  return out;
}

PensionReport run_pension(const PensionSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                          const PensionOptions& opt) {
  validate(spec);
  if (std::abs(grid.horizon() - spec.horizon) > 1e-12 || std::abs(grid.delay() - spec.delay) > 1e-12) {
    throw std::invalid_argument("run_pension: grid horizon or delay differs from the specification");
  }
  const int n = grid.steps();
  const double se_mult = opt.se_multiplier;
  PensionReport rep;
  rep.adjoint = qhat_khat_recursive(spec, grid, paths);
  rep.consumption = equilibrium_consumption(spec, rep.adjoint.q, grid, opt.mode);
  const ControlPair& c = rep.consumption.controls;

  const PensionModel model(spec);
  const PensionCosts costs(spec);
  rep.state = solve_state(model, c, grid, paths, opt.basis);
  rep.j1 = eval_cost(1, model, costs, rep.state, c, grid);
  rep.j2 = eval_cost(2, model, costs, rep.state, c, grid);

  // Martingale property of phat at every grid time.
  double worst_ratio = 0.0;
  int worst_j = 0;
  for (int j = 0; j <= n; ++j) {
    const SampleStats st = sample_stats(rep.adjoint.p.at(j).col(0));
    rep.phat_mean.push_back(st);
    const double dev = std::abs(st.mean - 1.0);
    const double ratio = dev <= 1e-12 ? 0.0 : (st.se > 0.0 ? dev / st.se : std::numeric_limits<double>::infinity());
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst_j = j;
    }
  }
  rep.flags.push_back(make_flag("phat_martingale", worst_ratio <= 4.0,
                                "max |mean - 1| / SE = " + num(worst_ratio) + " at index " + std::to_string(worst_j)));

  rep.min_q = std::numeric_limits<double>::infinity();
  rep.min_c = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= n; ++j) {
    rep.min_q = std::min(rep.min_q, rep.adjoint.q.at(j).minCoeff());
    rep.min_c = std::min({rep.min_c, c.u1.at(j).minCoeff(), c.u2.at(j).minCoeff()});
  }
  rep.flags.push_back(make_flag("positivity", rep.min_q >= 0.0 && rep.min_c > 0.0,
                                "min qhat = " + num(rep.min_q) + ", min c = " + num(rep.min_c) +
                                    ", floor events = " + std::to_string(rep.consumption.floor_events)));
  rep.flags.push_back(make_flag("qhat_seams", rep.adjoint.factor.seam_jump <= 1e-10,
                                "largest seam mismatch " + num(rep.adjoint.factor.seam_jump)));

  // Risk of the terminal wealth by both methods; paired on the same paths.
  const Vec xT = rep.state.x.at(n).col(0);
  rep.risk_bsde = evaluate_risk(spec.g, xT, grid, paths, RiskMethod::Bsde, opt.basis,
                                full_information_features(rep.state.x, grid, paths));
  rep.risk_girsanov = evaluate_risk(spec.g, xT, grid, paths, RiskMethod::Girsanov);
  const SampleStats gap = sample_stats(rep.risk_bsde.samples - rep.risk_girsanov.samples);
  rep.risk_gap_se = gap.se;
  rep.flags.push_back(make_flag("risk_bsde_vs_girsanov", std::abs(gap.mean) <= se_mult * gap.se,
                                "bsde " + num(rep.risk_bsde.value) + ", girsanov " +
                                    num(rep.risk_girsanov.value) + ", paired SE " + num(gap.se)));

  // First-order condition given the observation, with the closed-form adjoint.
  const AdjointTrajectory adj = closed_form_adjoint(rep.adjoint, grid);
  const FeatureProvider observed = observed_features(grid, paths);
  const auto dirs = select_directions(opt.directions, 1, grid.horizon());
  ControlPair shifted = c;
  for (int i = 1; i <= 2; ++i)
    for (int j = 0; j <= n; ++j) shifted.player(i).at(j) *= 1.0 + opt.negative_shift;
  for (int i = 1; i <= 2; ++i) {
    const auto idx = static_cast<std::size_t>(i - 1);
    rep.first_order[idx] = check_first_order(i, model, costs, rep.state, adj, c, dirs, grid, observed,
                                             opt.basis, FirstOrderForm::Equality, se_mult);
    rep.shifted[idx] = check_first_order(i, model, costs, rep.state, adj, shifted, dirs, grid,
                                         observed, opt.basis, FirstOrderForm::Equality, se_mult);
    const std::string s = std::to_string(i);
    rep.flags.push_back(make_flag("first_order_player" + s, rep.first_order[idx].pass,
                                  "statistic " + num(rep.first_order[idx].statistic) + " SE"));
    rep.flags.push_back(make_flag("shifted_candidate_player" + s,
                                  rep.shifted[idx].statistic >= opt.negative_threshold,
                                  "statistic " + num(rep.shifted[idx].statistic) + " SE"));
  }

  const auto rel = select_directions(opt.directions, 1, grid.horizon(), true);
  rep.nash = verify_nash(model, costs, c, rel, rel, opt.epsilons, grid, paths, opt.basis, se_mult);
  double worst = -std::numeric_limits<double>::infinity();
  for (const NashRow& r : rep.nash.rows)
    worst = std::max(worst, r.se > 0.0 ? r.delta / r.se : (r.delta > 0.0 ? 1e300 : 0.0));
  rep.flags.push_back(make_flag("nash", rep.nash.pass, "max dJ / SE = " + num(worst)));

  // Controls must not see Wbar.
  PathBundle other = paths;
  reseed_wbar(other, opt.reseed_wbar);
  const PensionAdjoint again = qhat_khat_recursive(spec, grid, other);
  const Consumption c_again = equilibrium_consumption(spec, again.q, grid, opt.mode);
  bool same = true;
  for (int i = 1; i <= 2; ++i)
    for (int j = 0; j <= n; ++j) same = same && (c_again.controls.player(i).at(j).array() == c.player(i).at(j).array()).all();
  rep.flags.push_back(make_flag("adaptedness", same, same ? "bit-identical after reseeding Wbar" : "controls changed"));

  rep.pass = std::all_of(rep.flags.begin(), rep.flags.end(), [](const Flag& f) { return f.pass; });
  return rep;
}

}  // namespace delaygame
