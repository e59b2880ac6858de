#include "delaygame/linear_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace delaygame {

TimeFunction TimeFunction::linear(double intercept, double slope) {
  TimeFunction f(intercept);
  f.kind_ = Kind::Linear;
  f.slope_ = slope;
  return f;
}

TimeFunction TimeFunction::piecewise(std::vector<double> breaks, std::vector<double> values) {
  if (breaks.empty() || breaks.size() != values.size()) {
    throw std::invalid_argument("TimeFunction: piecewise needs one value per break");
  }
  if (!std::is_sorted(breaks.begin(), breaks.end())) {
    throw std::invalid_argument("TimeFunction: piecewise breaks must be increasing");
  }
  TimeFunction f;
  f.kind_ = Kind::Piecewise;
  f.breaks_ = std::move(breaks);
  f.values_ = std::move(values);
  return f;
}

double TimeFunction::operator()(double t) const {
  switch (kind_) {
    case Kind::Constant:
      return constant_;
    case Kind::Linear:
      return constant_ + slope_ * t;
    case Kind::Piecewise: {
      auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
      const auto idx = it == breaks_.begin() ? 0 : static_cast<std::size_t>(it - breaks_.begin()) - 1;
      return values_[idx];
    }
  }
  return 0.0;
}

bool TimeFunction::is_zero() const {
  switch (kind_) {
    case Kind::Constant:
      return constant_ == 0.0;
    case Kind::Linear:
      return constant_ == 0.0 && slope_ == 0.0;
    case Kind::Piecewise:
      return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
  }
  return false;
}

MatrixCoefficient::MatrixCoefficient(std::vector<double> breaks, std::vector<Mat> values)
    : breaks_(std::move(breaks)), values_(std::move(values)) {
  if (values_.empty() || breaks_.size() != values_.size()) {
    throw std::invalid_argument("MatrixCoefficient: one matrix per break required");
  }
  for (const Mat& v : values_)
    if (v.rows() != values_.front().rows() || v.cols() != values_.front().cols())
      throw std::invalid_argument("MatrixCoefficient: pieces must share one shape");
}

const Mat& MatrixCoefficient::operator()(double t) const {
  static const Mat empty;
  if (values_.empty()) return empty;
  if (values_.size() == 1) return values_.front();
  auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
  const auto idx = it == breaks_.begin() ? 0 : static_cast<std::size_t>(it - breaks_.begin()) - 1;
  return values_[idx];
}

bool MatrixCoefficient::is_zero() const {
  return std::all_of(values_.begin(), values_.end(), [](const Mat& v) { return v.isZero(0.0); });
}

Vec evaluate(const PathFunction& f, double t) {
  Vec out(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) out(static_cast<Eigen::Index>(i)) = f[i](t);
  return out;
}

// Default batch evaluations loop over paths.

ForwardBatch GameModel::forward_batch(double t, const Mat& x, const Mat& x_delay, const Mat& v1,
                                      const Mat& v2) const {
  const Dimensions d = dims();
  ForwardBatch out{Mat(x.rows(), d.n), Mat(x.rows(), d.n), Mat(x.rows(), d.n)};
  for (Eigen::Index p = 0; p < x.rows(); ++p) {
    const ForwardCoefficients c = forward(t, x.row(p).transpose(), x_delay.row(p).transpose(),
                                          v1.row(p).transpose(), v2.row(p).transpose());
    out.b.row(p) = c.b.transpose();
    out.sigma.row(p) = c.sigma.transpose();
    out.sigma_bar.row(p) = c.sigma_bar.transpose();
  }
  return out;
}

Mat GameModel::driver_batch(double t, const Mat& x, const Mat& y, const Mat& z, const Mat& z_bar,
                            const Mat& y_ant, const Mat& v1, const Mat& v2) const {
  Mat out(x.rows(), dims().m);
  StatePoint s;
  for (Eigen::Index p = 0; p < x.rows(); ++p) {
    s.x = x.row(p).transpose();
    s.y = y.row(p).transpose();
    s.z = z.row(p).transpose();
    s.z_bar = z_bar.row(p).transpose();
    s.y_ant = y_ant.row(p).transpose();
    out.row(p) = driver(t, s, v1.row(p).transpose(), v2.row(p).transpose()).transpose();
  }
  return out;
}

Mat GameModel::terminal_batch(const Mat& x) const {
  Mat out(x.rows(), dims().m);
  for (Eigen::Index p = 0; p < x.rows(); ++p) out.row(p) = terminal(x.row(p).transpose()).transpose();
  return out;
}

LinearCoefficients LinearCoefficients::zeros(const Dimensions& d) {
  LinearCoefficients c;
  auto z = [](int r, int col) { return MatrixCoefficient::zero(r, col); };
  c.A = z(d.n, d.n);
  c.Abar = z(d.n, d.n);
  c.B1 = z(d.n, d.k1);
  c.B2 = z(d.n, d.k2);
  c.b0 = z(d.n, 1);
  c.C = z(d.n, d.n);
  c.Cbar = z(d.n, d.n);
  c.D1 = z(d.n, d.k1);
  c.D2 = z(d.n, d.k2);
  c.s0 = z(d.n, 1);
  c.Cw = z(d.n, d.n);
  c.Cwbar = z(d.n, d.n);
  c.Dw1 = z(d.n, d.k1);
  c.Dw2 = z(d.n, d.k2);
  c.sw0 = z(d.n, 1);
  c.E = z(d.m, d.n);
  c.F = z(d.m, d.m);
  c.G = z(d.m, d.m);
  c.Gbar = z(d.m, d.m);
  c.Fbar = z(d.m, d.m);
  c.H1 = z(d.m, d.k1);
  c.H2 = z(d.m, d.k2);
  c.f0 = z(d.m, 1);
  c.MT = Mat::Zero(d.m, d.n);
  c.xi.assign(static_cast<std::size_t>(d.n), TimeFunction(0.0));
  c.phi.assign(static_cast<std::size_t>(d.m), TimeFunction(0.0));
  return c;
}

void LinearCoefficients::check_shapes(const Dimensions& d) const {
  auto check = [](const char* name, int rows, int cols, int er, int ec) {
    if (rows != er || cols != ec) {
      throw std::invalid_argument(std::string("coefficient ") + name + " is " + std::to_string(rows) +
                                  "x" + std::to_string(cols) + ", expected " + std::to_string(er) +
                                  "x" + std::to_string(ec));
    }
  };
  auto mc = [&](const char* name, const MatrixCoefficient& m, int er, int ec) {
    check(name, m.rows(), m.cols(), er, ec);
  };
  mc("A", A, d.n, d.n);
  mc("Abar", Abar, d.n, d.n);
  mc("B1", B1, d.n, d.k1);
  mc("B2", B2, d.n, d.k2);
  mc("b0", b0, d.n, 1);
  mc("C", C, d.n, d.n);
  mc("Cbar", Cbar, d.n, d.n);
  mc("D1", D1, d.n, d.k1);
  mc("D2", D2, d.n, d.k2);
  mc("s0", s0, d.n, 1);
  mc("Cw", Cw, d.n, d.n);
  mc("Cwbar", Cwbar, d.n, d.n);
  mc("Dw1", Dw1, d.n, d.k1);
  mc("Dw2", Dw2, d.n, d.k2);
  mc("sw0", sw0, d.n, 1);
  mc("E", E, d.m, d.n);
  mc("F", F, d.m, d.m);
  mc("G", G, d.m, d.m);
  mc("Gbar", Gbar, d.m, d.m);
  mc("Fbar", Fbar, d.m, d.m);
  mc("H1", H1, d.m, d.k1);
  mc("H2", H2, d.m, d.k2);
  mc("f0", f0, d.m, 1);
  check("MT", static_cast<int>(MT.rows()), static_cast<int>(MT.cols()), d.m, d.n);
  check("xi", static_cast<int>(xi.size()), 1, d.n, 1);
  check("phi", static_cast<int>(phi.size()), 1, d.m, 1);
}

LinearModel::LinearModel(Dimensions dims, LinearCoefficients coefficients)
    : dims_(dims), c_(std::move(coefficients)) {
  c_.check_shapes(dims_);
}

Vec LinearModel::initial_path(double t) const { return evaluate(c_.xi, t); }
Vec LinearModel::terminal_path(double t) const { return evaluate(c_.phi, t); }

ForwardCoefficients LinearModel::forward(double t, const Vec& x, const Vec& xd, const Vec& v1,
                                         const Vec& v2) const {
  return {c_.A(t) * x + c_.Abar(t) * xd + c_.B1(t) * v1 + c_.B2(t) * v2 + c_.b0(t).col(0),
          c_.C(t) * x + c_.Cbar(t) * xd + c_.D1(t) * v1 + c_.D2(t) * v2 + c_.s0(t).col(0),
          c_.Cw(t) * x + c_.Cwbar(t) * xd + c_.Dw1(t) * v1 + c_.Dw2(t) * v2 + c_.sw0(t).col(0)};
}

ForwardJacobian LinearModel::forward_jacobian(double t, const Vec&, const Vec&, const Vec&,
                                              const Vec&) const {
  return {c_.A(t),  c_.Abar(t),  c_.B1(t),  c_.B2(t),  c_.C(t),   c_.Cbar(t),
          c_.D1(t), c_.D2(t),    c_.Cw(t),  c_.Cwbar(t), c_.Dw1(t), c_.Dw2(t)};
}

Vec LinearModel::driver(double t, const StatePoint& s, const Vec& v1, const Vec& v2) const {
  return c_.E(t) * s.x + c_.F(t) * s.y + c_.G(t) * s.z + c_.Gbar(t) * s.z_bar +
         c_.Fbar(t) * s.y_ant + c_.H1(t) * v1 + c_.H2(t) * v2 + c_.f0(t).col(0);
}

DriverJacobian LinearModel::driver_jacobian(double t, const StatePoint&, const Vec&,
                                            const Vec&) const {
  return {c_.E(t), c_.F(t), c_.G(t), c_.Gbar(t), c_.Fbar(t), c_.H1(t), c_.H2(t)};
}

ForwardBatch LinearModel::forward_batch(double t, const Mat& x, const Mat& xd, const Mat& v1,
                                        const Mat& v2) const {
  auto affine = [&](const Mat& a, const Mat& ad, const Mat& d1, const Mat& d2, const Mat& c0) {
    Mat out = x * a.transpose() + xd * ad.transpose() + v1 * d1.transpose() + v2 * d2.transpose();
    out.rowwise() += c0.col(0).transpose();
    return out;
  };
  return {affine(c_.A(t), c_.Abar(t), c_.B1(t), c_.B2(t), c_.b0(t)),
          affine(c_.C(t), c_.Cbar(t), c_.D1(t), c_.D2(t), c_.s0(t)),
          affine(c_.Cw(t), c_.Cwbar(t), c_.Dw1(t), c_.Dw2(t), c_.sw0(t))};
}

Mat LinearModel::driver_batch(double t, const Mat& x, const Mat& y, const Mat& z, const Mat& zb,
                              const Mat& ya, const Mat& v1, const Mat& v2) const {
  Mat out = x * c_.E(t).transpose() + y * c_.F(t).transpose() + z * c_.G(t).transpose() +
            zb * c_.Gbar(t).transpose() + v1 * c_.H1(t).transpose() + v2 * c_.H2(t).transpose();
  if (ya.cols() == dims_.m) out += ya * c_.Fbar(t).transpose();
  out.rowwise() += c_.f0(t).col(0).transpose();
  return out;
}

PlayerWeights PlayerWeights::zeros(const Dimensions& d, int player) {
  const int k = player == 1 ? d.k1 : d.k2;
  PlayerWeights w;
  w.O = MatrixCoefficient::zero(d.n, d.n);
  w.P = MatrixCoefficient::zero(d.m, d.m);
  w.Q = MatrixCoefficient::zero(d.m, d.m);
  w.Qbar = MatrixCoefficient::zero(d.m, d.m);
  w.R = MatrixCoefficient::zero(k, k);
  w.M = Mat::Zero(d.n, d.n);
  w.N = Mat::Zero(d.m, d.m);
  w.n_lin = Vec::Zero(d.m);
  return w;
}

QuadraticCosts::QuadraticCosts(Dimensions dims, PlayerWeights w1, PlayerWeights w2)
    : dims_(dims), w1_(std::move(w1)), w2_(std::move(w2)) {}

double QuadraticCosts::running(int player, double t, const StatePoint& s, const Vec& v1,
                               const Vec& v2) const {
  const PlayerWeights& w = weights(player);
  const Vec& v = player == 1 ? v1 : v2;
  return 0.5 * (s.x.dot(w.O(t) * s.x) + s.y.dot(w.P(t) * s.y) + s.z.dot(w.Q(t) * s.z) +
                s.z_bar.dot(w.Qbar(t) * s.z_bar) + v.dot(w.R(t) * v)) +
         w.l0(t);
}

CostGradient QuadraticCosts::running_gradient(int player, double t, const StatePoint& s,
                                              const Vec& v1, const Vec& v2) const {
  const PlayerWeights& w = weights(player);
  CostGradient g;
  g.l_x = w.O(t) * s.x;
  g.l_y = w.P(t) * s.y;
  g.l_z = w.Q(t) * s.z;
  g.l_zb = w.Qbar(t) * s.z_bar;
  g.l_v1 = player == 1 ? Vec(w.R(t) * v1) : Vec(Vec::Zero(v1.size()));
  g.l_v2 = player == 2 ? Vec(w.R(t) * v2) : Vec(Vec::Zero(v2.size()));
  return g;
}

double QuadraticCosts::terminal(int player, const Vec& x) const {
  return 0.5 * x.dot(weights(player).M * x);
}

Vec QuadraticCosts::terminal_gradient(int player, const Vec& x) const {
  return weights(player).M * x;
}

double QuadraticCosts::initial(int player, const Vec& y) const {
  const PlayerWeights& w = weights(player);
  return 0.5 * y.dot(w.N * y) + (w.n_lin.size() == y.size() ? w.n_lin.dot(y) : 0.0);
}

Vec QuadraticCosts::initial_gradient(int player, const Vec& y) const {
  const PlayerWeights& w = weights(player);
  Vec g = w.N * y;
  if (w.n_lin.size() == y.size()) g += w.n_lin;
  return g;
}

}  // namespace delaygame
