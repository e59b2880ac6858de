#ifndef DELAYGAME_TESTS_FIXTURES_HPP
#define DELAYGAME_TESTS_FIXTURES_HPP

#include <cmath>
#include <random>

#include "delaygame/forward_sdde.hpp"
#include "delaygame/linear_model.hpp"
#include "delaygame/lq_solver.hpp"

namespace delaygame::testing {

inline MatrixCoefficient S(double v) { return MatrixCoefficient::scalar(v); }

// Scalar two-player LQ game with delay, anticipation and both noises.
inline LqModelSpec lq_game_spec() {
  LqModelSpec s;
  s.dims = {1, 1, 1, 1};
  LinearCoefficients c = LinearCoefficients::zeros(s.dims);
  c.A = S(0.1); c.Abar = S(0.2); c.B1 = S(0.5); c.B2 = S(0.3); c.b0 = S(0.05);
  c.C = S(0.2); c.Cbar = S(0.1); c.D1 = S(0.1); c.s0 = S(0.1); c.sw0 = S(0.2);
  c.E = S(0.1); c.F = S(-0.1); c.G = S(0.1); c.Fbar = S(0.1); c.H1 = S(0.1); c.H2 = S(0.1);
  c.MT = Mat::Constant(1, 1, 1.0);
  c.xi = {TimeFunction(1.0)};
  c.phi = {TimeFunction(0.0)};
  s.sys = c;
  for (int i = 1; i <= 2; ++i) {
    PlayerWeights w = PlayerWeights::zeros(s.dims, i);
    w.O = S(-1.0); w.P = S(-0.5); w.Q = S(-0.1); w.R = S(i == 1 ? -2.0 : -3.0);
    w.M = Mat::Constant(1, 1, -1.0);
    w.N = Mat::Constant(1, 1, -0.5);
    (i == 1 ? s.w1 : s.w2) = w;
  }
  return s;
}

// The same game with D_i = H_i = 0, so that scalar coefficients satisfy case (a).
inline LqModelSpec h4a_spec() {
  LqModelSpec s = lq_game_spec();
  s.sys.D1 = S(0.0); s.sys.D2 = S(0.0); s.sys.H1 = S(0.0); s.sys.H2 = S(0.0);
  return s;
}

struct RiccatiCase {
  double A = 0.1, B = 1.0, C = 0.2, O = -1.0, R = -1.0, M = -1.0, x0 = 1.0, T = 1.0;
};

// Player 1 controls dx = (A x + B u) dt + C x dW alone, no delay, no backward costs.
inline LqModelSpec riccati_spec(const RiccatiCase& r) {
  LqModelSpec s;
  s.dims = {1, 1, 1, 1};
  LinearCoefficients c = LinearCoefficients::zeros(s.dims);
  c.A = S(r.A); c.B1 = S(r.B); c.C = S(r.C);
  c.MT = Mat::Zero(1, 1);
  c.xi = {TimeFunction(r.x0)};
  c.phi = {TimeFunction(0.0)};
  s.sys = c;
  s.w1 = PlayerWeights::zeros(s.dims, 1);
  s.w1.O = S(r.O); s.w1.R = S(r.R); s.w1.M = Mat::Constant(1, 1, r.M);
  s.w2 = PlayerWeights::zeros(s.dims, 2);
  s.w2.R = S(-1.0);
  return s;
}

// Value 1/2 Pi(0) x0^2 of the scalar control problem; Pi from RK4 on a fine grid for
//   Pi' = -2 A Pi - C^2 Pi - O + B^2 Pi^2 / R,  Pi(T) = M.
inline double riccati_value(const RiccatiCase& r, int steps = 100000) {
  const double h = r.T / steps;
  auto f = [&](double p) { return -2.0 * r.A * p - r.C * r.C * p - r.O + r.B * r.B * p * p / r.R; };
  double p = r.M;
  for (int i = 0; i < steps; ++i) {
    const double k1 = f(p), k2 = f(p - 0.5 * h * k1), k3 = f(p - 0.5 * h * k2), k4 = f(p - h * k3);
    p -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return 0.5 * p * r.x0 * r.x0;
}

// y' = -c y - alpha y(t + delta), y(T) = 1, y = 0 after T, solved by steps:
//   y(t) = sum_n alpha^n (T - n delta - t)^n / n! e^{c (T - n delta - t)} over T - n delta >= t.
inline double delayed_ode_exact(double c, double alpha, double horizon, double delay, double t) {
  double sum = 0.0;
  double fact = 1.0;
  for (int n = 0; horizon - n * delay >= t - 1e-14; ++n) {
    if (n > 0) fact *= n;
    const double u = std::max(horizon - n * delay - t, 0.0);
    sum += std::pow(alpha, n) * std::pow(u, n) / fact * std::exp(c * u);
  }
  return sum;
}

// Random scalar affine game with every delay and anticipation block switched on.
inline LinearCoefficients random_linear_system(std::uint64_t seed, bool with_delay = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-0.4, 0.4);
  const Dimensions d{1, 1, 1, 1};
  LinearCoefficients c = LinearCoefficients::zeros(d);
  for (MatrixCoefficient* m : {&c.A, &c.B1, &c.B2, &c.b0, &c.C, &c.D1, &c.D2, &c.s0, &c.Cw,
                               &c.sw0, &c.E, &c.F, &c.G, &c.Gbar, &c.H1, &c.H2, &c.f0})
    *m = S(U(rng));
  const double abar = U(rng), cbar = U(rng), cwbar = U(rng), fbar = U(rng);
  if (with_delay) {
    c.Abar = S(abar); c.Cbar = S(cbar); c.Cwbar = S(cwbar); c.Fbar = S(fbar);
  }
  c.MT = Mat::Constant(1, 1, 0.5 + U(rng));
  c.xi = {TimeFunction::linear(1.0, 0.5)};
  c.phi = {TimeFunction(0.3)};
  return c;
}

inline PlayerWeights random_weights(std::uint64_t seed, int player) {
  std::mt19937_64 rng(seed + static_cast<std::uint64_t>(player));
  std::uniform_real_distribution<double> U(0.1, 1.0);
  const Dimensions d{1, 1, 1, 1};
  PlayerWeights w = PlayerWeights::zeros(d, player);
  w.O = S(-U(rng)); w.P = S(-U(rng)); w.Q = S(-U(rng)); w.Qbar = S(-U(rng)); w.R = S(-1.0 - U(rng));
  w.M = Mat::Constant(1, 1, -U(rng));
  w.N = Mat::Constant(1, 1, -U(rng));
  w.n_lin = Vec::Constant(1, 0.1);
  return w;
}

inline ControlPair constant_controls(const TimeGrid& grid, int paths, double u1, double u2) {
  ControlPair c = ControlPair::zeros(grid.steps(), paths, 1, 1);
  for (int j = 0; j <= grid.steps(); ++j) {
    c.u1.at(j).setConstant(u1);
    c.u2.at(j).setConstant(u2);
  }
  return c;
}

// Coarsens a bundle by summing groups of increments; the Brownian paths are unchanged.
inline PathBundle coarsen(const PathBundle& fine, int factor) {
  PathBundle out = fine;
  out.steps = fine.steps / factor;
  out.step = fine.step * factor;
  out.dw = Mat::Zero(fine.paths, out.steps);
  out.dwbar = Mat::Zero(fine.has_wbar() ? fine.paths : 0, fine.has_wbar() ? out.steps : 0);
  for (int j = 0; j < out.steps; ++j) {
    out.dw.col(j) = fine.dw.middleCols(j * factor, factor).rowwise().sum();
    if (fine.has_wbar()) out.dwbar.col(j) = fine.dwbar.middleCols(j * factor, factor).rowwise().sum();
  }
  return out;
}

}  // namespace delaygame::testing

#endif  // DELAYGAME_TESTS_FIXTURES_HPP
