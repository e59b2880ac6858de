#ifndef DELAYGAME_LINEAR_MODEL_HPP
#define DELAYGAME_LINEAR_MODEL_HPP

#include "delaygame/coefficients.hpp"
#include "delaygame/model.hpp"

namespace delaygame {

// Affine coefficients of the controlled system
//   dx = (A x + Abar x_d + B1 v1 + B2 v2 + b0) dt + (C x + Cbar x_d + D1 v1 + D2 v2 + s0) dW
//        + (Cw x + Cwbar x_d + Dw1 v1 + Dw2 v2 + sw0) dWbar
//  -dy = (E x + F y + G z + Gbar zbar + Fbar y_ant + H1 v1 + H2 v2 + f0) dt - z dW - zbar dWbar
//   y(T) = MT x(T).
struct LinearCoefficients {
  MatrixCoefficient A, Abar, B1, B2, b0;
  MatrixCoefficient C, Cbar, D1, D2, s0;
  MatrixCoefficient Cw, Cwbar, Dw1, Dw2, sw0;
  MatrixCoefficient E, F, G, Gbar, Fbar, H1, H2, f0;
  Mat MT;
  PathFunction xi;   // initial path, n components
  PathFunction phi;  // terminal path, m components

  static LinearCoefficients zeros(const Dimensions& d);
  // Throws std::invalid_argument naming the first block whose shape disagrees with d.
  void check_shapes(const Dimensions& d) const;
};

class LinearModel : public GameModel {
 public:
  LinearModel(Dimensions dims, LinearCoefficients coefficients);

  Dimensions dims() const override { return dims_; }
  Vec initial_path(double t) const override;
  Vec terminal_path(double t) const override;
  ForwardCoefficients forward(double t, const Vec& x, const Vec& x_delay, const Vec& v1,
                              const Vec& v2) const override;
  ForwardJacobian forward_jacobian(double t, const Vec& x, const Vec& x_delay, const Vec& v1,
                                   const Vec& v2) const override;
  Vec driver(double t, const StatePoint& s, const Vec& v1, const Vec& v2) const override;
  DriverJacobian driver_jacobian(double t, const StatePoint& s, const Vec& v1,
                                 const Vec& v2) const override;
  Vec terminal(const Vec& x) const override { return c_.MT * x; }
  Mat terminal_jacobian(const Vec&) const override { return c_.MT; }
  bool state_independent_jacobians() const override { return true; }

  ForwardBatch forward_batch(double t, const Mat& x, const Mat& x_delay, const Mat& v1,
                             const Mat& v2) const override;
  Mat driver_batch(double t, const Mat& x, const Mat& y, const Mat& z, const Mat& z_bar,
                   const Mat& y_ant, const Mat& v1, const Mat& v2) const override;
  Mat terminal_batch(const Mat& x) const override { return x * c_.MT.transpose(); }

  const LinearCoefficients& coefficients() const { return c_; }

 private:
  Dimensions dims_;
  LinearCoefficients c_;
};

// Quadratic costs of one player:
//   l = 1/2 (<O x,x> + <P y,y> + <Q z,z> + <Qbar zbar,zbar> + <R v_i,v_i>) + l0(t)
//   Phi = 1/2 <M x,x>,  gamma = 1/2 <N y,y> + <n_lin, y>.
struct PlayerWeights {
  MatrixCoefficient O, P, Q, Qbar, R;
  Mat M, N;
  Vec n_lin;
  TimeFunction l0;

  static PlayerWeights zeros(const Dimensions& d, int player);
};

class QuadraticCosts : public CostModel {
 public:
  QuadraticCosts(Dimensions dims, PlayerWeights w1, PlayerWeights w2);

  double running(int player, double t, const StatePoint& s, const Vec& v1,
                 const Vec& v2) const override;
  CostGradient running_gradient(int player, double t, const StatePoint& s, const Vec& v1,
                                const Vec& v2) const override;
  double terminal(int player, const Vec& x) const override;
  Vec terminal_gradient(int player, const Vec& x) const override;
  double initial(int player, const Vec& y) const override;
  Vec initial_gradient(int player, const Vec& y) const override;

  const PlayerWeights& weights(int player) const { return player == 1 ? w1_ : w2_; }

 private:
  Dimensions dims_;
  PlayerWeights w1_;
  PlayerWeights w2_;
};

}  // namespace delaygame

#endif  // DELAYGAME_LINEAR_MODEL_HPP
