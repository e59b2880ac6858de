#ifndef DELAYGAME_MODEL_HPP
#define DELAYGAME_MODEL_HPP

#include "delaygame/trajectory.hpp"

namespace delaygame {

struct Dimensions {
  int n = 1;   // forward state
  int m = 1;   // backward state
  int k1 = 1;  // player 1 control
  int k2 = 1;  // player 2 control
};

// Values of the state block at one time on one path.
struct StatePoint {
  Vec x;
  Vec x_delay;
  Vec y;
  Vec z;
  Vec z_bar;
  Vec y_ant;  // conditional expectation of y(t + delta)
};

struct ForwardCoefficients {
  Vec b;
  Vec sigma;
  Vec sigma_bar;
};

struct ForwardJacobian {
  Mat b_x, b_xd, b_v1, b_v2;
  Mat s_x, s_xd, s_v1, s_v2;
  Mat sb_x, sb_xd, sb_v1, sb_v2;
};

struct DriverJacobian {
  Mat f_x, f_y, f_z, f_zb, f_yp, f_v1, f_v2;
};

// Batch of per-path values at one time: rows are paths.
struct ForwardBatch {
  Mat b;
  Mat sigma;
  Mat sigma_bar;
};

// Coefficients of the controlled forward-backward system with delay and anticipation.
class GameModel {
 public:
  virtual ~GameModel() = default;

  virtual Dimensions dims() const = 0;
  virtual Vec initial_path(double t) const = 0;   // xi on [-delta, 0]
  virtual Vec terminal_path(double t) const = 0;  // phi on (T, T + delta]

  virtual ForwardCoefficients forward(double t, const Vec& x, const Vec& x_delay, const Vec& v1,
                                      const Vec& v2) const = 0;
  virtual ForwardJacobian forward_jacobian(double t, const Vec& x, const Vec& x_delay,
                                           const Vec& v1, const Vec& v2) const = 0;
  virtual Vec driver(double t, const StatePoint& s, const Vec& v1, const Vec& v2) const = 0;
  virtual DriverJacobian driver_jacobian(double t, const StatePoint& s, const Vec& v1,
                                         const Vec& v2) const = 0;
  virtual Vec terminal(const Vec& x) const = 0;
  virtual Mat terminal_jacobian(const Vec& x) const = 0;

  // True when the Jacobians depend on time only; solvers then evaluate them once per step.
  virtual bool state_independent_jacobians() const { return false; }

  virtual ForwardBatch forward_batch(double t, const Mat& x, const Mat& x_delay, const Mat& v1,
                                     const Mat& v2) const;
  virtual Mat driver_batch(double t, const Mat& x, const Mat& y, const Mat& z, const Mat& z_bar,
                           const Mat& y_ant, const Mat& v1, const Mat& v2) const;
  virtual Mat terminal_batch(const Mat& x) const;
};

struct CostGradient {
  Vec l_x, l_y, l_z, l_zb, l_v1, l_v2;
};

// Running, terminal and initial costs of both players; players are 1 and 2.
class CostModel {
 public:
  virtual ~CostModel() = default;

  virtual double running(int player, double t, const StatePoint& s, const Vec& v1,
                         const Vec& v2) const = 0;
  virtual CostGradient running_gradient(int player, double t, const StatePoint& s, const Vec& v1,
                                        const Vec& v2) const = 0;
  virtual double terminal(int player, const Vec& x) const = 0;
  virtual Vec terminal_gradient(int player, const Vec& x) const = 0;
  virtual double initial(int player, const Vec& y) const = 0;
  virtual Vec initial_gradient(int player, const Vec& y) const = 0;
};

}  // namespace delaygame

#endif  // DELAYGAME_MODEL_HPP
