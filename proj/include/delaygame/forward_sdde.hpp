#ifndef DELAYGAME_FORWARD_SDDE_HPP
#define DELAYGAME_FORWARD_SDDE_HPP

#include "delaygame/model.hpp"
#include "delaygame/stochastic_engine.hpp"

namespace delaygame {

// Explicit Euler for the forward delayed equation; x is returned on [-delta, T].
Trajectory solve_forward(const GameModel& model, const ControlPair& controls, const TimeGrid& grid,
                         const PathBundle& paths);

// Pathwise exact solution of dx = a x dt + s x dW on [0, T].
Trajectory exact_linear_reference(double a, double s, double x0, const TimeGrid& grid,
                                  const PathBundle& paths);

// One step of dp = (a p + f) dt + (c p + d) dW + (cb p + db) dWbar, scalar p per path,
// with the homogeneous part integrated exactly over the step.
Mat linear_sde_step(const Mat& p, const Mat& a, const Mat& c, const Mat& cb, const Mat& f,
                    const Mat& d, const Mat& db, const Eigen::Ref<const Vec>& dw,
                    const Eigen::Ref<const Vec>& dwbar, double h);

// Throws NumericalError at the first non-finite entry of a slice.
void require_finite(const Mat& values, const std::string& what, int time_index);

}  // namespace delaygame

#endif  // DELAYGAME_FORWARD_SDDE_HPP
