#ifndef DELAYGAME_LQ_SOLVER_HPP
#define DELAYGAME_LQ_SOLVER_HPP

#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "delaygame/game_core.hpp"
#include "delaygame/linear_model.hpp"
#include "delaygame/stochastic_engine.hpp"

namespace delaygame {

// Linear system (A .. H2, MT, xi, phi in sys) plus quadratic weights of both players.
// The observation is W; W-bar enters the state only through the Cw, Cwbar, Dw*, sw0 blocks.
struct LqModelSpec {
  Dimensions dims;
  LinearCoefficients sys;
  PlayerWeights w1;
  PlayerWeights w2;
  double condition_cap = 1e8;

  const PlayerWeights& weights(int i) const { return i == 1 ? w1 : w2; }
  const MatrixCoefficient& B(int i) const { return i == 1 ? sys.B1 : sys.B2; }
  const MatrixCoefficient& D(int i) const { return i == 1 ? sys.D1 : sys.D2; }
  const MatrixCoefficient& H(int i) const { return i == 1 ? sys.H1 : sys.H2; }
};

// All violated invariants (symmetry, sign, conditioning, shapes); empty when valid.
std::vector<std::string> lq_violations(const LqModelSpec& spec);
void validate(const LqModelSpec& spec);

LinearModel lq_game_model(const LqModelSpec& spec);
QuadraticCosts lq_costs(const LqModelSpec& spec);

struct FilteredTriple {
  Trajectory x;  // [-k, N]
  Trajectory y;  // [0, N + k]
  Trajectory z;  // [0, N]
  std::array<Trajectory, 2> p;  // [-k, N]
  std::array<Trajectory, 2> q;  // [0, N + k]
  std::array<Trajectory, 2> k;  // [0, N + k]
};

ControlPair equilibrium_controls(const LqModelSpec& spec, const FilteredTriple& filtered,
                                 const TimeGrid& grid);

struct FixedPointOptions {
  double damping = 0.5;
  double tol = 1e-6;
  int max_iter = 50;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

struct LqSolution {
  FilteredTriple filtered;  // under the last iterate; controls are read off it
  ControlPair controls;
  std::vector<double> residuals;  // discrete L2 change of the controls per iteration
  int iterations = 0;
  bool monotone_after_three = true;
};

// Filtered state and both players' filtered adjoints for given controls.
FilteredTriple solve_filtered_system(const LqModelSpec& spec, const ControlPair& controls,
                                     const TimeGrid& grid, const PathBundle& paths,
                                     const ObservedBasis& basis);

LqSolution solve_lq_fixed_point(const LqModelSpec& spec, const TimeGrid& grid,
                                const PathBundle& paths, const ObservedBasis& basis,
                                const FixedPointOptions& options = {});

enum class H4Case { A, B, C };

// Throws std::invalid_argument naming the first violated condition.
void check_h4(const LqModelSpec& spec, H4Case which, const TimeGrid& grid);

struct DoubleSystem {
  Trajectory x, y, z;  // as in FilteredTriple
  Trajectory p, q, k;  // aggregated adjoints
  std::vector<double> residuals;
  int iterations = 0;
};

DoubleSystem solve_dfbsdde(const LqModelSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                           const ObservedBasis& basis, const FixedPointOptions& options = {});

struct H4Report {
  H4Case which = H4Case::A;
  bool solved = false;  // false for cases B and C: preconditions only
  double rel_x = 0.0, rel_y = 0.0, rel_z = 0.0;
  double rel_p = 0.0, rel_q = 0.0, rel_k = 0.0;
  int iterations_triple = 0;
  int iterations_double = 0;
};

H4Report crosscheck_h4(const LqModelSpec& spec, H4Case which, const TimeGrid& grid,
                       const PathBundle& paths, const ObservedBasis& basis,
                       const FixedPointOptions& options = {});

// Adjoint of one player from a filtered triple, in the layout of the generic solver.
AdjointTrajectory filtered_adjoint(const FilteredTriple& filtered, int player);

// Discrete L2 distance relative to the reference over a common index range.
double relative_l2(const Trajectory& a, const Trajectory& reference, int first, int last);

}  // namespace delaygame

#endif  // DELAYGAME_LQ_SOLVER_HPP
