#ifndef DELAYGAME_GAME_CORE_HPP
#define DELAYGAME_GAME_CORE_HPP

#include <functional>
#include <string>
#include <vector>

#include "delaygame/backward_absde.hpp"
#include "delaygame/model.hpp"
#include "delaygame/stochastic_engine.hpp"

namespace delaygame {

struct AdjointPoint {
  Vec p, q, k, k_bar;
};

double hamiltonian(int player, double t, const StatePoint& s, const Vec& v1, const Vec& v2,
                   const AdjointPoint& a, const GameModel& model, const CostModel& costs);

Vec hamiltonian_control_gradient(int player, double t, const StatePoint& s, const Vec& v1,
                                 const Vec& v2, const AdjointPoint& a, const GameModel& model,
                                 const CostModel& costs);

// Forward state and its backward companion under fixed controls.
struct StateSolution {
  Trajectory x;              // [-k, N]
  BackwardTrajectory back;   // y on [0, N + k], z and z_bar on [0, N]
};

// Regression features of the full filtration at grid index j: W, Wbar, x, x(t - delta)
// and any extra trajectories (read at j).
FeatureProvider full_information_features(const Trajectory& x, const TimeGrid& grid,
                                          const PathBundle& paths,
                                          std::vector<const Trajectory*> extra = {});

// Features of the observed filtration: W and the given observed trajectories.
FeatureProvider observed_features(const TimeGrid& grid, const PathBundle& paths,
                                  std::vector<const Trajectory*> observed = {});

StateSolution solve_state(const GameModel& model, const ControlPair& controls,
                          const TimeGrid& grid, const PathBundle& paths, const ObservedBasis& basis);

struct AdjointTrajectory {
  Trajectory p;      // [-k, N], zero before 0
  Trajectory q;      // [0, N + k], zero after N
  Trajectory k;      // [0, N + k]
  Trajectory k_bar;  // [0, N + k]

  AdjointPoint point(int j, int path) const;
};

AdjointTrajectory assemble_and_solve_adjoint(int player, const GameModel& model,
                                             const CostModel& costs, const StateSolution& state,
                                             const ControlPair& controls, const TimeGrid& grid,
                                             const PathBundle& paths, const ObservedBasis& basis);

struct CostEstimate {
  double value = 0.0;
  double se = 0.0;
  bool exact = false;  // zero sampling error
  Vec samples;         // per-path contributions; their mean is value
};

CostEstimate eval_cost(int player, const GameModel& model, const CostModel& costs,
                       const StateSolution& state, const ControlPair& controls,
                       const TimeGrid& grid);

CostEstimate eval_cost(int player, const GameModel& model, const CostModel& costs,
                       const ControlPair& controls, const TimeGrid& grid, const PathBundle& paths,
                       const ObservedBasis& basis);

// Variational processes for a perturbation direction of one player.
struct VariationalSolution {
  Trajectory x1;             // [-k, N]
  BackwardTrajectory back;   // y1, z1, zbar1
};

VariationalSolution solve_variational(int player, const GameModel& model,
                                      const StateSolution& state, const ControlPair& controls,
                                      const Trajectory& direction, const TimeGrid& grid,
                                      const PathBundle& paths, const ObservedBasis& basis);

struct Residual {
  double value = 0.0;
  double se = 0.0;
  bool exact = false;
  bool pass = false;
};

struct DualityReport {
  Residual delayed_drift;  // pairing of b_{x_delta} q with x1 shifted by delta
  Residual anticipated;    // pairing of f_{y_delta+} p with y1 shifted by delta
  bool pass = false;
};

DualityReport check_duality(int player, const GameModel& model, const StateSolution& state,
                            const AdjointTrajectory& adjoint,
                            const VariationalSolution& variational, const ControlPair& controls,
                            const TimeGrid& grid, const PathBundle& paths,
                            const ObservedBasis& basis, double se_multiplier = 3.0);

// Deterministic perturbation direction of a player's control; a relative direction is
// multiplied by the candidate control path by path.
struct Direction {
  std::string name;
  std::function<Vec(double)> value;
  bool relative = false;
};

std::vector<Direction> default_directions(int dim, double horizon, std::uint64_t seed = 20240611,
                                          bool relative = false);

// The named subset of default_directions, in the given order; unknown names throw.
std::vector<Direction> select_directions(const std::vector<std::string>& names, int dim,
                                         double horizon, bool relative = false);

Trajectory direction_trajectory(const Direction& d, const Trajectory& candidate,
                                const TimeGrid& grid);

// H_{v_i} per path at grid index j, paths x k_i.
Mat control_gradient_field(int player, const GameModel& model, const CostModel& costs,
                           const StateSolution& state, const AdjointTrajectory& adjoint,
                           const ControlPair& controls, const TimeGrid& grid, int j);

enum class FirstOrderForm { Equality, Inequality };

struct FirstOrderStats {
  double statistic = 0.0;      // max over times and directions of |mean| / SE
  double max_abs = 0.0;        // largest |mean of conditional estimate|
  double se_at_max = 0.0;
  double max_rms = 0.0;        // largest RMS of the per-path conditional estimate
  int worst_index = -1;
  std::string worst_direction;
  bool pass = false;
};

FirstOrderStats check_first_order(int player, const GameModel& model, const CostModel& costs,
                                  const StateSolution& state, const AdjointTrajectory& adjoint,
                                  const ControlPair& controls,
                                  const std::vector<Direction>& directions, const TimeGrid& grid,
                                  const FeatureProvider& observed, const ObservedBasis& basis,
                                  FirstOrderForm form = FirstOrderForm::Equality,
                                  double se_multiplier = 3.0);

// Same statistic for an explicitly given gradient field (paths x k_i per grid index).
FirstOrderStats first_order_statistic(const std::function<Mat(int)>& gradient,
                                      const ControlPair& controls, int player,
                                      const std::vector<Direction>& directions,
                                      const TimeGrid& grid, const FeatureProvider& observed,
                                      const ObservedBasis& basis, FirstOrderForm form,
                                      double se_multiplier);

// Named pass/fail outcome of one verification.
struct Flag {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct NashRow {
  int player = 1;
  std::string direction;
  double epsilon = 0.0;
  double delta = 0.0;
  double se = 0.0;
  bool exact = false;
  bool pass = false;
};

struct NashReport {
  CostEstimate j1;
  CostEstimate j2;
  std::vector<NashRow> rows;
  bool pass = false;
};

NashReport verify_nash(const GameModel& model, const CostModel& costs, const ControlPair& candidate,
                       const std::vector<Direction>& directions1,
                       const std::vector<Direction>& directions2,
                       const std::vector<double>& epsilons, const TimeGrid& grid,
                       const PathBundle& paths, const ObservedBasis& basis,
                       double se_multiplier = 3.0);

}  // namespace delaygame

#endif  // DELAYGAME_GAME_CORE_HPP
