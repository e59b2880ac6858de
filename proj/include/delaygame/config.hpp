#ifndef DELAYGAME_CONFIG_HPP
#define DELAYGAME_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "delaygame/linear_model.hpp"
#include "delaygame/lq_solver.hpp"
#include "delaygame/pension.hpp"

namespace delaygame {

enum class ModelKind { General, Lq, Pension };
const char* to_string(ModelKind kind);

struct GridConfig {
  double T = 1.0;
  double delta = 0.25;
  int n_steps = 100;
};

struct SimulationConfig {
  int m_paths = 10000;
  std::uint64_t master_seed = 42;
  ObservedBasis basis;
};

struct VerificationConfig {
  std::vector<double> epsilons{0.05, 0.1, 0.2};
  std::vector<std::string> directions{"constant", "sine", "piecewise_random"};
  double se_multiplier = 3.0;
  double negative_shift = 0.1;
  std::uint64_t wbar_reseed = 0x5eedULL;
};

// Affine system with quadratic costs and constant candidate controls.
struct GeneralSpec {
  Dimensions dims;
  LinearCoefficients sys;
  PlayerWeights w1, w2;
  Vec u1, u2;
};

struct ModelConfig {
  ModelKind kind = ModelKind::Pension;
  GridConfig grid;
  SimulationConfig simulation;
  FixedPointOptions solver;
  VerificationConfig verification;
  PensionSpec pension;
  DiscountMode mode = DiscountMode::Derived;
  LqModelSpec lq;
  H4Case h4_case = H4Case::A;
  GeneralSpec general;
  nlohmann::json source;  // the document as loaded, with command-line overrides applied

  TimeGrid time_grid() const { return TimeGrid::build(grid.T, grid.delta, grid.n_steps); }
};

// Every problem found in a document, not only the first.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

ModelConfig parse_config(const nlohmann::json& doc);
// Reads and validates a file; JSON syntax errors report line and column.
ModelConfig load_config(const std::string& path);

struct Overrides {
  std::optional<int> paths;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  std::optional<DiscountMode> mode;
};
void apply_overrides(ModelConfig& config, const Overrides& overrides);

}  // namespace delaygame

#endif  // DELAYGAME_CONFIG_HPP
