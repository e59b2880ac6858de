#ifndef DELAYGAME_STOCHASTIC_ENGINE_HPP
#define DELAYGAME_STOCHASTIC_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "delaygame/trajectory.hpp"

namespace delaygame {

// Raised when a solver produces a non-finite value; carries where it happened.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int time_index, int path)
      : std::runtime_error(what + " (time index " + std::to_string(time_index) + ", path " +
                           std::to_string(path) + ")"),
        time_index_(time_index), path_(path) {}
  int time_index() const { return time_index_; }
  int path() const { return path_; }

 private:
  int time_index_;
  int path_;
};

// Uniform grid on [-delta, T + delta]; the delay is an exact multiple of the step.
class TimeGrid {
 public:
  static TimeGrid build(double horizon, double delay, int n_steps);

  double horizon() const { return horizon_; }
  double delay() const { return delay_; }
  int steps() const { return n_steps_; }
  int delay_steps() const { return delay_steps_; }
  double step() const { return horizon_ / n_steps_; }
  double time(int j) const { return horizon_ * static_cast<double>(j) / n_steps_; }
  int first_index() const { return -delay_steps_; }
  int last_index() const { return n_steps_ + delay_steps_; }

 private:
  TimeGrid(double horizon, double delay, int n_steps, int delay_steps)
      : horizon_(horizon), delay_(delay), n_steps_(n_steps), delay_steps_(delay_steps) {}

  double horizon_;
  double delay_;
  int n_steps_;
  int delay_steps_;
};

enum class Noise { W, WBar };

// Brownian increments of (W, W-bar), paths x n_steps each.
struct PathBundle {
  int paths = 0;
  int steps = 0;
  double step = 0.0;
  std::uint64_t master_seed = 0;
  std::uint64_t wbar_seed = 0;
  Mat dw;
  Mat dwbar;  // empty when the bundle was sampled without W-bar

  bool has_wbar() const { return dwbar.size() > 0; }
  const Mat& increments(Noise which) const { return which == Noise::W ? dw : dwbar; }
};

// Seed of one (path, stream) pair; depends only on its arguments.
std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t path, std::uint64_t stream);

PathBundle sample_paths(const TimeGrid& grid, int m_paths, std::uint64_t master_seed,
                        bool with_wbar = true);

// Regenerates the W-bar increments from a new seed, keeping W untouched.
void reseed_wbar(PathBundle& bundle, std::uint64_t new_seed);

// Brownian levels at grid indices 0..N, paths x (N + 1).
Mat brownian_levels(const PathBundle& bundle, Noise which);

enum class CollinearPolicy { Error, Drop };

struct ObservedBasis {
  int degree = 2;
  double ridge = 1e-8;
  CollinearPolicy collinear = CollinearPolicy::Error;
};

// Least-squares projection onto polynomials of standardized features at one time.
// Zero-variance features are dropped: constants are already in the span.
class Projector {
 public:
  Projector(const Mat& features, const ObservedBasis& basis,
            const std::vector<std::string>& names = {});

  Mat apply(const Mat& targets) const;
  Vec apply(const Vec& targets) const;
  Vec coefficients(const Vec& targets) const;

  int basis_size() const { return static_cast<int>(design_.cols()); }
  const std::vector<int>& kept_features() const { return kept_; }

 private:
  Mat design_;
  Eigen::LDLT<Mat> gram_;
  std::vector<int> kept_;
};

// Observed features at a grid index, paths x k.
using FeatureProvider = std::function<Mat(int)>;

// Caches one projector per grid index on top of a feature provider.
class ConditionalEstimator {
 public:
  ConditionalEstimator(FeatureProvider features, ObservedBasis basis,
                       std::vector<std::string> names = {})
      : features_(std::move(features)), basis_(basis), names_(std::move(names)) {}

  const Projector& at(int time_index) const;
  const ObservedBasis& basis() const { return basis_; }
  Mat features(int time_index) const { return features_(time_index); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  FeatureProvider features_;
  ObservedBasis basis_;
  std::vector<std::string> names_;
  mutable std::vector<std::pair<int, Projector>> cache_;
};

// One-shot fit of E[target | features] returning the fitted value per path.
Vec estimate_conditional(const Vec& targets, int time_index, const Mat& features,
                         const ObservedBasis& basis, const std::vector<std::string>& names = {});

// Helpers shared by the solvers.
struct SampleStats {
  double mean = 0.0;
  double se = 0.0;
};
SampleStats sample_stats(const Eigen::Ref<const Vec>& samples);

}  // namespace delaygame

#endif  // DELAYGAME_STOCHASTIC_ENGINE_HPP
