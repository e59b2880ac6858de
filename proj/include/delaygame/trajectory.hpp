#ifndef DELAYGAME_TRAJECTORY_HPP
#define DELAYGAME_TRAJECTORY_HPP

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace delaygame {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Per-path values of a vector process on a contiguous range of grid indices.
// Each slice is paths x dim, so one column holds a component across paths.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(int first, int last, int paths, int dim)
      : first_(first), paths_(paths), dim_(dim),
        values_(static_cast<std::size_t>(last - first + 1), Mat::Zero(paths, dim)) {
    if (last < first) throw std::invalid_argument("Trajectory: empty index range");
  }

  int first() const { return first_; }
  int last() const { return first_ + static_cast<int>(values_.size()) - 1; }
  int paths() const { return paths_; }
  int dim() const { return dim_; }
  bool contains(int j) const { return j >= first() && j <= last(); }

  Mat& at(int j) { return values_.at(static_cast<std::size_t>(j - first_)); }
  const Mat& at(int j) const { return values_.at(static_cast<std::size_t>(j - first_)); }

  // Single path, single time.
  Vec point(int j, int path) const { return at(j).row(path).transpose(); }

 private:
  int first_ = 0;
  int paths_ = 0;
  int dim_ = 0;
  std::vector<Mat> values_;
};

// Box constraints per component; unbounded by default.
struct AdmissibleSet {
  Vec lower;
  Vec upper;

  static AdmissibleSet whole_space(int dim) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {Vec::Constant(dim, -inf), Vec::Constant(dim, inf)};
  }
  static AdmissibleSet positive(int dim) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {Vec::Constant(dim, std::numeric_limits<double>::min()), Vec::Constant(dim, inf)};
  }

  bool contains(const Eigen::Ref<const Vec>& v) const {
    return (v.array() >= lower.array()).all() && (v.array() <= upper.array()).all();
  }
  bool contains(const Trajectory& u) const {
    for (int j = u.first(); j <= u.last(); ++j)
      for (int p = 0; p < u.paths(); ++p)
        if (!contains(u.at(j).row(p).transpose())) return false;
    return true;
  }
};

// Open-loop controls of both players on grid indices [0, N].
struct ControlPair {
  Trajectory u1;
  Trajectory u2;
  AdmissibleSet set1;
  AdmissibleSet set2;

  const Trajectory& player(int i) const { return i == 1 ? u1 : u2; }
  Trajectory& player(int i) { return i == 1 ? u1 : u2; }
  const AdmissibleSet& admissible(int i) const { return i == 1 ? set1 : set2; }

  static ControlPair zeros(int n_steps, int paths, int k1, int k2) {
    return {Trajectory(0, n_steps, paths, k1), Trajectory(0, n_steps, paths, k2),
            AdmissibleSet::whole_space(k1), AdmissibleSet::whole_space(k2)};
  }
};

}  // namespace delaygame

#endif  // DELAYGAME_TRAJECTORY_HPP
