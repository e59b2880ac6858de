#ifndef DELAYGAME_COEFFICIENTS_HPP
#define DELAYGAME_COEFFICIENTS_HPP

#include <string>
#include <vector>

#include "delaygame/trajectory.hpp"

namespace delaygame {

// Deterministic scalar function of time: constant, linear a + b t, or piecewise constant.
class TimeFunction {
 public:
  enum class Kind { Constant, Linear, Piecewise };

  TimeFunction() = default;
  TimeFunction(double value) : constant_(value) {}  // NOLINT: implicit on purpose

  static TimeFunction constant(double value) { return TimeFunction(value); }
  static TimeFunction linear(double intercept, double slope);
  // values[i] holds on [breaks[i], breaks[i+1]); the last value extends to +inf,
  // the first one to -inf.
  static TimeFunction piecewise(std::vector<double> breaks, std::vector<double> values);

  double operator()(double t) const;
  Kind kind() const { return kind_; }
  bool is_zero() const;

 private:
  Kind kind_ = Kind::Constant;
  double constant_ = 0.0;
  double slope_ = 0.0;
  std::vector<double> breaks_;
  std::vector<double> values_;
};

// Matrix-valued piecewise-constant coefficient; times outside the table are clamped.
class MatrixCoefficient {
 public:
  MatrixCoefficient() = default;
  MatrixCoefficient(Mat value) : values_{std::move(value)} {}  // NOLINT
  MatrixCoefficient(std::vector<double> breaks, std::vector<Mat> values);

  static MatrixCoefficient zero(int rows, int cols) { return MatrixCoefficient(Mat::Zero(rows, cols)); }
  static MatrixCoefficient scalar(double v) { return MatrixCoefficient(Mat::Constant(1, 1, v)); }

  const Mat& operator()(double t) const;
  int rows() const { return values_.empty() ? 0 : static_cast<int>(values_.front().rows()); }
  int cols() const { return values_.empty() ? 0 : static_cast<int>(values_.front().cols()); }
  bool is_zero() const;
  bool is_constant() const { return values_.size() <= 1; }
  const std::vector<Mat>& pieces() const { return values_; }
  const std::vector<double>& breaks() const { return breaks_; }

 private:
  std::vector<double> breaks_;
  std::vector<Mat> values_;
};

// Vector-valued deterministic path, one TimeFunction per component.
using PathFunction = std::vector<TimeFunction>;
Vec evaluate(const PathFunction& f, double t);

}  // namespace delaygame

#endif  // DELAYGAME_COEFFICIENTS_HPP
