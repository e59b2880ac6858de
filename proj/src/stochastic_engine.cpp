#include "delaygame/stochastic_engine.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace delaygame {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void fill_increments(Mat& out, int paths, int steps, double h, std::uint64_t seed,
                     std::uint64_t stream) {
  out.resize(paths, steps);
  const double scale = std::sqrt(h);
  for (int p = 0; p < paths; ++p) {
    std::mt19937_64 rng(path_seed(seed, static_cast<std::uint64_t>(p), stream));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int j = 0; j < steps; ++j) out(p, j) = scale * normal(rng);
  }
}

// Monomials of total degree <= degree in k variables, as exponent vectors.
std::vector<std::vector<int>> monomials(int k, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(static_cast<std::size_t>(k), 0);
  std::function<void(int, int)> rec = [&](int idx, int remaining) {
    if (idx == k) {
      out.push_back(current);
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      current[static_cast<std::size_t>(idx)] = e;
      rec(idx + 1, remaining - e);
    }
    current[static_cast<std::size_t>(idx)] = 0;
  };
  rec(0, degree);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    int da = 0, db = 0;
    for (int e : a) da += e;
    for (int e : b) db += e;
    return da < db;
  });
  return out;
}

std::string feature_name(const std::vector<std::string>& names, int idx) {
  if (idx < static_cast<int>(names.size())) return names[static_cast<std::size_t>(idx)];
  return "feature[" + std::to_string(idx) + "]";
}

}  // namespace

TimeGrid TimeGrid::build(double horizon, double delay, int n_steps) {
  if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon T must be positive");
  if (!(delay > 0.0)) throw std::invalid_argument("TimeGrid: delay must be positive");
  if (!(delay < horizon)) throw std::invalid_argument("TimeGrid: delay must be smaller than T");
  if (n_steps <= 0) throw std::invalid_argument("TimeGrid: n_steps must be positive");
  const double ratio = delay * n_steps / horizon;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << "TimeGrid: delay " << delay << " is not a multiple of the step " << horizon / n_steps
        << " (delay/step = " << ratio << ")";
    throw std::invalid_argument(msg.str());
  }
  const int k = static_cast<int>(rounded);
  if (n_steps < 2 * k) {
    throw std::invalid_argument("TimeGrid: n_steps must be at least twice the delay steps");
  }
  return TimeGrid(horizon, delay, n_steps, k);
}

std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t path, std::uint64_t stream) {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(path * 2 + stream + 1));
}

PathBundle sample_paths(const TimeGrid& grid, int m_paths, std::uint64_t master_seed,
                        bool with_wbar) {
  if (m_paths < 1) throw std::invalid_argument("sample_paths: m_paths must be >= 1");
  PathBundle b;
  b.paths = m_paths;
  b.steps = grid.steps();
  b.step = grid.step();
  b.master_seed = master_seed;
  b.wbar_seed = master_seed;
  fill_increments(b.dw, m_paths, b.steps, b.step, master_seed, 0);
  if (with_wbar) fill_increments(b.dwbar, m_paths, b.steps, b.step, master_seed, 1);
  return b;
}

void reseed_wbar(PathBundle& bundle, std::uint64_t new_seed) {
  bundle.wbar_seed = new_seed;
  fill_increments(bundle.dwbar, bundle.paths, bundle.steps, bundle.step, new_seed, 1);
}

Mat brownian_levels(const PathBundle& bundle, Noise which) {
  const Mat& inc = bundle.increments(which);
  if (inc.size() == 0) throw std::invalid_argument("brownian_levels: bundle has no W-bar");
  Mat levels = Mat::Zero(bundle.paths, bundle.steps + 1);
  for (int j = 0; j < bundle.steps; ++j) levels.col(j + 1) = levels.col(j) + inc.col(j);
  return levels;
}

Projector::Projector(const Mat& features, const ObservedBasis& basis,
                     const std::vector<std::string>& names) {
  const Eigen::Index m = features.rows();
  const int k = static_cast<int>(features.cols());
  if (m < 1) throw std::invalid_argument("Projector: no paths");

  std::vector<Vec> standardized;
  Mat kept_block(m, 0);
  for (int c = 0; c < k; ++c) {
    const auto col = features.col(c);
    if (!col.allFinite()) {
      throw std::invalid_argument("Projector: non-finite values in " + feature_name(names, c));
    }
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    const double scale = std::max(1.0, std::abs(mean));
    if (!(var > 1e-24 * scale * scale)) continue;
    Vec z = (col.array() - mean) / std::sqrt(var);

    // Linear collinearity with already kept features.
    if (kept_block.cols() > 0) {
      const Mat cross = kept_block.transpose() * kept_block / static_cast<double>(m);
      const Vec proj = cross.ldlt().solve(kept_block.transpose() * z / static_cast<double>(m));
      const double resid = (z - kept_block * proj).squaredNorm() / static_cast<double>(m);
      if (resid < 1e-10) {
        if (basis.collinear == CollinearPolicy::Error) {
          throw std::invalid_argument("Projector: rank-deficient design, " +
                                      feature_name(names, c) +
                                      " is collinear with earlier features");
        }
        continue;
      }
    }
    kept_block.conservativeResize(m, kept_block.cols() + 1);
    kept_block.col(kept_block.cols() - 1) = z;
    kept_.push_back(c);
  }

  const int kk = static_cast<int>(kept_block.cols());
  const auto terms = monomials(kk, kk == 0 ? 0 : basis.degree);
  design_.resize(m, static_cast<Eigen::Index>(terms.size()));
  for (std::size_t t = 0; t < terms.size(); ++t) {
    Vec col = Vec::Ones(m);
    for (int f = 0; f < kk; ++f)
      for (int e = 0; e < terms[t][static_cast<std::size_t>(f)]; ++e)
        col.array() *= kept_block.col(f).array();
    design_.col(static_cast<Eigen::Index>(t)) = col;
  }

  const Eigen::Index p = design_.cols();
  Mat gram = Mat::Zero(p, p);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(design_.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  gram /= static_cast<double>(m);
  // The intercept stays unpenalized so fitted values preserve the sample mean.
  for (Eigen::Index i = 1; i < p; ++i) gram(i, i) += basis.ridge;
  gram_.compute(gram);
  if (gram_.info() != Eigen::Success || !(gram_.vectorD().array() > 0.0).all()) {
    std::string worst = kept_.empty() ? std::string("intercept") : feature_name(names, kept_.back());
    throw std::invalid_argument("Projector: rank-deficient design after regularization near " +
                                worst);
  }
}

Mat Projector::apply(const Mat& targets) const {
  const double m = static_cast<double>(design_.rows());
  const Mat coef = gram_.solve(design_.transpose() * targets / m);
  return design_ * coef;
}

Vec Projector::apply(const Vec& targets) const {
  return design_ * coefficients(targets);
}

Vec Projector::coefficients(const Vec& targets) const {
  const double m = static_cast<double>(design_.rows());
  return gram_.solve(design_.transpose() * targets / m);
}

const Projector& ConditionalEstimator::at(int time_index) const {
  for (const auto& [j, proj] : cache_)
    if (j == time_index) return proj;
  cache_.emplace_back(time_index, Projector(features_(time_index), basis_, names_));
  return cache_.back().second;
}

Vec estimate_conditional(const Vec& targets, int time_index, const Mat& features,
                         const ObservedBasis& basis, const std::vector<std::string>& names) {
  if (targets.size() != features.rows()) {
    throw std::invalid_argument("estimate_conditional: " + std::to_string(targets.size()) +
                                " targets vs " + std::to_string(features.rows()) +
                                " feature rows at time index " + std::to_string(time_index));
  }
  return Projector(features, basis, names).apply(targets);
}

SampleStats sample_stats(const Eigen::Ref<const Vec>& samples) {
  SampleStats s;
  const auto n = samples.size();
  if (n == 0) return s;
  s.mean = samples.mean();
  if (n > 1) {
    const double var = (samples.array() - s.mean).square().sum() / static_cast<double>(n - 1);
    s.se = std::sqrt(var / static_cast<double>(n));
  }
  return s;
}

}  // namespace delaygame
