#ifndef DELAYGAME_PENSION_HPP
#define DELAYGAME_PENSION_HPP

#include <string>
#include <vector>

#include "delaygame/coefficients.hpp"
#include "delaygame/game_core.hpp"
#include "delaygame/model.hpp"
#include "delaygame/stochastic_engine.hpp"

namespace delaygame {

// Two managers consuming from a common fund
//   dx = (r x + (mu - r) pi - alpha (x - x_d) - c1 - c2) dt + pi sigma dW + sigma_bar dWbar,
//   x(0) = x0, x = 0 on [-delta, 0), with risk driver g z.
struct PensionSpec {
  TimeFunction r = 0.03;
  TimeFunction mu = 0.07;
  TimeFunction sigma = 0.2;
  TimeFunction sigma_bar = 0.1;
  TimeFunction g = 0.3;
  TimeFunction pi = 0.5;
  double alpha = 0.1;
  double beta = 0.05;
  double gamma = 0.5;
  double L1 = 1.0;
  double L2 = 1.0;
  double x0 = 1.0;
  double delay = 0.25;
  double horizon = 1.0;

  double L(int i) const { return i == 1 ? L1 : L2; }
};

std::vector<std::string> pension_violations(const PensionSpec& spec);
void validate(const PensionSpec& spec);

// Discount exponent of the consumption formula: e^{r t} as printed, or e^{beta t} from the
// stationarity of the Hamiltonian.
enum class DiscountMode { Paper, Derived };
const char* to_string(DiscountMode mode);

// exp(int g dW - 1/2 int g^2 ds), left-endpoint sums; [0, N], one column.
Trajectory phat(const PensionSpec& spec, const TimeGrid& grid, const PathBundle& paths);

// Deterministic factor a with qhat = a phat on [0, T] and a = 0 after T.
struct QhatFactor {
  std::vector<double> a;        // grid indices 0..N
  std::vector<int> seams;       // indices of T - n delta, descending
  double seam_jump = 0.0;       // largest mismatch of neighbouring interval formulas
};
QhatFactor qhat_factor(const PensionSpec& spec, const TimeGrid& grid);

struct PensionAdjoint {
  Trajectory p;  // [0, N]
  Trajectory q;  // [0, N + k], identical for both players
  Trajectory k;  // [0, N + k]
  QhatFactor factor;
};
PensionAdjoint qhat_khat_recursive(const PensionSpec& spec, const TimeGrid& grid,
                                   const PathBundle& paths);

inline constexpr double kQhatFloor = 1e-12;

struct Consumption {
  ControlPair controls;  // positive admissible sets
  int floor_events = 0;
};
Consumption equilibrium_consumption(const PensionSpec& spec, const Trajectory& qhat,
                                    const TimeGrid& grid, DiscountMode mode = DiscountMode::Derived);

enum class RiskMethod { Bsde, Girsanov };
const char* to_string(RiskMethod method);

struct RiskMeasureResult {
  double value = 0.0;
  double se = 0.0;
  bool exact = false;
  RiskMethod method = RiskMethod::Bsde;
  Vec samples;  // per-path contributions, mean equals value
};

// rho(xi) = E_g[-xi] for the driver g z. The BSDE method regresses on the given features,
// or on the levels of W and Wbar when none are given.
RiskMeasureResult evaluate_risk(const TimeFunction& g, const Vec& xi, const TimeGrid& grid,
                                const PathBundle& paths, RiskMethod method,
                                const ObservedBasis& basis = {},
                                const FeatureProvider& features = {});

class PensionModel : public GameModel {
 public:
  explicit PensionModel(PensionSpec spec) : s_(std::move(spec)) {}

  Dimensions dims() const override { return {1, 1, 1, 1}; }
  Vec initial_path(double t) const override;
  Vec terminal_path(double) const override { return Vec::Zero(1); }
  ForwardCoefficients forward(double t, const Vec& x, const Vec& x_delay, const Vec& v1,
                              const Vec& v2) const override;
  ForwardJacobian forward_jacobian(double t, const Vec& x, const Vec& x_delay, const Vec& v1,
                                   const Vec& v2) const override;
  Vec driver(double t, const StatePoint& s, const Vec& v1, const Vec& v2) const override;
  DriverJacobian driver_jacobian(double t, const StatePoint& s, const Vec& v1,
                                 const Vec& v2) const override;
  Vec terminal(const Vec& x) const override { return -x; }
  Mat terminal_jacobian(const Vec&) const override { return -Mat::Identity(1, 1); }
  bool state_independent_jacobians() const override { return true; }

  ForwardBatch forward_batch(double t, const Mat& x, const Mat& x_delay, const Mat& v1,
                             const Mat& v2) const override;
  Mat driver_batch(double t, const Mat& x, const Mat& y, const Mat& z, const Mat& z_bar,
                   const Mat& y_ant, const Mat& v1, const Mat& v2) const override;
  Mat terminal_batch(const Mat& x) const override { return -x; }

  const PensionSpec& spec() const { return s_; }

 private:
  PensionSpec s_;
};

// Utility of consumption, zero terminal reward, and -y(0) from the risk of x(T).
class PensionCosts : public CostModel {
 public:
  explicit PensionCosts(PensionSpec spec) : s_(std::move(spec)) {}

  double running(int player, double t, const StatePoint& s, const Vec& v1,
                 const Vec& v2) const override;
  CostGradient running_gradient(int player, double t, const StatePoint& s, const Vec& v1,
                                const Vec& v2) const override;
  double terminal(int, const Vec&) const override { return 0.0; }
  Vec terminal_gradient(int, const Vec&) const override { return Vec::Zero(1); }
  double initial(int, const Vec& y) const override { return -y(0); }
  Vec initial_gradient(int, const Vec&) const override { return -Vec::Ones(1); }

 private:
  PensionSpec s_;
};

// Closed-form adjoint in the layout of the generic solver (k_bar = 0).
AdjointTrajectory closed_form_adjoint(const PensionAdjoint& adjoint, const TimeGrid& grid);

struct PensionOptions {
  DiscountMode mode = DiscountMode::Derived;
  ObservedBasis basis;
  std::vector<double> epsilons{0.05, 0.1, 0.2};
  std::vector<std::string> directions{"constant", "sine", "piecewise_random"};
  double se_multiplier = 3.0;
  double negative_shift = 0.1;       // relative shift of the candidate for the power check
  double negative_threshold = 5.0;   // the shifted candidate must exceed this many SE
  std::uint64_t reseed_wbar = 0x5eedULL;
};

struct PensionReport {
  PensionAdjoint adjoint;
  Consumption consumption;
  StateSolution state;
  CostEstimate j1, j2;
  RiskMeasureResult risk_bsde, risk_girsanov;
  double risk_gap_se = 0.0;  // SE of the paired difference
  std::vector<SampleStats> phat_mean;  // per grid index
  double min_q = 0.0, min_c = 0.0;
  FirstOrderStats first_order[2];
  FirstOrderStats shifted[2];
  NashReport nash;
  std::vector<Flag> flags;
  bool pass = false;
};

PensionReport run_pension(const PensionSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                          const PensionOptions& options = {});

}  // namespace delaygame

#endif  // DELAYGAME_PENSION_HPP
