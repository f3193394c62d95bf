#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "labelflip/svm.hpp"

namespace labelflip {

/// At most L labels may be flipped.
struct FlipBudget {
  std::size_t L = 0;
};

/// A tainted label vector together with the flip set that produced it.
struct FlipPlan {
  std::string strategy;
  Vector z;
  IndexList flipped;  ///< ascending
  /// Per-iteration objective of the strategy (meaning depends on strategy).
  std::vector<double> objective_trace;
  /// Strategy objective of the returned plan (e.g. E* for correlated clusters).
  double score = 0.0;
  std::vector<std::string> warnings;
};

/// z = y with the labels at `flipped` negated; flipped is sorted and deduplicated.
FlipPlan make_plan(std::string strategy, const Vector& y, IndexList flipped);
/// Throws std::logic_error unless |flipped| <= L and z matches y off the flip set.
void check_plan(const FlipPlan& plan, const Vector& y, FlipBudget budget);

std::string write_plan(const FlipPlan& plan);
/// Rebuilds the plan against the clean labels `y`.
FlipPlan read_plan(const std::string& text, const Vector& y);

/// Training points, clean labels and the clean model shared by every attack
/// on one training set. Only training data ever enters an attack.
class AttackProblem {
public:
  static AttackProblem make(const Dataset& train, const Kernel& k, double C, double kkt_tol = 1e-6);

  const GramCache& cache() const noexcept { return cache_; }
  const Matrix& K() const noexcept { return *cache_.K; }
  const Vector& y() const noexcept { return y_; }
  double C() const noexcept { return C_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(y_.size()); }
  const SvmModel& clean() const noexcept { return clean_; }
  TrainConfig config() const;
  SvmModel retrain(const Vector& z, const Vector* warm_start = nullptr) const;

private:
  AttackProblem(GramCache cache, Vector y, double C, double kkt_tol, SvmModel clean);
  GramCache cache_;
  Vector y_;
  double C_;
  double kkt_tol_;
  SvmModel clean_;
};

// ---------------------------------------------------------------- alfa

struct AlfaConfig {
  std::size_t max_iters = 50;
  double q_tol = 1e-6;  ///< stop when |q_new - q_old|_inf falls below
};

/// Fixed clean-model losses and current slacks of the alternating scheme.
struct AlfaState {
  Vector q;
  Vector xi0, xi1;    ///< clean losses with the label kept / flipped
  Vector eps0, eps1;  ///< current classifier's slacks
};

/// Closed-form minimizer of sum (1-q)(eps0-xi0) + q (eps1-xi1) over
/// q in [0,1]^n with sum q <= L: q_i = 1 for the (up to L) most negative
/// coefficients c_i = (eps1-xi1) - (eps0-xi0), lowest index winning ties.
Vector solve_flip_lp(const Vector& eps0, const Vector& eps1, const Vector& xi0, const Vector& xi1, std::size_t L);

/// Value of the alternating objective 1/2|w|^2 + C sum[(1-q)(eps0-xi0) + q(eps1-xi1)].
double alfa_objective(const AlfaState& s, double half_norm, double C);

FlipPlan alfa(const AttackProblem& p, FlipBudget budget, const AlfaConfig& cfg = {});

// ---------------------------------------------------------------- alfa-cr

struct AlfaCrConfig {
  std::size_t max_iters = 0;  ///< N; 0 means 10 L
  double step = 0.1;          ///< t, applied to the gradient scaled by 1 / |grad|_inf
  double z_min = -1.0;
  double z_max = 1.0;
  std::uint64_t fallback_seed = 0;
};

FlipPlan alfa_cr(const AttackProblem& p, FlipBudget budget, const AlfaCrConfig& cfg = {});

// ---------------------------------------------------------------- alfa-tilt

struct TiltConfig {
  double beta1 = 0.1;
  double beta2 = 0.1;
  std::size_t trials = 10;
};

/// cos of the angle between the clean and tainted hyperplanes in feature space,
/// a'Q_zy a_clean / (sqrt(a'Q_zz a) sqrt(a_clean'Q_yy a_clean)).
double tilt_cosine(const Matrix& K, const Vector& y, const Vector& alpha_clean, const Vector& z,
                   const Vector& alpha_tainted);

FlipPlan alfa_tilt(const AttackProblem& p, FlipBudget budget, const TiltConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------- correlated clusters

struct ClusterConfig {
  std::size_t population = 10;  ///< M
  std::size_t iterations = 200;  ///< N
  std::optional<double> mutation_rate;  ///< defaults to L / n
};

FlipPlan correlated_clusters(const AttackProblem& p, FlipBudget budget, const ClusterConfig& cfg,
                             std::uint64_t seed);

// ---------------------------------------------------------------- baselines

/// Flips the L training points farthest from the clean boundary (|f_y| descending).
FlipPlan farfirst(const AttackProblem& p, FlipBudget budget);
/// Flips the L training points nearest the clean boundary (|f_y| ascending).
FlipPlan nearest(const AttackProblem& p, FlipBudget budget);
/// Best of `repetitions` uniform L-subsets by training-set 0-1 error.
FlipPlan random_flips(const AttackProblem& p, FlipBudget budget, std::size_t repetitions, std::uint64_t seed);

// ---------------------------------------------------------------- dispatch

enum class Strategy { Alfa, AlfaCr, AlfaTilt, CorrelatedClusters, FarFirst, Nearest, Random };

std::string strategy_name(Strategy s);
/// Accepts the names produced by strategy_name; throws std::invalid_argument.
Strategy parse_strategy(const std::string& name);
const std::vector<Strategy>& all_strategies();

struct AttackSettings {
  AlfaConfig alfa;
  AlfaCrConfig alfa_cr;
  TiltConfig tilt;
  ClusterConfig clusters;
  std::size_t random_repetitions = 10;
};

FlipPlan run_attack(Strategy s, const AttackProblem& p, FlipBudget budget, const AttackSettings& settings,
                    std::uint64_t seed);

}  // namespace labelflip
