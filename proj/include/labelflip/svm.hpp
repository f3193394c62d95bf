#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "labelflip/data.hpp"
#include "labelflip/kernel.hpp"

namespace labelflip {

/// Training failed: invalid problem or the solver ran out of iterations.
class TrainError : public std::runtime_error {
public:
  explicit TrainError(const std::string& what, double worst_violation = 0.0)
      : std::runtime_error(what), worst_violation_(worst_violation) {}
  double worst_violation() const noexcept { return worst_violation_; }

private:
  double worst_violation_;
};

struct TrainConfig {
  double C = 1.0;
  /// Optional multipliers c_i; sample i gets box [0, C * c_i]. c_i = 0 removes
  /// the sample from the dual while keeping it for evaluation.
  std::optional<Vector> per_sample_cost;
  double kkt_tol = 1e-6;
  /// Pair-update cap; 0 means max(10^7, 100 n).
  std::size_t max_passes = 0;
};

/// Training points, their kernel and the Gram matrix, built once and shared
/// by every retrain on the same points (label flips never change K).
struct GramCache {
  Kernel kernel;
  std::shared_ptr<const Matrix> points;
  std::shared_ptr<const Matrix> K;

  static GramCache build(const Matrix& points, const Kernel& kernel);
  Eigen::Index size() const { return K ? K->rows() : 0; }
};

/// KKT partition of the training samples.
enum class SvmSet { Reserve, Margin, Error };

/// Raw output of the box-constrained dual solver over a Gram matrix.
struct DualSolution {
  Vector alpha;
  double b = 0.0;
  Vector upper;              ///< per-sample box bound C * c_i
  double max_violation = 0;  ///< worst KKT residual at (alpha, b)
  std::size_t iterations = 0;
};

/// Solves min 1/2 a'Qa - 1'a s.t. z'a = 0, 0 <= a <= upper, Q = zz' o K, by
/// SMO over maximal-violating pairs (second-order choice of the partner).
/// Labels may be any reals; a warm start is clipped to the box and repaired
/// onto z'a = 0 before iterating.
DualSolution solve_dual(const Matrix& K, const Vector& z, const Vector& upper, double kkt_tol,
                        std::size_t max_passes, const Vector* warm_start = nullptr);

class SvmModel {
public:
  SvmModel(GramCache cache, Vector labels, double C, double kkt_tol, DualSolution solution);

  const Kernel& kernel() const noexcept { return cache_.kernel; }
  const GramCache& cache() const noexcept { return cache_; }
  const Matrix& support_points() const noexcept { return *cache_.points; }
  const Vector& alpha() const noexcept { return solution_.alpha; }
  double b() const noexcept { return solution_.b; }
  const Vector& labels_used() const noexcept { return labels_; }
  const Vector& upper() const noexcept { return solution_.upper; }
  double C() const noexcept { return C_; }
  double kkt_tol() const noexcept { return kkt_tol_; }
  double max_violation() const noexcept { return solution_.max_violation; }
  std::size_t iterations() const noexcept { return solution_.iterations; }
  Eigen::Index size() const noexcept { return labels_.size(); }

  const std::vector<SvmSet>& sets() const noexcept { return sets_; }
  IndexList indices_in(SvmSet set) const;

  /// f(x_i) on the training points, via the cached Gram matrix.
  const Vector& training_decision() const noexcept { return train_f_; }

  /// g_i = z_i f(x_i) - 1.
  Vector kkt_margins() const;

private:
  GramCache cache_;
  Vector labels_;
  double C_;
  double kkt_tol_;
  DualSolution solution_;
  Vector train_f_;
  std::vector<SvmSet> sets_;
};

SvmModel train(const GramCache& cache, const Vector& z, const TrainConfig& cfg,
               const Vector* warm_start = nullptr);
SvmModel train(const Dataset& d, const Vector& z, const Kernel& k, const TrainConfig& cfg);

/// f(x) = sum_i alpha_i z_i k(x, x_i) + b for each row of `x`.
Vector decision_function(const SvmModel& m, const Matrix& x);
/// sign(f) with sign(0) = +1.
Vector predict(const SvmModel& m, const Matrix& x);

Vector hinge_losses(const Vector& f, const Vector& y);
Vector hinge_losses(const SvmModel& m, const Dataset& d, const Vector& y);

double zero_one_error(const Vector& f, const Vector& y);
double zero_one_error(const SvmModel& m, const Dataset& d, const Vector& y);
/// Model evaluated on its own training points against labels `y`.
double training_error(const SvmModel& m, const Vector& y);

/// 1/2 a'Q_zz a, the squared RKHS norm term of the attacker's objective.
double regularizer(const SvmModel& m);
/// V(z, y) = 1/2 a'Q_zz a + C sum_i max(0, 1 - y_i f_z(x_i)), with the model
/// trained on z and evaluated on its training points against y.
double objective_V(const SvmModel& m, const Vector& y_eval, double C);
double objective_V(const SvmModel& m, const Dataset& d, const Vector& y_eval, double C);

/// Worst residual of the R/S/E conditions and of |z'a|.
double kkt_violation(const SvmModel& m);

/// Versioned plain-text model format with exact decimal round trip.
std::string write_model(const SvmModel& m);
SvmModel read_model(const std::string& text);

}  // namespace labelflip
