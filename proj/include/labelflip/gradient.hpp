#pragma once

#include <stdexcept>

#include "labelflip/svm.hpp"

namespace labelflip {

/// The margin-SV structure cannot support a derivative (empty S, or a
/// singular bordered system even after the ridge).
class DegenerateStructure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Derivatives of the trained dual solution with respect to the training
/// labels z, valid while the R/S/E partition does not change.
struct GradientWorkspace {
  IndexList margin;       ///< indices of S, ascending
  Eigen::LDLT<Matrix> Qss;  ///< factorization of Q_ss + ridge I
  double ridge = 0.0;
  Vector upsilon;         ///< Q_ss^-1 z_s
  double zeta = 0.0;      ///< z_s' Q_ss^-1 z_s
  Vector S_diag;          ///< f_z(x_i)
  Matrix dalpha_dz;       ///< n x n, rows outside S are zero
  Vector db_dz;           ///< n
};

struct ObjectiveGradient {
  Vector grad;   ///< gradient of sum_i max(0, 1 - y_i f_z(x_i)), unscaled by C
  Vector delta;  ///< 1 where y_i f_z(x_i) < 1
  Vector v;      ///< y_i f_z(x_i) - 1
};

GradientWorkspace solution_sensitivity(const SvmModel& m, const Matrix& K, const Vector& z);

ObjectiveGradient loss_term_gradient(const SvmModel& m, const Matrix& K, const Vector& z,
                                     const Vector& y, const GradientWorkspace& ws);
ObjectiveGradient loss_term_gradient(const SvmModel& m, const Matrix& K, const Vector& z, const Vector& y);

/// Gradient of 1/2 a'Q_zz a: a o [K (a o z)] + (da/dz)' Q a.
Vector regularizer_gradient(const SvmModel& m, const Matrix& K, const Vector& z, const GradientWorkspace& ws);
Vector regularizer_gradient(const SvmModel& m, const Matrix& K, const Vector& z);

/// Gradient of V(z, y) = regularizer + C * hinge sum.
Vector total_gradient(const SvmModel& m, const Matrix& K, const Vector& z, const Vector& y, double C,
                      const GradientWorkspace& ws);
Vector total_gradient(const SvmModel& m, const Matrix& K, const Vector& z, const Vector& y, double C);

}  // namespace labelflip
