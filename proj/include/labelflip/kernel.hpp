#pragma once

#include <string>

#include "labelflip/data.hpp"

namespace labelflip {

enum class KernelKind { Linear, Rbf };

struct Kernel {
  KernelKind kind = KernelKind::Linear;
  double gamma = 0.0;  ///< Rbf width, exp(-gamma |a - b|^2); ignored for Linear.

  static Kernel linear() { return {KernelKind::Linear, 0.0}; }
  /// Throws std::invalid_argument unless gamma > 0.
  static Kernel rbf(double gamma);

  std::string name() const;
  friend bool operator==(const Kernel&, const Kernel&) = default;
};

/// "linear" or "rbf"; throws std::invalid_argument otherwise.
KernelKind parse_kernel_kind(const std::string& s);

double kernel_eval(const Kernel& k, const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// K[i][j] = k(X.row(i), Z.row(j)).
Matrix gram(const Kernel& k, const Matrix& x, const Matrix& z);
inline Matrix gram(const Kernel& k, const Matrix& x) { return gram(k, x, x); }

/// Q[i][j] = u_i v_j K[i][j].
Matrix label_annotate(const Matrix& K, const Vector& u, const Vector& v);

}  // namespace labelflip
