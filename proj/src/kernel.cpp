#include "labelflip/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace labelflip {

Kernel Kernel::rbf(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("rbf kernel: gamma must be positive");
  return {KernelKind::Rbf, gamma};
}

std::string Kernel::name() const { return kind == KernelKind::Linear ? "linear" : "rbf"; }

KernelKind parse_kernel_kind(const std::string& s) {
  if (s == "linear") return KernelKind::Linear;
  if (s == "rbf") return KernelKind::Rbf;
  throw std::invalid_argument("unknown kernel '" + s + "' (expected linear|rbf)");
}

double kernel_eval(const Kernel& k, const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("kernel_eval: dimension mismatch");
  if (k.kind == KernelKind::Linear) return a.dot(b);
  return std::exp(-k.gamma * (a - b).squaredNorm());
}

Matrix gram(const Kernel& k, const Matrix& x, const Matrix& z) {
  if (x.cols() != z.cols()) throw std::invalid_argument("gram: dimension mismatch");
  if (k.kind == KernelKind::Linear) return x * z.transpose();

  Matrix out(x.rows(), z.rows());
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out(i, j) = std::exp(-k.gamma * (x.row(i) - z.row(j)).squaredNorm());
    }
  }
  return out;
}

Matrix label_annotate(const Matrix& K, const Vector& u, const Vector& v) {
  if (K.rows() != u.size() || K.cols() != v.size())
    throw std::invalid_argument("label_annotate: dimension mismatch");
  return u.asDiagonal() * K * v.asDiagonal();
}

}  // namespace labelflip
