#include "labelflip/gradient.hpp"

#include <cmath>

namespace labelflip {

namespace {

void check_dims(const SvmModel& m, const Matrix& K, const Vector& z) {
  const Eigen::Index n = m.size();
  if (K.rows() != n || K.cols() != n || z.size() != n)
    throw std::invalid_argument("gradient: dimension mismatch");
}

Vector decision(const SvmModel& m, const Matrix& K, const Vector& z) {
  Vector f = K * z.cwiseProduct(m.alpha());
  f.array() += m.b();
  return f;
}

}  // namespace

GradientWorkspace solution_sensitivity(const SvmModel& m, const Matrix& K, const Vector& z) {
  check_dims(m, K, z);
  const Eigen::Index n = m.size();
  const Vector& alpha = m.alpha();

  GradientWorkspace ws;
  ws.margin = m.indices_in(SvmSet::Margin);
  if (ws.margin.empty()) throw DegenerateStructure("degenerate structure: no margin support vectors");
  const auto ns = static_cast<Eigen::Index>(ws.margin.size());

  Vector zs(ns);
  Matrix Qss(ns, ns);
  for (Eigen::Index a = 0; a < ns; ++a) {
    const auto ia = static_cast<Eigen::Index>(ws.margin[static_cast<std::size_t>(a)]);
    zs[a] = z[ia];
    for (Eigen::Index c = 0; c < ns; ++c) {
      const auto ic = static_cast<Eigen::Index>(ws.margin[static_cast<std::size_t>(c)]);
      Qss(a, c) = z[ia] * z[ic] * K(ia, ic);
    }
  }
  ws.ridge = 1e-8 * Qss.trace() / static_cast<double>(ns);
  Qss.diagonal().array() += ws.ridge;
  ws.Qss.compute(Qss);
  if (ws.Qss.info() != Eigen::Success || !ws.Qss.isPositive())
    throw DegenerateStructure("degenerate structure: Q_ss is not positive definite");

  ws.upsilon = ws.Qss.solve(zs);
  ws.zeta = zs.dot(ws.upsilon);
  if (!std::isfinite(ws.zeta) || ws.zeta <= 0.0)
    throw DegenerateStructure("degenerate structure: singular bordered system");

  ws.S_diag = decision(m, K, z);

  // M = K_sn o (z_s a') + S_sn
  Matrix M(ns, n);
  for (Eigen::Index a = 0; a < ns; ++a) {
    const auto ia = static_cast<Eigen::Index>(ws.margin[static_cast<std::size_t>(a)]);
    M.row(a) = (K.row(ia).array() * alpha.transpose().array() * z[ia]).matrix();
    M(a, ia) += ws.S_diag[ia];
  }

  const Eigen::RowVectorXd uM = ws.upsilon.transpose() * M;
  const Matrix dalpha_s =
      ws.upsilon * ((uM - alpha.transpose()) / ws.zeta) - ws.Qss.solve(M);
  ws.db_dz = ((alpha.transpose() - uM) / ws.zeta).transpose();

  ws.dalpha_dz = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < ns; ++a)
    ws.dalpha_dz.row(static_cast<Eigen::Index>(ws.margin[static_cast<std::size_t>(a)])) = dalpha_s.row(a);
  return ws;
}

ObjectiveGradient loss_term_gradient(const SvmModel& m, const Matrix& K, const Vector& z,
                                     const Vector& y, const GradientWorkspace& ws) {
  check_dims(m, K, z);
  if (y.size() != m.size()) throw std::invalid_argument("gradient: label dimension mismatch");
  const Vector& alpha = m.alpha();

  ObjectiveGradient out;
  const Vector f = decision(m, K, z);
  out.v = y.cwiseProduct(f).array() - 1.0;
  out.delta = out.v.unaryExpr([](double v) { return v < 0.0 ? 1.0 : 0.0; });

  // -sum_i delta_i dv_i/dz with
  //   dv/dz = (y z_s' o K_ns) da_s/dz + K o (y a') + y db/dz,
  // contracted against w = delta o y without forming the n x n Jacobian.
  const Vector w = out.delta.cwiseProduct(y);
  const Vector Kw = K * w;
  Vector zKw = Vector::Zero(m.size());  // z_s o (K_sn w), scattered to S rows
  for (auto i : ws.margin) {
    const auto ii = static_cast<Eigen::Index>(i);
    zKw[ii] = z[ii] * Kw[ii];
  }
  out.grad = -(ws.dalpha_dz.transpose() * zKw + alpha.cwiseProduct(Kw) + w.sum() * ws.db_dz);
  return out;
}

ObjectiveGradient loss_term_gradient(const SvmModel& m, const Matrix& K, const Vector& z, const Vector& y) {
  return loss_term_gradient(m, K, z, y, solution_sensitivity(m, K, z));
}

Vector regularizer_gradient(const SvmModel& m, const Matrix& K, const Vector& z, const GradientWorkspace& ws) {
  check_dims(m, K, z);
  const Vector& alpha = m.alpha();
  const Vector Kaz = K * alpha.cwiseProduct(z);
  const Vector Qa = z.cwiseProduct(Kaz);
  return alpha.cwiseProduct(Kaz) + ws.dalpha_dz.transpose() * Qa;
}

Vector regularizer_gradient(const SvmModel& m, const Matrix& K, const Vector& z) {
  return regularizer_gradient(m, K, z, solution_sensitivity(m, K, z));
}

Vector total_gradient(const SvmModel& m, const Matrix& K, const Vector& z, const Vector& y, double C,
                      const GradientWorkspace& ws) {
  return regularizer_gradient(m, K, z, ws) + C * loss_term_gradient(m, K, z, y, ws).grad;
}

Vector total_gradient(const SvmModel& m, const Matrix& K, const Vector& z, const Vector& y, double C) {
  return total_gradient(m, K, z, y, C, solution_sensitivity(m, K, z));
}

}  // namespace labelflip
