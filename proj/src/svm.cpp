#include "labelflip/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "labelflip/text.hpp"

namespace labelflip {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinCurvature = 1e-12;

bool active(const Vector& z, const Vector& upper, Eigen::Index i) {
  return upper[i] > 0.0 && z[i] != 0.0;
}

// Samples with an active box split into two groups by which side of b their
// KKT condition bounds: LOW needs b >= r_i, HIGH needs b <= r_i, where
// r_i = -G_i / z_i and G = Q a - 1.
bool in_low(double z, double a, double u) { return (z > 0 && a < u) || (z < 0 && a > 0); }
bool in_high(double z, double a, double u) { return (z > 0 && a > 0) || (z < 0 && a < u); }

// Clips to the box and moves the result onto z'a = 0 by shrinking the terms
// whose sign matches the residual; a = 0 is always reachable, so this ends.
Vector repair_start(const Vector& warm, const Vector& z, const Vector& upper) {
  Vector a = warm.cwiseMax(0.0).cwiseMin(upper);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (upper[i] <= 0.0) a[i] = 0.0;
  double residual = z.dot(a);
  for (Eigen::Index i = 0; i < a.size() && residual != 0.0; ++i) {
    const double term = z[i] * a[i];
    if (term == 0.0 || (term > 0) != (residual > 0)) continue;
    const double take = std::min(std::abs(term), std::abs(residual));
    a[i] -= take / std::abs(z[i]);
    if (a[i] < 0.0) a[i] = 0.0;
    residual = z.dot(a);
  }
  if (std::abs(residual) > 1e-12) {
    // Rounding left a sliver; fall back to the trivially feasible start.
    a.setZero();
  }
  return a;
}

struct Extremes {
  double low_max = -kInf;
  Eigen::Index low_arg = -1;
  double high_min = kInf;
};

Extremes scan(const Vector& G, const Vector& z, const Vector& a, const Vector& upper) {
  Extremes e;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (!active(z, upper, k)) continue;
    const double r = -G[k] / z[k];
    if (in_low(z[k], a[k], upper[k]) && r > e.low_max) {
      e.low_max = r;
      e.low_arg = k;
    }
    if (in_high(z[k], a[k], upper[k]) && r < e.high_min) e.high_min = r;
  }
  return e;
}

double bias_from_kkt(const Vector& G, const Vector& z, const Vector& a, const Vector& upper,
                     const Extremes& e) {
  double sum = 0.0;
  std::size_t free = 0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (!active(z, upper, k)) continue;
    if (a[k] > 0.0 && a[k] < upper[k]) {
      sum += -G[k] / z[k];
      ++free;
    }
  }
  if (free > 0) return sum / static_cast<double>(free);
  if (std::isfinite(e.low_max) && std::isfinite(e.high_min)) return 0.5 * (e.low_max + e.high_min);
  if (std::isfinite(e.low_max)) return e.low_max;
  if (std::isfinite(e.high_min)) return e.high_min;
  return 0.0;
}

double violation_at(const Vector& G, const Vector& z, const Vector& a, const Vector& upper, double b) {
  double worst = std::abs(z.dot(a));
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (upper[k] <= 0.0) continue;
    const double g = G[k] + b * z[k];
    double v = 0.0;
    if (a[k] <= 0.0)
      v = std::max(0.0, -g);
    else if (a[k] >= upper[k])
      v = std::max(0.0, g);
    else
      v = std::abs(g);
    worst = std::max(worst, v);
  }
  return worst;
}

Vector full_gradient(const Matrix& K, const Vector& z, const Vector& a) {
  const Vector za = z.cwiseProduct(a);
  return z.cwiseProduct(K * za) - Vector::Ones(z.size());
}

}  // namespace

DualSolution solve_dual(const Matrix& K, const Vector& z, const Vector& upper, double kkt_tol,
                        std::size_t max_passes, const Vector* warm_start) {
  const Eigen::Index n = z.size();
  if (K.rows() != n || K.cols() != n || upper.size() != n)
    throw std::invalid_argument("solve_dual: dimension mismatch");
  if (!(kkt_tol > 0.0)) throw std::invalid_argument("solve_dual: kkt_tol must be positive");
  if ((upper.array() < 0.0).any()) throw std::invalid_argument("solve_dual: negative box bound");
  if (n == 0 || upper.maxCoeff() <= 0.0) throw TrainError("zero box constraints");

  bool pos = false;
  bool neg = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (upper[i] <= 0.0) continue;
    pos = pos || z[i] > 0.0;
    neg = neg || z[i] < 0.0;
  }
  if (!pos || !neg) throw TrainError("training labels contain a single class");

  Vector a = warm_start ? repair_start(*warm_start, z, upper) : Vector::Zero(n);
  // z_i = 0 decouples sample i: its Q row vanishes and G_i = -1, so a_i = upper_i.
  for (Eigen::Index i = 0; i < n; ++i)
    if (upper[i] > 0.0 && z[i] == 0.0) a[i] = upper[i];

  if (max_passes == 0) max_passes = std::max<std::size_t>(10'000'000, 100 * static_cast<std::size_t>(n));
  const double zscale = std::max(1.0, z.cwiseAbs().maxCoeff());
  const double eps = 0.5 * kkt_tol / zscale;

  Vector G = full_gradient(K, z, a);
  std::size_t iter = 0;
  for (int refresh = 0; refresh < 4; ++refresh) {
    while (iter < max_passes) {
      const Extremes e = scan(G, z, a, upper);
      if (e.low_arg < 0 || e.low_max - e.high_min < eps) break;
      const Eigen::Index i = e.low_arg;
      const double ri = e.low_max;

      Eigen::Index j = -1;
      double best = -kInf;
      double eta_ij = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (!active(z, upper, k) || !in_high(z[k], a[k], upper[k])) continue;
        const double diff = ri + G[k] / z[k];  // r_i - r_k
        if (diff <= 0.0) continue;
        double eta = K(i, i) + K(k, k) - 2.0 * K(i, k);
        if (eta <= 0.0) eta = kMinCurvature;
        const double score = diff * diff / eta;
        if (score > best) {
          best = score;
          j = k;
          eta_ij = eta;
        }
      }
      if (j < 0) break;
      ++iter;

      // Move along d_i = 1/z_i, d_j = -1/z_j, which keeps z'a fixed.
      const double rj = -G[j] / z[j];
      double t = (ri - rj) / eta_ij;
      const double cap_i = z[i] > 0 ? z[i] * (upper[i] - a[i]) : -z[i] * a[i];
      const double cap_j = z[j] > 0 ? z[j] * a[j] : -z[j] * (upper[j] - a[j]);
      bool hit_i = false;
      bool hit_j = false;
      if (t >= cap_i) {
        t = cap_i;
        hit_i = true;
      }
      if (t >= cap_j) {
        t = cap_j;
        hit_j = true;
        hit_i = hit_i && cap_i == cap_j;
      }
      const double old_i = a[i];
      const double old_j = a[j];
      a[i] = hit_i ? (z[i] > 0 ? upper[i] : 0.0) : std::clamp(a[i] + t / z[i], 0.0, upper[i]);
      a[j] = hit_j ? (z[j] > 0 ? 0.0 : upper[j]) : std::clamp(a[j] - t / z[j], 0.0, upper[j]);
      const double di = z[i] * (a[i] - old_i);
      const double dj = z[j] * (a[j] - old_j);
      G += z.cwiseProduct(K.col(i) * di + K.col(j) * dj);
    }
    // Refresh against accumulated drift and re-check before accepting.
    G = full_gradient(K, z, a);
    const Extremes e = scan(G, z, a, upper);
    if (e.low_arg < 0 || e.low_max - e.high_min < eps || iter >= max_passes) break;
  }

  const Extremes e = scan(G, z, a, upper);
  DualSolution out;
  out.b = bias_from_kkt(G, z, a, upper, e);
  out.max_violation = violation_at(G, z, a, upper, out.b);
  out.iterations = iter;
  out.upper = upper;
  out.alpha = std::move(a);
  if (out.max_violation >= kkt_tol)
    throw TrainError("solver stopped after " + std::to_string(iter) +
                         " pair updates with KKT violation " + text::shortest(out.max_violation),
                     out.max_violation);
  return out;
}

GramCache GramCache::build(const Matrix& points, const Kernel& kernel) {
  auto pts = std::make_shared<const Matrix>(points);
  auto K = std::make_shared<const Matrix>(gram(kernel, *pts));
  return GramCache{kernel, std::move(pts), std::move(K)};
}

SvmModel::SvmModel(GramCache cache, Vector labels, double C, double kkt_tol, DualSolution solution)
    : cache_(std::move(cache)), labels_(std::move(labels)), C_(C), kkt_tol_(kkt_tol),
      solution_(std::move(solution)) {
  const Eigen::Index n = labels_.size();
  if (cache_.size() != n || solution_.alpha.size() != n || solution_.upper.size() != n)
    throw std::invalid_argument("SvmModel: dimension mismatch");
  train_f_ = (*cache_.K) * labels_.cwiseProduct(solution_.alpha);
  train_f_.array() += solution_.b;

  const Vector g = kkt_margins();
  sets_.resize(static_cast<std::size_t>(n));
  double worst = std::abs(labels_.dot(solution_.alpha));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = solution_.alpha[i];
    const double u = solution_.upper[i];
    auto& s = sets_[static_cast<std::size_t>(i)];
    if (u <= 0.0 || a <= kkt_tol_)
      s = SvmSet::Reserve;
    else if (a >= u - kkt_tol_)
      s = SvmSet::Error;
    else if (std::abs(g[i]) <= 10.0 * kkt_tol_)
      s = SvmSet::Margin;
    else
      s = g[i] > 0 ? SvmSet::Reserve : SvmSet::Error;

    if (u <= 0.0) continue;
    if (a <= 0.0)
      worst = std::max(worst, std::max(0.0, -g[i]));
    else if (a >= u)
      worst = std::max(worst, std::max(0.0, g[i]));
    else
      worst = std::max(worst, std::abs(g[i]));
  }
  solution_.max_violation = worst;
}

IndexList SvmModel::indices_in(SvmSet set) const {
  IndexList out;
  for (std::size_t i = 0; i < sets_.size(); ++i)
    if (sets_[i] == set) out.push_back(i);
  return out;
}

Vector SvmModel::kkt_margins() const {
  return (labels_.cwiseProduct(train_f_)).array() - 1.0;
}

SvmModel train(const GramCache& cache, const Vector& z, const TrainConfig& cfg, const Vector* warm_start) {
  const Eigen::Index n = cache.size();
  if (z.size() != n) throw std::invalid_argument("train: label count does not match the point set");
  if (n < 2) throw TrainError("need at least two training samples");
  if (!(cfg.C > 0.0)) throw std::invalid_argument("train: C must be positive");
  Vector upper = Vector::Constant(n, cfg.C);
  if (cfg.per_sample_cost) {
    if (cfg.per_sample_cost->size() != n) throw std::invalid_argument("train: cost vector size mismatch");
    if ((cfg.per_sample_cost->array() < 0.0).any()) throw std::invalid_argument("train: negative sample cost");
    upper = cfg.C * *cfg.per_sample_cost;
  }
  DualSolution sol = solve_dual(*cache.K, z, upper, cfg.kkt_tol, cfg.max_passes, warm_start);
  return SvmModel(cache, z, cfg.C, cfg.kkt_tol, std::move(sol));
}

SvmModel train(const Dataset& d, const Vector& z, const Kernel& k, const TrainConfig& cfg) {
  return train(GramCache::build(d.features(), k), z, cfg);
}

Vector decision_function(const SvmModel& m, const Matrix& x) {
  const Matrix& pts = m.support_points();
  if (x.cols() != pts.cols()) throw std::invalid_argument("decision_function: dimension mismatch");
  IndexList sv;
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (m.alpha()[i] > 0.0) sv.push_back(static_cast<std::size_t>(i));
  Vector f = Vector::Constant(x.rows(), m.b());
  if (sv.empty()) return f;
  Matrix sv_pts(static_cast<Eigen::Index>(sv.size()), pts.cols());
  Vector coef(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t r = 0; r < sv.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(sv[r]);
    sv_pts.row(static_cast<Eigen::Index>(r)) = pts.row(i);
    coef[static_cast<Eigen::Index>(r)] = m.alpha()[i] * m.labels_used()[i];
  }
  f += gram(m.kernel(), x, sv_pts) * coef;
  return f;
}

Vector predict(const SvmModel& m, const Matrix& x) {
  const Vector f = decision_function(m, x);
  return f.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

Vector hinge_losses(const Vector& f, const Vector& y) {
  if (f.size() != y.size()) throw std::invalid_argument("hinge_losses: dimension mismatch");
  return (1.0 - y.cwiseProduct(f).array()).cwiseMax(0.0).matrix();
}

Vector hinge_losses(const SvmModel& m, const Dataset& d, const Vector& y) {
  return hinge_losses(decision_function(m, d.features()), y);
}

double zero_one_error(const Vector& f, const Vector& y) {
  if (f.size() != y.size()) throw std::invalid_argument("zero_one_error: dimension mismatch");
  if (y.size() == 0) throw std::invalid_argument("zero_one_error: empty dataset");
  Eigen::Index wrong = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pred = f[i] >= 0.0 ? 1.0 : -1.0;
    if (pred != (y[i] >= 0.0 ? 1.0 : -1.0)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(y.size());
}

double zero_one_error(const SvmModel& m, const Dataset& d, const Vector& y) {
  return zero_one_error(decision_function(m, d.features()), y);
}

double training_error(const SvmModel& m, const Vector& y) {
  return zero_one_error(m.training_decision(), y);
}

double regularizer(const SvmModel& m) {
  const Vector za = m.labels_used().cwiseProduct(m.alpha());
  return 0.5 * za.dot((*m.cache().K) * za);
}

double objective_V(const SvmModel& m, const Vector& y_eval, double C) {
  return regularizer(m) + C * hinge_losses(m.training_decision(), y_eval).sum();
}

double objective_V(const SvmModel& m, const Dataset& d, const Vector& y_eval, double C) {
  if (d.size() != m.size() || d.dim() != m.support_points().cols())
    throw std::invalid_argument("objective_V: dataset does not match the training points");
  return objective_V(m, y_eval, C);
}

double kkt_violation(const SvmModel& m) { return m.max_violation(); }

namespace {

void write_vector(std::ostringstream& out, const char* key, const Vector& v) {
  out << key;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << text::shortest(v[i]);
  out << '\n';
}

constexpr const char* kModelMagic = "labelflip-model";
constexpr int kModelVersion = 1;

}  // namespace

std::string write_model(const SvmModel& m) {
  std::ostringstream out;
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "kernel " << m.kernel().name() << '\n';
  out << "gamma " << text::shortest(m.kernel().gamma) << '\n';
  out << "C " << text::shortest(m.C()) << '\n';
  out << "kkt_tol " << text::shortest(m.kkt_tol()) << '\n';
  out << "n " << m.size() << '\n';
  out << "d " << m.support_points().cols() << '\n';
  out << "b " << text::shortest(m.b()) << '\n';
  write_vector(out, "alpha", m.alpha());
  write_vector(out, "labels", m.labels_used());
  write_vector(out, "upper", m.upper());
  for (Eigen::Index i = 0; i < m.size(); ++i) write_vector(out, "x", m.support_points().row(i).transpose());
  return out.str();
}

SvmModel read_model(const std::string& text_in) {
  std::istringstream in(text_in);
  std::string line;
  std::size_t line_no = 0;
  auto next = [&](const std::string& key) {
    if (!std::getline(in, line)) throw ParseError(line_no, "model: missing '" + key + "'");
    ++line_no;
    auto tokens = text::split_ws(text::trim(line));
    if (tokens.empty() || tokens.front() != key)
      throw ParseError(line_no, "model: expected '" + key + "'");
    tokens.erase(tokens.begin());
    return tokens;
  };
  auto number = [&](std::string_view tok) {
    const auto v = text::to_double(tok);
    if (!v) throw ParseError(line_no, "model: bad number '" + std::string(tok) + "'");
    return *v;
  };
  auto vec = [&](const std::string& key, Eigen::Index n) {
    const auto tokens = next(key);
    if (static_cast<Eigen::Index>(tokens.size()) != n) throw ParseError(line_no, "model: wrong length for " + key);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = number(tokens[static_cast<std::size_t>(i)]);
    return v;
  };

  const auto header = next(kModelMagic);
  if (header.size() != 1 || header.front() != std::to_string(kModelVersion))
    throw ParseError(line_no, "model: unsupported version");
  const auto kind = parse_kernel_kind(std::string(next("kernel").at(0)));
  const double gamma = number(next("gamma").at(0));
  const double C = number(next("C").at(0));
  const double tol = number(next("kkt_tol").at(0));
  const auto n = static_cast<Eigen::Index>(number(next("n").at(0)));
  const auto d = static_cast<Eigen::Index>(number(next("d").at(0)));
  const double b = number(next("b").at(0));
  DualSolution sol;
  sol.b = b;
  sol.alpha = vec("alpha", n);
  Vector labels = vec("labels", n);
  sol.upper = vec("upper", n);
  Matrix pts(n, d);
  for (Eigen::Index i = 0; i < n; ++i) pts.row(i) = vec("x", d).transpose();
  const Kernel k = kind == KernelKind::Rbf ? Kernel::rbf(gamma) : Kernel::linear();
  return SvmModel(GramCache::build(pts, k), std::move(labels), C, tol, std::move(sol));
}

}  // namespace labelflip
