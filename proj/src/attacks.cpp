#include "labelflip/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "labelflip/gradient.hpp"
#include "labelflip/rng.hpp"
#include "labelflip/text.hpp"

namespace labelflip {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_budget(const AttackProblem& p, FlipBudget budget) {
  if (budget.L > p.size())
    throw std::invalid_argument("flip budget L = " + std::to_string(budget.L) +
                                " exceeds the training set size " + std::to_string(p.size()));
}

/// Indices ordered by `key`, stable so the lowest index wins ties.
template <typename Less>
IndexList ranked(std::size_t n, Less less) {
  IndexList idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), less);
  return idx;
}

IndexList first(const IndexList& idx, std::size_t count) {
  return IndexList(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(count, idx.size())));
}

IndexList random_subset(Rng& rng, std::size_t n, std::size_t L) {
  return first(rng.permutation(n), L);
}

}  // namespace

FlipPlan make_plan(std::string strategy, const Vector& y, IndexList flipped) {
  std::sort(flipped.begin(), flipped.end());
  flipped.erase(std::unique(flipped.begin(), flipped.end()), flipped.end());
  FlipPlan plan;
  plan.strategy = std::move(strategy);
  plan.z = y;
  for (auto i : flipped) {
    if (i >= static_cast<std::size_t>(y.size())) throw std::out_of_range("make_plan: flip index out of range");
    plan.z[static_cast<Eigen::Index>(i)] = -y[static_cast<Eigen::Index>(i)];
  }
  plan.flipped = std::move(flipped);
  return plan;
}

void check_plan(const FlipPlan& plan, const Vector& y, FlipBudget budget) {
  if (plan.flipped.size() > budget.L) throw std::logic_error(plan.strategy + ": plan exceeds the flip budget");
  if (plan.z.size() != y.size()) throw std::logic_error(plan.strategy + ": plan has the wrong length");
  std::vector<bool> in(static_cast<std::size_t>(y.size()), false);
  for (auto i : plan.flipped) in.at(i) = true;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double expect = in[static_cast<std::size_t>(i)] ? -y[i] : y[i];
    if (plan.z[i] != expect) throw std::logic_error(plan.strategy + ": z disagrees with the flip set");
  }
}

std::string write_plan(const FlipPlan& plan) {
  std::ostringstream out;
  out << "labelflip-plan 1\n";
  out << "strategy " << plan.strategy << '\n';
  out << "n " << plan.z.size() << '\n';
  out << "score " << text::shortest(plan.score) << '\n';
  out << "flipped";
  for (auto i : plan.flipped) out << ' ' << i;
  out << '\n';
  for (const auto& w : plan.warnings) out << "warning " << w << '\n';
  return out.str();
}

FlipPlan read_plan(const std::string& text_in, const Vector& y) {
  std::istringstream in(text_in);
  std::string line;
  std::string strategy;
  std::optional<long long> n;
  double score = 0.0;
  IndexList flipped;
  std::vector<std::string> warnings;
  bool header = false;
  bool have_flips = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto tokens = text::split_ws(trimmed);
    const auto key = tokens.front();
    if (!header) {
      if (key != "labelflip-plan" || tokens.size() != 2 || tokens[1] != "1")
        throw ParseError(line_no, "plan: bad header");
      header = true;
    } else if (key == "strategy" && tokens.size() == 2) {
      strategy = std::string(tokens[1]);
    } else if (key == "n" && tokens.size() == 2) {
      n = text::to_integer(tokens[1]);
    } else if (key == "score" && tokens.size() == 2) {
      const auto v = text::to_double(tokens[1]);
      if (!v) throw ParseError(line_no, "plan: bad score");
      score = *v;
    } else if (key == "flipped") {
      have_flips = true;
      for (std::size_t t = 1; t < tokens.size(); ++t) {
        const auto v = text::to_integer(tokens[t]);
        if (!v || *v < 0) throw ParseError(line_no, "plan: bad index");
        flipped.push_back(static_cast<std::size_t>(*v));
      }
    } else if (key == "warning") {
      warnings.emplace_back(trimmed.substr(std::min(trimmed.size(), std::size_t{8})));
    } else {
      throw ParseError(line_no, "plan: unexpected line");
    }
  }
  if (!header || !have_flips || !n) throw ParseError(0, "plan: incomplete");
  if (*n != y.size()) throw ParseError(0, "plan: size does not match the labels");
  FlipPlan plan = make_plan(strategy, y, std::move(flipped));
  plan.score = score;
  plan.warnings = std::move(warnings);
  return plan;
}

// ---------------------------------------------------------------- problem

AttackProblem::AttackProblem(GramCache cache, Vector y, double C, double kkt_tol, SvmModel clean)
    : cache_(std::move(cache)), y_(std::move(y)), C_(C), kkt_tol_(kkt_tol), clean_(std::move(clean)) {}

AttackProblem AttackProblem::make(const Dataset& train_set, const Kernel& k, double C, double kkt_tol) {
  GramCache cache = GramCache::build(train_set.features(), k);
  TrainConfig cfg;
  cfg.C = C;
  cfg.kkt_tol = kkt_tol;
  SvmModel clean = train(cache, train_set.labels(), cfg);
  return AttackProblem(std::move(cache), train_set.labels(), C, kkt_tol, std::move(clean));
}

TrainConfig AttackProblem::config() const {
  TrainConfig cfg;
  cfg.C = C_;
  cfg.kkt_tol = kkt_tol_;
  return cfg;
}

SvmModel AttackProblem::retrain(const Vector& z, const Vector* warm_start) const {
  return train(cache_, z, config(), warm_start);
}

// ---------------------------------------------------------------- alfa

Vector solve_flip_lp(const Vector& eps0, const Vector& eps1, const Vector& xi0, const Vector& xi1, std::size_t L) {
  const Eigen::Index n = eps0.size();
  if (eps1.size() != n || xi0.size() != n || xi1.size() != n)
    throw std::invalid_argument("solve_flip_lp: length mismatch");
  const Vector c = (eps1 - xi1) - (eps0 - xi0);
  const auto order = ranked(static_cast<std::size_t>(n), [&](std::size_t a, std::size_t b) {
    return c[static_cast<Eigen::Index>(a)] < c[static_cast<Eigen::Index>(b)];
  });
  Vector q = Vector::Zero(n);
  for (std::size_t r = 0; r < std::min(L, order.size()); ++r) {
    const auto i = static_cast<Eigen::Index>(order[r]);
    if (c[i] >= 0.0) break;
    q[i] = 1.0;
  }
  return q;
}

double alfa_objective(const AlfaState& s, double half_norm, double C) {
  const Vector ones = Vector::Ones(s.q.size());
  const double loss = (ones - s.q).dot(s.eps0 - s.xi0) + s.q.dot(s.eps1 - s.xi1);
  return half_norm + C * loss;
}

FlipPlan alfa(const AttackProblem& p, FlipBudget budget, const AlfaConfig& cfg) {
  require_budget(p, budget);
  const Vector& y = p.y();
  const auto n = static_cast<Eigen::Index>(p.size());
  if (budget.L == 0) return make_plan("alfa", y, {});

  const Vector& f_clean = p.clean().training_decision();
  AlfaState st;
  st.xi0 = (1.0 - y.cwiseProduct(f_clean).array()).cwiseMax(0.0).matrix();
  st.xi1 = (1.0 + y.cwiseProduct(f_clean).array()).cwiseMax(0.0).matrix();
  st.eps0 = Vector::Zero(n);
  st.eps1 = Vector::Zero(n);
  st.q = Vector::Zero(n);

  // Every point appears twice, once per label; costs (1 - q_i) and q_i
  // select which copy's slack is paid.
  Matrix K2(2 * n, 2 * n);
  K2 << p.K(), p.K(), p.K(), p.K();
  Vector y2(2 * n);
  y2 << y, -y;

  FlipPlan plan;
  std::optional<Vector> warm;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const Vector q_new = solve_flip_lp(st.eps0, st.eps1, st.xi0, st.xi1, budget.L);
    const double change = (q_new - st.q).cwiseAbs().maxCoeff();
    st.q = q_new;
    if (it > 0 && change < cfg.q_tol) break;

    Vector upper(2 * n);
    upper << p.C() * (Vector::Ones(n) - st.q), p.C() * st.q;
    const DualSolution sol = solve_dual(K2, y2, upper, p.config().kkt_tol, 0, warm ? &*warm : nullptr);
    warm = sol.alpha;
    const Vector beta = y2.cwiseProduct(sol.alpha);
    Vector f = K2.topRows(n) * beta;
    f.array() += sol.b;
    st.eps0 = (1.0 - y.cwiseProduct(f).array()).cwiseMax(0.0).matrix();
    st.eps1 = (1.0 + y.cwiseProduct(f).array()).cwiseMax(0.0).matrix();
    plan.objective_trace.push_back(alfa_objective(st, 0.5 * beta.dot(K2 * beta), p.C()));
  }

  const auto order = ranked(p.size(), [&](std::size_t a, std::size_t b) {
    return st.q[static_cast<Eigen::Index>(a)] > st.q[static_cast<Eigen::Index>(b)];
  });
  auto trace = std::move(plan.objective_trace);
  plan = make_plan("alfa", y, first(order, budget.L));
  plan.objective_trace = std::move(trace);
  plan.score = plan.objective_trace.empty() ? 0.0 : plan.objective_trace.back();
  return plan;
}

// ---------------------------------------------------------------- alfa-cr

FlipPlan alfa_cr(const AttackProblem& p, FlipBudget budget, const AlfaCrConfig& cfg) {
  require_budget(p, budget);
  const Vector& y = p.y();
  const std::size_t L = budget.L;
  if (L == 0) return make_plan("alfa-cr", y, {});
  const std::size_t N = cfg.max_iters == 0 ? 10 * L : cfg.max_iters;
  if (N < L) throw std::invalid_argument("alfa-cr: max_iters must be at least L");
  if (!(cfg.z_min < cfg.z_max)) throw std::invalid_argument("alfa-cr: empty label domain");
  const std::size_t period = N / L;

  Vector z = y;
  Vector z_best = y;
  SvmModel model = p.clean();
  double v_best = objective_V(model, y, p.C());
  IndexList flips;
  std::size_t p_flips = 0;
  std::size_t k = 0;
  std::size_t steps = 0;
  std::vector<double> trace;

  while (p_flips < L) {
    ++k;
    try {
      Vector grad = total_gradient(model, p.K(), z, y, p.C());
      // Components pinned at a bound would be clipped away anyway; leaving
      // them in the norm shrinks the feasible part of the step.
      for (Eigen::Index i = 0; i < grad.size(); ++i)
        if ((z[i] >= cfg.z_max && grad[i] > 0.0) || (z[i] <= cfg.z_min && grad[i] < 0.0)) grad[i] = 0.0;
      const double scale = grad.cwiseAbs().maxCoeff();
      if (scale > 0.0 && std::isfinite(scale)) {
        const Vector candidate = (z + (cfg.step / scale) * grad).cwiseMax(cfg.z_min).cwiseMin(cfg.z_max);
        SvmModel next = p.retrain(candidate, &model.alpha());
        z = candidate;
        model = std::move(next);
        ++steps;
      }
    } catch (const DegenerateStructure&) {
      // No margin SVs: skip the step, keep z.
    } catch (const TrainError&) {
      // The step left a single-signed label vector; keep the previous z.
    }

    const double v = objective_V(model, y, p.C());
    if (v >= v_best) {
      v_best = v;
      z_best = z;
    }
    trace.push_back(v_best);

    if (k % period == 0) {
      ++p_flips;
      const Vector dist = (z_best - y).cwiseAbs();
      const auto order = ranked(p.size(), [&](std::size_t a, std::size_t b) {
        return dist[static_cast<Eigen::Index>(a)] > dist[static_cast<Eigen::Index>(b)];
      });
      flips = first(order, p_flips);
      z = make_plan("", y, flips).z;
      model = p.retrain(z, &model.alpha());
    }
  }

  if (steps == 0) {
    FlipPlan fb = random_flips(p, budget, 1, cfg.fallback_seed);
    fb.strategy = "alfa-cr";
    fb.objective_trace = std::move(trace);
    fb.warnings.push_back("no gradient step succeeded; fell back to a random plan");
    return fb;
  }
  FlipPlan plan = make_plan("alfa-cr", y, flips);
  plan.objective_trace = std::move(trace);
  plan.score = objective_V(model, y, p.C());
  return plan;
}

// ---------------------------------------------------------------- alfa-tilt

double tilt_cosine(const Matrix& K, const Vector& y, const Vector& alpha_clean, const Vector& z,
                   const Vector& alpha_tainted) {
  const Vector w = y.cwiseProduct(alpha_clean);
  const Vector wt = z.cwiseProduct(alpha_tainted);
  const Vector Kw = K * w;
  const double cross = wt.dot(Kw);
  const double denom = std::sqrt(std::max(0.0, wt.dot(K * wt))) * std::sqrt(std::max(0.0, w.dot(Kw)));
  if (denom <= 0.0) return 1.0;
  return cross / denom;
}

namespace {

// Divides by the largest entry; falls back to the largest magnitude when
// every entry is non-positive so the ordering is never inverted.
void normalize_by_max(Vector& v) {
  double m = v.maxCoeff();
  if (m <= 0.0) m = v.cwiseAbs().maxCoeff();
  if (m > 0.0) v /= m;
}

}  // namespace

FlipPlan alfa_tilt(const AttackProblem& p, FlipBudget budget, const TiltConfig& cfg, std::uint64_t seed) {
  require_budget(p, budget);
  if (cfg.trials < 1) throw std::invalid_argument("alfa-tilt: trials must be at least 1");
  const Vector& y = p.y();
  if (budget.L == 0) return make_plan("alfa-tilt", y, {});
  const auto n = static_cast<Eigen::Index>(p.size());
  const Vector& alpha = p.clean().alpha();

  Vector s = y.cwiseProduct(p.clean().training_decision());
  normalize_by_max(s);

  Rng rng(seed);
  FlipPlan best;
  double best_cos = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    Vector alpha_rnd(n);
    for (auto& a : alpha_rnd) a = rng.uniform01();
    const double b_rnd = rng.uniform01();
    Vector q = p.K() * y.cwiseProduct(alpha_rnd);
    q.array() += b_rnd;
    q = y.cwiseProduct(q);
    normalize_by_max(q);

    const Vector v = alpha / p.C() - cfg.beta1 * s - cfg.beta2 * q;
    const auto order = ranked(p.size(), [&](std::size_t a, std::size_t b) {
      return v[static_cast<Eigen::Index>(a)] < v[static_cast<Eigen::Index>(b)];
    });
    FlipPlan cand = make_plan("alfa-tilt", y, first(order, budget.L));
    double cosine = 1.0;
    try {
      const SvmModel tainted = p.retrain(cand.z, &alpha);
      cosine = tilt_cosine(p.K(), y, alpha, cand.z, tainted.alpha());
    } catch (const TrainError&) {
      continue;
    }
    trace.push_back(cosine);
    if (cosine < best_cos) {
      best_cos = cosine;
      best = std::move(cand);
    }
  }
  if (best.strategy.empty()) throw TrainError("alfa-tilt: no candidate could be trained");
  best.objective_trace = std::move(trace);
  best.score = best_cos;
  return best;
}

// ---------------------------------------------------------------- correlated clusters

namespace {

// Training-set 0-1 error of the model retrained on a candidate flip set,
// memoized on the flip pattern.
class ErrorOracle {
public:
  explicit ErrorOracle(const AttackProblem& p) : p_(p) {}

  double operator()(const std::vector<bool>& flips) {
    auto [it, inserted] = memo_.try_emplace(flips, 0.0);
    if (!inserted) return it->second;
    Vector z = p_.y();
    for (std::size_t i = 0; i < flips.size(); ++i)
      if (flips[i]) z[static_cast<Eigen::Index>(i)] = -z[static_cast<Eigen::Index>(i)];
    try {
      it->second = training_error(p_.retrain(z, &p_.clean().alpha()), p_.y());
    } catch (const TrainError&) {
      it->second = kNegInf;
    }
    return it->second;
  }

private:
  const AttackProblem& p_;
  std::map<std::vector<bool>, double> memo_;
};

struct Cluster {
  std::vector<bool> flips;
  double E = 0.0;
  std::vector<double> delta;
};

std::size_t count(const std::vector<bool>& v) { return static_cast<std::size_t>(std::count(v.begin(), v.end(), true)); }

}  // namespace

FlipPlan correlated_clusters(const AttackProblem& p, FlipBudget budget, const ClusterConfig& cfg,
                             std::uint64_t seed) {
  require_budget(p, budget);
  if (cfg.population < 1 || cfg.iterations < 1)
    throw std::invalid_argument("correlated-clusters: population and iterations must be at least 1");
  const Vector& y = p.y();
  const std::size_t n = p.size();
  const std::size_t L = budget.L;
  if (L == 0) return make_plan("correlated-clusters", y, {});
  const double rate = cfg.mutation_rate.value_or(static_cast<double>(L) / static_cast<double>(n));

  Rng rng(seed);
  ErrorOracle err(p);
  const double E_y = training_error(p.clean(), y);
  double E_best = kNegInf;
  std::vector<bool> z_best(n, false);

  auto sample_row = [&](const std::vector<bool>& flips) {
    std::vector<double> row(n, kNegInf);
    for (std::size_t j = 0; j < n; ++j) {
      if (rng.uniform01() < rate) {
        auto m = flips;
        m[j] = !m[j];
        row[j] = err(m);
      }
    }
    return row;
  };
  auto consider = [&](const Cluster& c) {
    if (c.E > E_best) {
      E_best = c.E;
      z_best = c.flips;
    }
  };

  std::vector<Cluster> pop;
  for (std::size_t i = 0; i < cfg.population; ++i) {
    Cluster c;
    c.flips.assign(n, false);
    c.flips[static_cast<std::size_t>(rng.below(n))] = true;
    c.E = err(c.flips) - E_y;
    consider(c);
    c.delta = sample_row(c.flips);
    pop.push_back(std::move(c));
  }

  std::vector<double> trace;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    // Best evaluated mutation across the population, row-major first wins.
    std::size_t bi = 0;
    std::size_t bj = 0;
    double bval = kNegInf;
    for (std::size_t i = 0; i < pop.size(); ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (pop[i].delta[j] > bval) {
          bval = pop[i].delta[j];
          bi = i;
          bj = j;
        }
    if (bval == kNegInf) break;
    pop[bi].delta[bj] = kNegInf;

    Cluster c;
    c.flips = pop[bi].flips;
    c.flips[bj] = !c.flips[bj];
    while (count(c.flips) > L) {
      // Reverse the flip whose removal keeps the error highest.
      std::size_t rev = n;
      double rev_err = kNegInf;
      for (std::size_t k = 0; k < n; ++k) {
        if (!c.flips[k]) continue;
        auto m = c.flips;
        m[k] = false;
        const double e = err(m);
        if (rev == n || e > rev_err) {
          rev = k;
          rev_err = e;
        }
      }
      c.flips[rev] = false;
    }
    c.E = err(c.flips) - E_y;
    consider(c);
    c.delta = sample_row(c.flips);
    pop.push_back(std::move(c));

    // Drop the worst cluster; the oldest goes first among equals.
    std::size_t worst = 0;
    for (std::size_t i = 1; i < pop.size(); ++i)
      if (pop[i].E < pop[worst].E) worst = i;
    pop.erase(pop.begin() + static_cast<std::ptrdiff_t>(worst));
    trace.push_back(E_best);
  }

  IndexList flips;
  for (std::size_t i = 0; i < n; ++i)
    if (z_best[i]) flips.push_back(i);
  FlipPlan plan = make_plan("correlated-clusters", y, std::move(flips));
  plan.objective_trace = std::move(trace);
  plan.score = E_best;
  return plan;
}

// ---------------------------------------------------------------- baselines

namespace {

FlipPlan by_distance(const AttackProblem& p, FlipBudget budget, bool far, const char* name) {
  require_budget(p, budget);
  const Vector dist = p.clean().training_decision().cwiseAbs();
  const auto order = ranked(p.size(), [&](std::size_t a, std::size_t b) {
    const double da = dist[static_cast<Eigen::Index>(a)];
    const double db = dist[static_cast<Eigen::Index>(b)];
    return far ? da > db : da < db;
  });
  return make_plan(name, p.y(), first(order, budget.L));
}

}  // namespace

FlipPlan farfirst(const AttackProblem& p, FlipBudget budget) { return by_distance(p, budget, true, "farfirst"); }

FlipPlan nearest(const AttackProblem& p, FlipBudget budget) { return by_distance(p, budget, false, "nearest"); }

FlipPlan random_flips(const AttackProblem& p, FlipBudget budget, std::size_t repetitions, std::uint64_t seed) {
  require_budget(p, budget);
  if (repetitions < 1) throw std::invalid_argument("random: repetitions must be at least 1");
  const Vector& y = p.y();
  if (budget.L == 0) {
    FlipPlan plan = make_plan("random", y, {});
    plan.score = training_error(p.clean(), y);
    return plan;
  }
  Rng rng(seed);
  FlipPlan best;
  double best_err = kNegInf;
  std::vector<double> trace;
  for (std::size_t r = 0; r < repetitions; ++r) {
    FlipPlan cand = make_plan("random", y, random_subset(rng, p.size(), budget.L));
    double e = kNegInf;
    try {
      e = training_error(p.retrain(cand.z, &p.clean().alpha()), y);
    } catch (const TrainError&) {
      cand.warnings.push_back("draw could not be trained");
    }
    trace.push_back(e);
    if (r == 0 || e > best_err) {
      best_err = e;
      best = std::move(cand);
    }
  }
  best.objective_trace = std::move(trace);
  best.score = best_err;
  return best;
}

// ---------------------------------------------------------------- dispatch

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Alfa: return "alfa";
    case Strategy::AlfaCr: return "alfa-cr";
    case Strategy::AlfaTilt: return "alfa-tilt";
    case Strategy::CorrelatedClusters: return "correlated-clusters";
    case Strategy::FarFirst: return "farfirst";
    case Strategy::Nearest: return "nearest";
    case Strategy::Random: return "random";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  for (auto s : all_strategies())
    if (strategy_name(s) == name) return s;
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all{Strategy::Alfa,     Strategy::AlfaCr,  Strategy::AlfaTilt,
                                         Strategy::CorrelatedClusters, Strategy::FarFirst,
                                         Strategy::Nearest,  Strategy::Random};
  return all;
}

FlipPlan run_attack(Strategy s, const AttackProblem& p, FlipBudget budget, const AttackSettings& settings,
                    std::uint64_t seed) {
  FlipPlan plan;
  switch (s) {
    case Strategy::Alfa: plan = alfa(p, budget, settings.alfa); break;
    case Strategy::AlfaCr: {
      AlfaCrConfig cfg = settings.alfa_cr;
      cfg.fallback_seed = seed;
      plan = alfa_cr(p, budget, cfg);
      break;
    }
    case Strategy::AlfaTilt: plan = alfa_tilt(p, budget, settings.tilt, seed); break;
    case Strategy::CorrelatedClusters: plan = correlated_clusters(p, budget, settings.clusters, seed); break;
    case Strategy::FarFirst: plan = farfirst(p, budget); break;
    case Strategy::Nearest: plan = nearest(p, budget); break;
    case Strategy::Random: plan = random_flips(p, budget, settings.random_repetitions, seed); break;
  }
  check_plan(plan, p.y(), budget);
  return plan;
}

}  // namespace labelflip
