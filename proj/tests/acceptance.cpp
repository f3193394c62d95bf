// Acceptance run: one PASS / FAIL (or WARN for the soft check) line per
// criterion. Usage: acceptance [criterion numbers...]; no arguments runs all.
// Exit status is 1 when any hard criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "labelflip/attacks.hpp"
#include "labelflip/gradient.hpp"
#include "labelflip/harness.hpp"
#include "labelflip/svm.hpp"
#include "oracles.hpp"

using namespace labelflip;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
  bool soft = false;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1

Verdict gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(8081);
  int problems = 0, degenerate = 0, unstable = 0, stable = 0, bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const bool rbf = trial % 2 == 1;
    const Dataset d = oracle::random_problem(20, rbf ? 2 : 3, rng, 0.8);
    const Kernel k = rbf ? Kernel::rbf(rng.uniform(0.3, 1.5)) : Kernel::linear();
    const GramCache cache = GramCache::build(d.features(), k);
    const Vector z = oracle::relaxed_labels(d.labels(), rng);
    const Vector& y = d.labels();
    TrainConfig cfg;
    cfg.kkt_tol = 1e-11;
    cfg.C = std::exp(rng.uniform(-0.5, 1.5));
    ++problems;
    const SvmModel m = train(cache, z, cfg);
    Vector g;
    try {
      g = total_gradient(m, *cache.K, z, y, cfg.C);
    } catch (const DegenerateStructure&) {
      ++degenerate;
      continue;
    }
    const auto fd = oracle::fd_of_retrained(cache, z, y, cfg, [&](const SvmModel& mm) { return objective_V(mm, y, cfg.C); });
    if (!fd.stable) {
      ++unstable;
      continue;
    }
    ++stable;
    const double rel = oracle::relative_error(g, fd.gradient);
    worst = std::max(worst, rel);
    if (!(rel < 1e-3)) ++bad;
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = problems >= 50 && stable >= 30 && bad == 0 && secs < 60.0;
  v.detail = fmt("%d problems, %d stable, %d unstable, %d degenerate, %d over 1e-3, worst rel %.2e, %.2fs", problems,
                 stable, unstable, degenerate, bad, worst, secs);
  return v;
}

// ---------------------------------------------------------------- 2

Verdict solver_check() {
  Rng rng(4242);
  int models = 0, kkt_bad = 0;
  double worst_kkt = 0.0, worst_za = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + rng.below(60);
    const Dataset d = oracle::random_problem(n, 1 + rng.below(4), rng, rng.uniform(0.0, 1.5));
    const Kernel k = trial % 2 ? Kernel::rbf(rng.uniform(0.1, 2.0)) : Kernel::linear();
    TrainConfig cfg;
    cfg.C = std::exp(rng.uniform(-3.0, 3.0));
    Vector z = d.labels();
    if (trial % 4 >= 2)
      for (auto& v : z) v *= rng.uniform(0.05, 1.0);
    const SvmModel m = train(GramCache::build(d.features(), k), z, cfg);
    ++models;
    const double kkt = kkt_violation(m);
    const double za = std::abs(z.dot(m.alpha()));
    worst_kkt = std::max(worst_kkt, kkt);
    worst_za = std::max(worst_za, za);
    if (!(kkt < 1e-6 && za < 1e-6)) ++kkt_bad;
  }

  Matrix x2(2, 1);
  x2 << 1.0, -1.0;
  Vector y2(2);
  y2 << 1.0, -1.0;
  const SvmModel two = train(Dataset(x2, y2), y2, Kernel::linear(), TrainConfig{});
  const double two_err = std::max({std::abs(two.alpha()[0] - 0.5), std::abs(two.alpha()[1] - 0.5), std::abs(two.b())});
  const bool two_ok = two_err < 1e-6 && kkt_violation(two) < 1e-6;

  int dup_cases = 0, dup_bad = 0;
  double worst_dup = 0.0;
  Rng drng(77);
  while (dup_cases < 20) {
    const std::size_t n = 12 + drng.below(20);
    const Dataset d = oracle::random_problem(n, 2, drng);
    const Kernel k = dup_cases % 2 ? Kernel::rbf(0.5) : Kernel::linear();
    const double C = std::exp(drng.uniform(-1.0, 1.5));
    const auto ni = static_cast<Eigen::Index>(n);
    Vector q = Vector::Zero(ni);
    for (auto& v : q) v = drng.uniform01() < 0.25 ? 1.0 : 0.0;
    const Vector& y = d.labels();
    Vector z = y;
    for (Eigen::Index i = 0; i < ni; ++i)
      if (q[i] == 1.0) z[i] = -y[i];
    if (!(z.array() > 0).any() || !(z.array() < 0).any()) continue;
    ++dup_cases;

    TrainConfig cfg;
    cfg.C = C;
    cfg.kkt_tol = 1e-9;
    const GramCache cache = GramCache::build(d.features(), k);
    const SvmModel flipped = train(cache, z, cfg);
    const double direct = oracle::primal_objective(flipped.training_decision(), *cache.K,
                                                   z.cwiseProduct(flipped.alpha()), z, Vector::Ones(ni), C);
    Matrix xd(2 * ni, d.dim());
    xd << d.features(), d.features();
    Vector yd(2 * ni), cost(2 * ni);
    yd << y, -y;
    cost << (Vector::Ones(ni) - q), q;
    TrainConfig wcfg = cfg;
    wcfg.per_sample_cost = cost;
    const GramCache dcache = GramCache::build(xd, k);
    const SvmModel dup = train(dcache, yd, wcfg);
    const double weighted = oracle::primal_objective(dup.training_decision(), *dcache.K,
                                                     yd.cwiseProduct(dup.alpha()), yd, cost, C);
    worst_dup = std::max(worst_dup, std::abs(direct - weighted));
    if (!(std::abs(direct - weighted) < 1e-6)) ++dup_bad;
  }

  Verdict v;
  v.pass = kkt_bad == 0 && two_ok && dup_bad == 0;
  v.detail = fmt("%d models, %d over 1e-6 (worst KKT %.1e, |z'a| %.1e); two-point err %.1e; duplicate %d/%d within 1e-6 "
                 "(worst %.1e)",
                 models, kkt_bad, worst_kkt, worst_za, two_err, dup_cases - dup_bad, dup_cases, worst_dup);
  return v;
}

// ---------------------------------------------------------------- 3

Verdict lp_check() {
  Rng rng(3131);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(6));
    const std::size_t L = rng.below(static_cast<std::uint64_t>(n) + 1);
    Vector e0(n), e1(n), x0(n), x1(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      // Slacks are often exactly zero, which produces ties.
      auto slack = [&] { return rng.uniform01() < 0.3 ? 0.0 : rng.uniform(0.0, 2.5); };
      e0[i] = slack();
      e1[i] = slack();
      x0[i] = slack();
      x1[i] = slack();
    }
    const Vector q = solve_flip_lp(e0, e1, x0, x1, L);
    const Vector a = e0 - x0, b = e1 - x1;
    const double ours = oracle::lp_value(a, b, std::vector<double>(q.begin(), q.end()));
    const double brute = oracle::lp_vertex_minimum(a, b, static_cast<double>(L));
    const bool feasible = (q.array() >= 0.0).all() && (q.array() <= 1.0).all() && q.sum() <= static_cast<double>(L);
    if (!feasible || ours != brute) ++mismatches;
  }
  return {mismatches == 0, fmt("100 instances, %d objective mismatches", mismatches)};
}

// ---------------------------------------------------------------- 4

struct FamilyResult {
  int cc_hits = 0;
  std::vector<int> alfa_miss, cr_miss, alfa_err_miss, cr_err_miss;
};

FamilyResult small_family(bool rbf) {
  FamilyResult r;
  AttackSettings st;
  st.clusters = ClusterConfig{10, 200, {}};
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + static_cast<std::uint64_t>(seed));
    const Dataset d = oracle::small_instance(rng);
    const AttackProblem p = AttackProblem::make(d, rbf ? Kernel::rbf(0.5) : Kernel::linear(), 1.0);
    const Vector& y = d.labels();
    const auto ex = oracle::enumerate_flips(p.cache(), y, 1.0, 2);
    const double best_err = *std::max_element(ex.train_error.begin(), ex.train_error.end());
    const double med_err = oracle::median(ex.train_error);
    const auto s = static_cast<std::uint64_t>(seed);

    const FlipPlan cc = run_attack(Strategy::CorrelatedClusters, p, FlipBudget{2}, st, s);
    if (training_error(p.retrain(cc.z), y) >= best_err - 1e-12) ++r.cc_hits;

    // alfa minimises V(z,z) - V(y,z); alfa-cr maximises V(z,y).
    const FlipPlan a = run_attack(Strategy::Alfa, p, FlipBudget{2}, st, s);
    const SvmModel am = p.retrain(a.z);
    const SvmModel clean = p.retrain(y);
    const double gap = objective_V(am, a.z, 1.0) - objective_V(clean, a.z, 1.0);
    if (gap > oracle::median(ex.alfa_gap) + 1e-9) r.alfa_miss.push_back(seed);
    if (training_error(am, y) < med_err - 1e-12) r.alfa_err_miss.push_back(seed);

    const FlipPlan c = run_attack(Strategy::AlfaCr, p, FlipBudget{2}, st, s);
    const SvmModel cm = p.retrain(c.z);
    if (objective_V(cm, y, 1.0) < oracle::median(ex.V) - 1e-9) r.cr_miss.push_back(seed);
    if (training_error(cm, y) < med_err - 1e-12) r.cr_err_miss.push_back(seed);
  }
  return r;
}

std::string seeds(const std::vector<int>& v) {
  if (v.empty()) return "none";
  std::string s;
  for (int x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
  return s;
}

Verdict small_instance_check() {
  const auto t0 = Clock::now();
  bool pass = true;
  std::string detail;
  for (bool rbf : {false, true}) {
    const FamilyResult r = small_family(rbf);
    pass = pass && r.cc_hits >= 16 && r.alfa_miss.empty() && r.cr_miss.empty();
    detail += fmt("[%s] cc at max %d/20; alfa objective worse than median on seeds: %s; alfa-cr objective worse than median on "
                  "seeds: %s (training-error reading, info only: alfa %s; alfa-cr %s) ",
                  rbf ? "rbf 0.5" : "linear", r.cc_hits, seeds(r.alfa_miss).c_str(), seeds(r.cr_miss).c_str(),
                  seeds(r.alfa_err_miss).c_str(), seeds(r.cr_err_miss).c_str());
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 120.0;
  detail += fmt("%.2fs", secs);
  return {pass, detail};
}

// ---------------------------------------------------------------- 5

double cell_mean(const ExperimentReport& r, const std::string& strategy, double fraction) {
  for (const auto& c : r.summary())
    if (c.strategy == strategy && c.fraction == fraction) return c.mean;
  return -1.0;
}

Verdict synthetic_check() {
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.data = "synthetic:parabolic";
  c.train_size = 200;
  c.test_size = 800;
  c.kernels = {KernelKind::Rbf};
  c.C_grid = {1.0};
  c.gamma_grid = {0.5};
  c.fractions = {0.1};
  c.strategies = {Strategy::Alfa, Strategy::AlfaCr, Strategy::AlfaTilt, Strategy::CorrelatedClusters, Strategy::Random};
  c.folds = 5;
  const ExperimentReport r = run_experiment(c);
  const double secs = seconds_since(t0);

  const double clean = cell_mean(r, "clean", 0.0);
  const double rnd = cell_mean(r, "random", 0.1);
  bool all_above = true;
  std::string detail = fmt("clean %.4f (reference 0.025), random %.4f", clean, rnd);
  for (Strategy s : {Strategy::Alfa, Strategy::AlfaCr, Strategy::AlfaTilt, Strategy::CorrelatedClusters}) {
    const double m = cell_mean(r, strategy_name(s), 0.1);
    all_above = all_above && m > rnd;
    detail += fmt(", %s %.4f%s", strategy_name(s).c_str(), m, m > rnd ? "" : " (not above random)");
  }
  const double cc = cell_mean(r, "correlated-clusters", 0.1);
  detail += fmt(" (reference cc 0.2175); %.1fs", secs);
  return {clean >= 0.0 && clean <= 0.05 && cc >= 0.15 && all_above && secs < 600.0, detail};
}

// ---------------------------------------------------------------- 6

std::string real_dataset_path() {
  if (const char* env = std::getenv("LABELFLIP_DATASET")) return env;
  return LABELFLIP_TEST_DATA "/digits_parity.libsvm";
}

Verdict real_trend_check() {
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.data = real_dataset_path();
  c.train_size = 500;
  c.test_size = 0;
  c.kernels = {KernelKind::Rbf};
  c.C_grid = power2_grid(-7, 10);
  c.gamma_grid = power2_grid(-7, 5);
  c.fractions = {0.2};
  c.strategies = {Strategy::Alfa, Strategy::AlfaCr, Strategy::AlfaTilt, Strategy::CorrelatedClusters, Strategy::Random};
  c.folds = 5;
  Verdict v;
  v.soft = true;
  ExperimentReport r;
  try {
    r = run_experiment(c);
  } catch (const std::exception& e) {
    v.detail = std::string("could not run on ") + c.data + ": " + e.what();
    return v;
  }
  const double rnd = cell_mean(r, "random", 0.2);
  double best = -1.0;
  std::string best_name;
  std::string detail = fmt("%s: model C %g gamma %g (cv %.4f), clean %.4f, random %.4f", c.data.c_str(), r.model.C,
                           r.model.kernel.gamma, r.model.cv_error, cell_mean(r, "clean", 0.0), rnd);
  for (Strategy s : {Strategy::Alfa, Strategy::AlfaCr, Strategy::AlfaTilt, Strategy::CorrelatedClusters}) {
    const double m = cell_mean(r, strategy_name(s), 0.2);
    detail += fmt(", %s %.4f", strategy_name(s).c_str(), m);
    if (m > best) {
      best = m;
      best_name = strategy_name(s);
    }
  }
  v.pass = best - rnd >= 0.05;
  v.detail = detail + fmt("; best %s leads random by %.1f points; %.1fs", best_name.c_str(), 100.0 * (best - rnd),
                          seconds_since(t0));
  return v;
}

// ---------------------------------------------------------------- 7

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism_check() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "labelflip_acceptance_cli";
  fs::remove_all(root);
  const std::vector<std::string> runs = {
      "sweep --train-size 60 --test-size 200 --folds 2 --fractions 0,0.1 --strategies all --seed 123",
      "sweep --data synthetic:linear --kernel linear,rbf --C 2^-1..2^1 --gamma 0.5,2 --train-size 50 --test-size 100 "
      "--folds 2 --fractions 0.1 --strategies alfa,random,correlated-clusters --seed 9",
  };
  int identical = 0, broken = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::string first;
    bool ok = true;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = root / (std::to_string(i) + "_" + std::to_string(rep));
      const std::string cmd = std::string("\"") + LABELFLIP_CLI + "\" " + runs[i] + " --out \"" + out.string() +
                              "\" > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0 || !fs::exists(out / "report.csv")) {
        ok = false;
        break;
      }
      const std::string body = read_file(out / "report.csv");
      if (rep == 0)
        first = body;
      else if (body != first)
        ok = false;
    }
    ok ? ++identical : ++broken;
  }
  fs::remove_all(root);
  return {broken == 0, fmt("%d/%zu sweeps byte-identical across two runs", identical, runs.size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"gradient vs finite differences", gradient_check},
      {"solver KKT, two-point, weighted duplicates", solver_check},
      {"flip LP vs vertex enumeration", lp_check},
      {"small-instance attack quality", small_instance_check},
      {"synthetic parabolic reproduction", synthetic_check},
      {"trend on a real dataset (soft)", real_trend_check},
      {"CLI report determinism", determinism_check},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  bool hard_fail = false;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what(), id == 6};
    }
    const char* tag = v.pass ? "PASS" : (v.soft ? "WARN" : "FAIL");
    if (!v.pass && !v.soft) hard_fail = true;
    std::printf("%s %d %s: %s\n", tag, id, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return hard_fail ? 1 : 0;
}
