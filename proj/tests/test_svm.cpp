#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "labelflip/svm.hpp"
#include "oracles.hpp"

using namespace labelflip;

namespace {

Dataset two_points() {
  Matrix x(2, 1);
  x << 1.0, -1.0;
  Vector y(2);
  y << 1.0, -1.0;
  return Dataset(x, y);
}

}  // namespace

TEST_CASE("two-point linear problem matches the closed-form dual") {
  const Dataset d = two_points();
  const SvmModel m = train(d, d.labels(), Kernel::linear(), TrainConfig{});
  CHECK(m.alpha()[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(m.alpha()[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(std::abs(m.b()) < 1e-9);
  CHECK(m.sets()[0] == SvmSet::Margin);
  CHECK(m.sets()[1] == SvmSet::Margin);

  Matrix probe(3, 1);
  probe << 1.0, -1.0, 0.5;
  const Vector f = decision_function(m, probe);
  CHECK(f[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(f[1] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(f[2] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("training rejects degenerate problems") {
  const Dataset d = two_points();
  TrainConfig cfg;
  cfg.per_sample_cost = Vector::Zero(2);
  CHECK_THROWS_WITH_AS(train(d, d.labels(), Kernel::linear(), cfg), "zero box constraints", TrainError);

  Vector same = Vector::Ones(2);
  CHECK_THROWS_AS(train(d, same, Kernel::linear(), TrainConfig{}), TrainError);

  TrainConfig starved;
  starved.max_passes = 1;
  const Dataset noisy = [] {
    Rng rng(3);
    return oracle::random_problem(40, 2, rng, 2.0);
  }();
  CHECK_THROWS_AS(train(noisy, noisy.labels(), Kernel::rbf(0.5), starved), TrainError);
  try {
    train(noisy, noisy.labels(), Kernel::rbf(0.5), starved);
  } catch (const TrainError& e) {
    CHECK(e.worst_violation() > 0.0);
  }
}

TEST_CASE("synthetic linear data is fit without training error") {
  const Dataset d = gen_linear_2d(200, 0.2, 11);
  const SvmModel m = train(d, d.labels(), Kernel::linear(), TrainConfig{});
  CHECK(training_error(m, d.labels()) == 0.0);
}

TEST_CASE("trained models satisfy the KKT partition (property)") {
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 10 + rng.below(50);
    const Dataset d = oracle::random_problem(n, 1 + rng.below(4), rng, rng.uniform(0.0, 1.5));
    const Kernel k = trial % 2 ? Kernel::rbf(rng.uniform(0.1, 2.0)) : Kernel::linear();
    TrainConfig cfg;
    cfg.C = std::exp(rng.uniform(-3.0, 3.0));
    // Half the trials use continuous labels, as the relaxed attack does.
    Vector z = d.labels();
    if (trial % 4 >= 2)
      for (auto& v : z) v *= rng.uniform(0.05, 1.0);
    const SvmModel m = train(GramCache::build(d.features(), k), z, cfg);

    CHECK(kkt_violation(m) < cfg.kkt_tol);
    CHECK(std::abs(z.dot(m.alpha())) < cfg.kkt_tol);
    CHECK((m.alpha().array() >= 0.0).all());
    CHECK((m.alpha().array() <= cfg.C).all());
    const Vector g = m.kkt_margins();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      switch (m.sets()[static_cast<std::size_t>(i)]) {
        case SvmSet::Margin:
          CHECK(std::abs(g[i]) <= 10 * cfg.kkt_tol);
          break;
        case SvmSet::Reserve:
          CHECK(m.alpha()[i] <= cfg.kkt_tol);
          CHECK(g[i] > -cfg.kkt_tol);
          break;
        case SvmSet::Error:
          CHECK(m.alpha()[i] >= cfg.C - cfg.kkt_tol);
          CHECK(g[i] < cfg.kkt_tol);
          break;
      }
    }
  }
}

TEST_CASE("margin SVs sit on the margin") {
  Rng rng(5);
  const Dataset d = oracle::random_problem(60, 2, rng);
  const SvmModel m = train(d, d.labels(), Kernel::rbf(0.7), TrainConfig{});
  const auto s = m.indices_in(SvmSet::Margin);
  REQUIRE(!s.empty());
  const Vector f = decision_function(m, d.features());
  for (auto i : s) CHECK(std::abs(d.labels()[static_cast<Eigen::Index>(i)] * f[static_cast<Eigen::Index>(i)] - 1.0) <= 10 * m.kkt_tol());
}

TEST_CASE("weighted duplicate training equals training on flipped labels") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 12 + rng.below(20);
    const Dataset d = oracle::random_problem(n, 2, rng);
    const Kernel k = trial % 2 ? Kernel::rbf(0.5) : Kernel::linear();
    const double C = std::exp(rng.uniform(-1.0, 1.5));
    const auto ni = static_cast<Eigen::Index>(n);

    Vector q = Vector::Zero(ni);
    for (auto& v : q) v = rng.uniform01() < 0.25 ? 1.0 : 0.0;
    const Vector& y = d.labels();
    Vector z = y;
    for (Eigen::Index i = 0; i < ni; ++i)
      if (q[i] == 1.0) z[i] = -y[i];
    if (!(z.array() > 0).any() || !(z.array() < 0).any()) continue;

    TrainConfig cfg;
    cfg.C = C;
    cfg.kkt_tol = 1e-9;
    const GramCache cache = GramCache::build(d.features(), k);
    const SvmModel flipped = train(cache, z, cfg);
    const double direct = oracle::primal_objective(flipped.training_decision(), *cache.K,
                                                   z.cwiseProduct(flipped.alpha()), z, Vector::Ones(ni), C);

    Matrix x2(2 * ni, d.dim());
    x2 << d.features(), d.features();
    Vector y2(2 * ni), cost(2 * ni);
    y2 << y, -y;
    cost << (Vector::Ones(ni) - q), q;
    TrainConfig wcfg = cfg;
    wcfg.per_sample_cost = cost;
    const GramCache cache2 = GramCache::build(x2, k);
    const SvmModel dup = train(cache2, y2, wcfg);
    const double weighted = oracle::primal_objective(dup.training_decision(), *cache2.K,
                                                     y2.cwiseProduct(dup.alpha()), y2, cost, C);
    CHECK(std::abs(direct - weighted) < 1e-6);
    CHECK((dup.training_decision().head(ni) - flipped.training_decision()).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("warm start converges to the same solution") {
  Rng rng(9);
  const Dataset d = oracle::random_problem(50, 3, rng);
  const GramCache cache = GramCache::build(d.features(), Kernel::rbf(0.3));
  TrainConfig cfg;
  cfg.kkt_tol = 1e-9;
  const SvmModel cold = train(cache, d.labels(), cfg);
  Vector z = d.labels();
  z[3] = -z[3];
  z[7] = -z[7];
  const SvmModel warm = train(cache, z, cfg, &cold.alpha());
  const SvmModel ref = train(cache, z, cfg);
  CHECK(kkt_violation(warm) < cfg.kkt_tol);
  CHECK((warm.training_decision() - ref.training_decision()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(objective_V(warm, d.labels(), 1.0) == doctest::Approx(objective_V(ref, d.labels(), 1.0)).epsilon(1e-7));
}

TEST_CASE("decision function of an empty expansion is the bias") {
  const Dataset d = two_points();
  DualSolution sol;
  sol.alpha = Vector::Zero(2);
  sol.upper = Vector::Ones(2);
  sol.b = 0.3;
  const SvmModel m(GramCache::build(d.features(), Kernel::linear()), d.labels(), 1.0, 1e-6, sol);
  Matrix probe(3, 1);
  probe << 4.0, -2.0, 0.0;
  const Vector f = decision_function(m, probe);
  CHECK((f.array() == 0.3).all());
  CHECK((predict(m, probe).array() == 1.0).all());

  // a = 0, b = 0: every hinge loss is one.
  sol.b = 0.0;
  const SvmModel zero(GramCache::build(d.features(), Kernel::linear()), d.labels(), 1.0, 1e-6, sol);
  CHECK(objective_V(zero, d, d.labels(), 2.5) == doctest::Approx(2.5 * 2));
  // sign(0) = +1
  CHECK(training_error(zero, d.labels()) == doctest::Approx(0.5));
}

TEST_CASE("hinge losses and 0-1 error") {
  Vector f(3), y(3);
  f << 1.0, -1.0, 0.3;
  y << 1.0, 1.0, 1.0;
  const Vector l = hinge_losses(f, y);
  CHECK(l[0] == 0.0);
  CHECK(l[1] == 2.0);
  CHECK(l[2] == doctest::Approx(0.7));

  Vector f4(4), y4(4);
  f4 << 0.5, -0.5, 2.0, -1.0;
  y4 << 1.0, -1.0, 1.0, 1.0;
  CHECK(zero_one_error(f4, y4) == 0.25);
  CHECK(zero_one_error(f4, -y4) == 0.75);
  CHECK(zero_one_error(f4, f4.unaryExpr([](double v) { return v >= 0 ? 1.0 : -1.0; })) == 0.0);
  CHECK_THROWS_AS(zero_one_error(Vector(), Vector()), std::invalid_argument);
}

TEST_CASE("structural risk V on the two-point model") {
  const Dataset d = two_points();
  const SvmModel m = train(d, d.labels(), Kernel::linear(), TrainConfig{});
  const double norm_term = regularizer(m);
  // w = 1: 1/2 |w|^2 = 0.5, margins exactly 1 so no loss.
  CHECK(norm_term == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(objective_V(m, d, d.labels(), 1.0) == doctest::Approx(norm_term).epsilon(1e-9));
  Vector flipped = d.labels();
  flipped[0] = -flipped[0];
  CHECK(objective_V(m, d, flipped, 1.0) == doctest::Approx(norm_term + 2.0).epsilon(1e-9));
  CHECK(objective_V(m, d, flipped, 3.0) == doctest::Approx(norm_term + 6.0).epsilon(1e-9));
}

TEST_CASE("model text format round trips exactly") {
  Rng rng(31);
  const Dataset d = oracle::random_problem(25, 3, rng);
  const SvmModel m = train(d, d.labels(), Kernel::rbf(0.37), TrainConfig{});
  const std::string text = write_model(m);
  const SvmModel back = read_model(text);
  CHECK(back.alpha() == m.alpha());
  CHECK(back.b() == m.b());
  CHECK(back.labels_used() == m.labels_used());
  CHECK(back.kernel() == m.kernel());
  CHECK(back.support_points() == m.support_points());
  CHECK(write_model(back) == text);
  CHECK_THROWS_AS(read_model("labelflip-model 2\n"), ParseError);
}
