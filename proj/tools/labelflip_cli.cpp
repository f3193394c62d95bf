// labelflip command line: gen / train / attack / sweep / plot.
// Exit codes: 0 ok, 1 bad configuration, 2 runtime failure.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "labelflip/attacks.hpp"
#include "labelflip/harness.hpp"
#include "labelflip/svm.hpp"
#include "labelflip/text.hpp"

using namespace labelflip;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spill(const std::string& path, const std::string& body) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << body;
}

// Flags shared by train / attack / sweep. Strings so that "unset" is
// visible and the config file keeps its value.
struct Common {
  std::string config, data, kernel, C, gamma, seed;
  std::string train_size, test_size;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "key = value config file");
    app->add_option("--data", data, "LibSVM file, synthetic:linear or synthetic:parabolic");
    app->add_option("--kernel", kernel, "linear|rbf (comma list for a grid search)");
    app->add_option("--C", C, "C value or comma list, 2^a..2^b allowed");
    app->add_option("--gamma", gamma, "RBF gamma or comma list");
    app->add_option("--seed", seed, "64-bit seed");
    app->add_option("--train-size", train_size, "training samples per resample");
    app->add_option("--test-size", test_size, "test samples per resample (0 = the rest)");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config.empty()) cfg = parse_config(slurp(config), cfg);
    auto set = [&](const char* key, const std::string& v) {
      if (!v.empty()) apply_setting(cfg, key, v);
    };
    set("data", data);
    set("kernel", kernel);
    set("C", C);
    set("gamma", gamma);
    set("seed", seed);
    set("train_size", train_size);
    set("test_size", test_size);
    return cfg;
  }
};

Kernel single_kernel(const ExperimentConfig& cfg) {
  if (cfg.kernels.size() != 1 || cfg.C_grid.size() != 1)
    throw ConfigError("this command takes a single kernel and a single C");
  if (cfg.kernels[0] == KernelKind::Linear) return Kernel::linear();
  if (cfg.gamma_grid.size() != 1) throw ConfigError("this command takes a single gamma");
  return Kernel::rbf(cfg.gamma_grid[0]);
}

// Whole dataset for train/attack: a file as-is, synthetic data at its
// configured size.
Dataset whole_dataset(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.train_size = 0;
  c.test_size = 0;
  return load_source(c);
}

void print_seed(const ExperimentConfig& cfg) { std::cout << "seed " << cfg.seed << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-flip attacks against soft-margin SVMs"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "write a synthetic dataset in LibSVM format");
  std::string gen_kind = "parabolic", gen_out;
  std::size_t gen_n = 1000;
  double gen_margin = 0.1;
  std::uint64_t gen_seed = 0;
  gen->add_option("--kind", gen_kind, "linear|parabolic")->check(CLI::IsMember({"linear", "parabolic"}));
  gen->add_option("--n", gen_n, "number of points (even)");
  gen->add_option("--margin", gen_margin, "class gap");
  gen->add_option("--seed", gen_seed, "64-bit seed");
  gen->add_option("--out", gen_out, "output file (stdout when omitted)");

  // train
  auto* trn = app.add_subcommand("train", "train an SVM and write the model");
  Common trn_opts;
  trn_opts.attach(trn);
  std::string trn_out;
  trn->add_option("--out", trn_out, "model file");

  // attack
  auto* atk = app.add_subcommand("attack", "compute one flip plan on a dataset");
  Common atk_opts;
  atk_opts.attach(atk);
  std::string atk_strategy = "alfa", atk_out;
  double atk_fraction = -1.0;
  long long atk_budget = -1;
  atk->add_option("--strategy", atk_strategy, "attack name");
  atk->add_option("--fraction", atk_fraction, "flip fraction of the training set");
  atk->add_option("--budget", atk_budget, "number of flips L");
  atk->add_option("--out", atk_out, "plan file (stdout when omitted)");

  // sweep
  auto* swp = app.add_subcommand("sweep", "run the full flip-fraction experiment");
  Common swp_opts;
  swp_opts.attach(swp);
  std::string swp_fractions, swp_strategies, swp_folds, swp_out = "out";
  bool swp_timing = false;
  swp->add_option("--fractions", swp_fractions, "comma list of flip fractions");
  swp->add_option("--strategies", swp_strategies, "comma list of attacks or 'all'");
  swp->add_option("--folds", swp_folds, "number of train/test resamples");
  swp->add_option("--out", swp_out, "output directory");
  swp->add_flag("--timing", swp_timing, "record wall_time_ms in report.csv");

  // plot
  auto* plt = app.add_subcommand("plot", "render curves.svg from a report.csv");
  std::string plt_report, plt_out;
  plt->add_option("--report", plt_report, "report.csv")->required();
  plt->add_option("--out", plt_out, "SVG path (default: next to the report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      if (gen_n < 2 || gen_n % 2) throw ConfigError("--n must be even and at least 2");
      const Dataset d =
          gen_kind == "linear" ? gen_linear_2d(gen_n, gen_margin, gen_seed) : gen_parabolic_2d(gen_n, gen_margin, gen_seed);
      std::cerr << "seed " << gen_seed << '\n';
      if (gen_out.empty())
        std::cout << write_libsvm(d);
      else
        spill(gen_out, write_libsvm(d));
      return 0;
    }

    if (*trn) {
      const ExperimentConfig cfg = trn_opts.resolve();
      validate(cfg);
      print_seed(cfg);
      const Kernel k = single_kernel(cfg);
      const Dataset d = whole_dataset(cfg);
      TrainConfig tc;
      tc.C = cfg.C_grid[0];
      const SvmModel m = train(d, d.labels(), k, tc);
      std::cout << "n " << d.size() << " training_error " << text::shortest(training_error(m, d.labels()))
                << " margin_svs " << m.indices_in(SvmSet::Margin).size() << '\n';
      if (!trn_out.empty()) spill(trn_out, write_model(m));
      return 0;
    }

    if (*atk) {
      const ExperimentConfig cfg = atk_opts.resolve();
      validate(cfg);
      print_seed(cfg);
      const Kernel k = single_kernel(cfg);
      const Dataset d = whole_dataset(cfg);
      Strategy s;
      try {
        s = parse_strategy(atk_strategy);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      std::size_t L = 0;
      if (atk_budget >= 0)
        L = static_cast<std::size_t>(atk_budget);
      else if (atk_fraction >= 0.0)
        L = budget_for(atk_fraction, static_cast<std::size_t>(d.size()));
      else
        throw ConfigError("give --budget or --fraction");
      if (L > static_cast<std::size_t>(d.size())) throw ConfigError("budget exceeds the dataset size");
      const AttackProblem p = AttackProblem::make(d, k, cfg.C_grid[0]);
      const FlipPlan plan = run_attack(s, p, FlipBudget{L}, cfg.attack, cfg.seed);
      const double err = training_error(p.retrain(plan.z), d.labels());
      std::cout << "flips " << plan.flipped.size() << " training_error " << text::shortest(err) << '\n';
      for (const auto& w : plan.warnings) std::cerr << "warning: " << w << '\n';
      if (atk_out.empty())
        std::cout << write_plan(plan);
      else
        spill(atk_out, write_plan(plan));
      return 0;
    }

    if (*swp) {
      ExperimentConfig cfg = swp_opts.resolve();
      if (!swp_fractions.empty()) apply_setting(cfg, "fractions", swp_fractions);
      if (!swp_strategies.empty()) apply_setting(cfg, "strategies", swp_strategies);
      if (!swp_folds.empty()) apply_setting(cfg, "folds", swp_folds);
      if (swp_timing) cfg.record_time = true;
      validate(cfg);
      print_seed(cfg);

      const auto t0 = std::chrono::steady_clock::now();
      const ExperimentReport r = run_experiment(cfg);
      const auto t1 = std::chrono::steady_clock::now();

      namespace fs = std::filesystem;
      fs::create_directories(swp_out);
      spill((fs::path(swp_out) / "report.csv").string(), emit_csv(r));
      spill((fs::path(swp_out) / "curves.svg").string(), emit_plot(r));
      write_plans(r, swp_out);

      // Timings change between runs, so they live outside report.csv.
      ExperimentReport timed = r;
      timed.timed = true;
      spill((fs::path(swp_out) / "timings.csv").string(), emit_csv(timed));

      std::size_t failed = 0;
      for (const auto& row : r.rows) failed += row.failure ? 1 : 0;
      std::cout << "model " << r.model.kernel.name() << " C " << text::shortest(r.model.C);
      if (r.model.kernel.kind == KernelKind::Rbf) std::cout << " gamma " << text::shortest(r.model.kernel.gamma);
      std::cout << '\n';
      for (const auto& c : r.summary())
        std::cout << c.strategy << " fraction " << text::shortest(c.fraction) << " mean " << c.mean << " std "
                  << c.stdev << " n " << c.count << '\n';
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "rows " << r.rows.size() << " failed " << failed << " seconds "
                << std::chrono::duration<double>(t1 - t0).count() << '\n';
      return 0;
    }

    if (*plt) {
      const ExperimentReport r = parse_report_csv(slurp(plt_report));
      const std::string out =
          plt_out.empty() ? (std::filesystem::path(plt_report).parent_path() / "curves.svg").string() : plt_out;
      spill(out, emit_plot(r));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
