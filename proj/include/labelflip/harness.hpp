#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "labelflip/attacks.hpp"
#include "labelflip/data.hpp"
#include "labelflip/kernel.hpp"

namespace labelflip {

/// Bad configuration (exit code 1 at the CLI), as opposed to runtime failures.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  /// File path, or "synthetic:linear" / "synthetic:parabolic".
  std::string data = "synthetic:parabolic";
  std::size_t synthetic_size = 1000;
  double synthetic_margin = 0.1;

  std::size_t train_size = 200;
  std::size_t test_size = 800;  ///< 0 = every sample not drawn for training

  /// Candidate models. More than one (kernel, C) cell triggers a grid
  /// search on the clean training set of resample 0.
  std::vector<KernelKind> kernels{KernelKind::Rbf};
  std::vector<double> C_grid{1.0};
  std::vector<double> gamma_grid{0.5};
  std::size_t cv_folds = 5;

  std::vector<double> fractions{0.0, 0.05, 0.1, 0.15, 0.2};
  std::vector<Strategy> strategies = all_strategies();
  std::size_t folds = 5;  ///< seeded train/test resamples
  std::uint64_t seed = 0;
  AttackSettings attack;
  bool record_time = false;  ///< fill wall_time_ms in the report (breaks byte-stability)
};

/// key = value lines, '#' comments. Unknown keys and bad values throw ConfigError.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
/// Applies one key = value setting, same keys as the config file.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void validate(const ExperimentConfig& cfg);

std::vector<double> parse_number_list(const std::string& csv);
/// 2^lo, 2^(lo+1), ..., 2^hi
std::vector<double> power2_grid(int lo, int hi);

struct ModelChoice {
  Kernel kernel;
  double C = 1.0;
  double cv_error = 0.0;
  std::vector<std::string> warnings;
};

/// k-fold CV over kernels x C x gamma (gamma only for Rbf). Lowest mean
/// error wins; ties go to the smaller C, then the smaller gamma.
ModelChoice grid_search(const Dataset& d, const std::vector<KernelKind>& kernels, const std::vector<double>& C_grid,
                        const std::vector<double>& gamma_grid, std::size_t k, std::uint64_t seed);

struct ReportRow {
  std::string strategy;  ///< attack name or "clean"
  Kernel kernel;
  double C = 1.0;
  double fraction = 0.0;
  std::size_t fold = 0;
  std::size_t budget = 0;
  double test_error = 0.0;
  double wall_time_ms = 0.0;
  std::optional<std::string> failure;  ///< set when the cell could not be computed
  FlipPlan plan;
};

struct CellSummary {
  std::string strategy;
  double fraction = 0.0;
  double mean = 0.0;
  double stdev = 0.0;  ///< sample standard deviation, 0 for a single value
  std::size_t count = 0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> warnings;
  ModelChoice model;
  bool timed = false;  ///< wall_time_ms is meaningful
  /// Mean / std of successful rows per (strategy, fraction), sorted.
  std::vector<CellSummary> summary() const;
};

/// One resample's data. Attacks only ever receive `train`.
struct FoldData {
  Dataset train;
  Dataset test;
};

Dataset load_source(const ExperimentConfig& cfg);
FoldData prepare_fold(const Dataset& all, const ExperimentConfig& cfg, std::size_t fold);
std::size_t budget_for(double fraction, std::size_t n_train);
/// Test error of the model trained on the plan's labels.
double replay_test_error(const FoldData& f, const Kernel& k, double C, const FlipPlan& plan);

ExperimentReport run_experiment(const ExperimentConfig& cfg);

std::string emit_csv(const ExperimentReport& r);
std::string emit_plot(const ExperimentReport& r);
/// Reads emit_csv output back (plans and failure text are not stored there).
ExperimentReport parse_report_csv(const std::string& csv);
/// plans/<strategy>_<fraction>_<fold>.txt under `dir`; returns files written.
std::vector<std::string> write_plans(const ExperimentReport& r, const std::string& dir);
std::string plan_file_name(const ReportRow& row);

}  // namespace labelflip
