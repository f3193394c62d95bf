#include "labelflip/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "labelflip/rng.hpp"
#include "labelflip/svm.hpp"
#include "labelflip/text.hpp"

namespace labelflip {

namespace {

// RNG stream ids, so that data, splits, CV and attacks never share a stream.
constexpr std::uint64_t kDataStream = 0xda7a;
constexpr std::uint64_t kCvStream = 0xc5;
constexpr std::uint64_t kSplitStream = 0x5000;
constexpr std::uint64_t kAttackStream = 0xa77ac;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double number(const std::string& key, std::string_view v) {
  auto x = text::to_double(text::trim(v));
  if (!x) throw ConfigError("bad number for '" + key + "': '" + std::string(v) + "'");
  return *x;
}

std::size_t count(const std::string& key, std::string_view v) {
  auto x = text::to_integer(text::trim(v));
  if (!x || *x < 0) throw ConfigError("bad count for '" + key + "': '" + std::string(v) + "'");
  return static_cast<std::size_t>(*x);
}

bool boolean(const std::string& key, const std::string& v) {
  const std::string s = lower(std::string(text::trim(v)));
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("bad flag for '" + key + "': '" + v + "'");
}

// "2^-3" -> 0.125
std::optional<double> power_token(std::string_view t) {
  if (t.size() < 3 || t.substr(0, 2) != "2^") return std::nullopt;
  auto e = text::to_integer(t.substr(2));
  if (!e) return std::nullopt;
  return std::ldexp(1.0, static_cast<int>(*e));
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

bool row_less(const ReportRow& a, const ReportRow& b) {
  if (a.strategy != b.strategy) return a.strategy < b.strategy;
  if (a.fraction != b.fraction) return a.fraction < b.fraction;
  return a.fold < b.fold;
}

}  // namespace

// ---------------------------------------------------------------- config

std::vector<double> power2_grid(int lo, int hi) {
  if (lo > hi) throw ConfigError("empty power-of-two range");
  std::vector<double> g;
  for (int e = lo; e <= hi; ++e) g.push_back(std::ldexp(1.0, e));
  return g;
}

std::vector<double> parse_number_list(const std::string& csv) {
  std::vector<double> out;
  for (auto tok : text::split_char(csv, ',')) {
    tok = text::trim(tok);
    if (tok.empty()) continue;
    // 2^a..2^b expands to the whole range
    if (auto dots = tok.find(".."); dots != std::string_view::npos) {
      auto lo = tok.substr(0, dots), hi = tok.substr(dots + 2);
      if (lo.substr(0, 2) == "2^" && hi.substr(0, 2) == "2^") {
        auto a = text::to_integer(lo.substr(2)), b = text::to_integer(hi.substr(2));
        if (a && b) {
          for (double v : power2_grid(static_cast<int>(*a), static_cast<int>(*b))) out.push_back(v);
          continue;
        }
      }
      throw ConfigError("bad range '" + std::string(tok) + "'");
    }
    if (auto p = power_token(tok)) {
      out.push_back(*p);
      continue;
    }
    auto v = text::to_double(tok);
    if (!v) throw ConfigError("bad number '" + std::string(tok) + "'");
    out.push_back(*v);
  }
  return out;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key_in, const std::string& value) {
  const std::string key = lower(key_in);
  const std::string v(text::trim(value));
  if (key == "data") {
    cfg.data = v;
  } else if (key == "synthetic_size") {
    cfg.synthetic_size = count(key, v);
  } else if (key == "synthetic_margin") {
    cfg.synthetic_margin = number(key, v);
  } else if (key == "train_size") {
    cfg.train_size = count(key, v);
  } else if (key == "test_size") {
    cfg.test_size = count(key, v);
  } else if (key == "kernel" || key == "kernels") {
    cfg.kernels.clear();
    for (auto t : text::split_char(v, ',')) {
      t = text::trim(t);
      if (t.empty()) continue;
      try {
        cfg.kernels.push_back(parse_kernel_kind(std::string(t)));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  } else if (key == "c" || key == "c_grid") {
    cfg.C_grid = parse_number_list(v);
  } else if (key == "gamma" || key == "gamma_grid") {
    cfg.gamma_grid = parse_number_list(v);
  } else if (key == "cv_folds") {
    cfg.cv_folds = count(key, v);
  } else if (key == "fractions") {
    cfg.fractions = parse_number_list(v);
  } else if (key == "strategies") {
    cfg.strategies.clear();
    for (auto t : text::split_char(v, ',')) {
      t = text::trim(t);
      if (t.empty()) continue;
      if (t == "all") {
        cfg.strategies = all_strategies();
        continue;
      }
      try {
        cfg.strategies.push_back(parse_strategy(std::string(t)));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  } else if (key == "folds") {
    cfg.folds = count(key, v);
  } else if (key == "seed") {
    auto s = text::to_integer(v);
    if (!s || *s < 0) throw ConfigError("bad seed '" + v + "'");
    cfg.seed = static_cast<std::uint64_t>(*s);
  } else if (key == "repetitions") {
    cfg.attack.random_repetitions = count(key, v);
  } else if (key == "alfa_max_iters") {
    cfg.attack.alfa.max_iters = count(key, v);
  } else if (key == "cr_max_iters") {
    cfg.attack.alfa_cr.max_iters = count(key, v);
  } else if (key == "cr_step") {
    cfg.attack.alfa_cr.step = number(key, v);
  } else if (key == "tilt_trials") {
    cfg.attack.tilt.trials = count(key, v);
  } else if (key == "tilt_beta1") {
    cfg.attack.tilt.beta1 = number(key, v);
  } else if (key == "tilt_beta2") {
    cfg.attack.tilt.beta2 = number(key, v);
  } else if (key == "cc_population") {
    cfg.attack.clusters.population = count(key, v);
  } else if (key == "cc_iterations") {
    cfg.attack.clusters.iterations = count(key, v);
  } else if (key == "timing") {
    cfg.record_time = boolean(key, v);
  } else {
    throw ConfigError("unknown setting '" + key_in + "'");
  }
}

ExperimentConfig parse_config(const std::string& text_in, ExperimentConfig cfg) {
  std::istringstream in(text_in);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(no) + ": expected key = value");
    const std::string key(text::trim(body.substr(0, eq)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(no) + ": missing key");
    try {
      apply_setting(cfg, key, std::string(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(no) + ": " + e.what());
    }
  }
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.kernels.empty()) throw ConfigError("no kernel given");
  if (cfg.C_grid.empty()) throw ConfigError("empty C grid");
  for (double c : cfg.C_grid)
    if (!(c > 0.0)) throw ConfigError("C must be positive");
  const bool rbf = std::find(cfg.kernels.begin(), cfg.kernels.end(), KernelKind::Rbf) != cfg.kernels.end();
  if (rbf && cfg.gamma_grid.empty()) throw ConfigError("empty gamma grid");
  for (double g : cfg.gamma_grid)
    if (!(g > 0.0)) throw ConfigError("gamma must be positive");
  for (double f : cfg.fractions)
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("flip fractions must lie in [0, 1]");
  if (cfg.fractions.empty()) throw ConfigError("no flip fractions");
  if (cfg.strategies.empty()) throw ConfigError("no strategies");
  if (cfg.folds < 1) throw ConfigError("folds must be at least 1");
  if (cfg.train_size < 2) throw ConfigError("train_size must be at least 2");
  if (cfg.data.rfind("synthetic:", 0) == 0) {
    const std::string kind = cfg.data.substr(10);
    if (kind != "linear" && kind != "parabolic") throw ConfigError("unknown synthetic data '" + cfg.data + "'");
  }
}

// ---------------------------------------------------------------- data

Dataset load_source(const ExperimentConfig& cfg) {
  const std::uint64_t s = derive_seed(cfg.seed, kDataStream);
  std::size_t n = cfg.synthetic_size;
  if (n < cfg.train_size + cfg.test_size) n = cfg.train_size + cfg.test_size;
  n += n % 2;
  if (cfg.data == "synthetic:linear") return gen_linear_2d(n, cfg.synthetic_margin, s);
  if (cfg.data == "synthetic:parabolic") return gen_parabolic_2d(n, cfg.synthetic_margin, s);
  return load_libsvm(cfg.data);
}

FoldData prepare_fold(const Dataset& all, const ExperimentConfig& cfg, std::size_t fold) {
  const auto n = static_cast<std::size_t>(all.size());
  if (cfg.train_size >= n) throw ConfigError("train_size exceeds the available samples");
  const std::size_t test = cfg.test_size == 0 ? n - cfg.train_size : cfg.test_size;
  if (cfg.train_size + test > n) throw ConfigError("train_size + test_size exceeds the available samples");
  auto [tr, te] = split(all, SplitSpec{cfg.train_size, test, derive_seed(cfg.seed, kSplitStream + fold)});
  return {std::move(tr), std::move(te)};
}

std::size_t budget_for(double fraction, std::size_t n_train) {
  const long long L = std::llround(fraction * static_cast<double>(n_train));
  return static_cast<std::size_t>(std::clamp<long long>(L, 0, static_cast<long long>(n_train)));
}

double replay_test_error(const FoldData& f, const Kernel& k, double C, const FlipPlan& plan) {
  TrainConfig tc;
  tc.C = C;
  const SvmModel m = train(f.train, plan.z, k, tc);
  return zero_one_error(m, f.test, f.test.labels());
}

// ---------------------------------------------------------------- grid search

ModelChoice grid_search(const Dataset& d, const std::vector<KernelKind>& kernels, const std::vector<double>& C_grid,
                        const std::vector<double>& gamma_grid, std::size_t k, std::uint64_t seed) {
  if (kernels.empty() || C_grid.empty()) throw ConfigError("grid_search: empty grid");
  const auto folds = kfold(static_cast<std::size_t>(d.size()), k, seed);
  std::vector<Dataset> tr, va;
  for (const auto& f : folds) {
    tr.push_back(d.subset(f.train));
    va.push_back(d.subset(f.validation));
  }

  ModelChoice best;
  bool found = false;
  std::vector<std::string> warnings;
  for (KernelKind kind : kernels) {
    const std::vector<double> gammas = kind == KernelKind::Rbf ? gamma_grid : std::vector<double>{0.0};
    if (gammas.empty()) throw ConfigError("grid_search: empty gamma grid");
    for (double g : gammas) {
      const Kernel ker = kind == KernelKind::Rbf ? Kernel::rbf(g) : Kernel::linear();
      std::vector<GramCache> caches;
      for (const auto& t : tr) caches.push_back(GramCache::build(t.features(), ker));
      for (double C : C_grid) {
        TrainConfig tc;
        tc.C = C;
        double total = 0.0;
        bool ok = true;
        for (std::size_t i = 0; i < folds.size() && ok; ++i) {
          try {
            const SvmModel m = train(caches[i], tr[i].labels(), tc);
            total += zero_one_error(m, va[i], va[i].labels());
          } catch (const TrainError& e) {
            warnings.push_back("grid cell " + ker.name() + " C=" + fmt6(C) + " skipped: " + e.what());
            ok = false;
          }
        }
        if (!ok) continue;
        const double err = total / static_cast<double>(folds.size());
        const bool better = !found || err < best.cv_error ||
                            (err == best.cv_error &&
                             (C < best.C || (C == best.C && ker.gamma < best.kernel.gamma)));
        if (better) {
          best.kernel = ker;
          best.C = C;
          best.cv_error = err;
          found = true;
        }
      }
    }
  }
  if (!found) throw TrainError("grid_search: every grid cell failed to train");
  best.warnings = std::move(warnings);
  return best;
}

// ---------------------------------------------------------------- experiment

std::vector<CellSummary> ExperimentReport::summary() const {
  std::map<std::pair<std::string, double>, std::vector<double>> cells;
  for (const auto& r : rows)
    if (!r.failure) cells[{r.strategy, r.fraction}].push_back(r.test_error);
  std::vector<CellSummary> out;
  for (const auto& [key, v] : cells) {
    CellSummary s;
    s.strategy = key.first;
    s.fraction = key.second;
    s.count = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.stdev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    out.push_back(s);
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const Dataset all = load_source(cfg);
  if (!all.has_both_classes()) throw ConfigError("dataset has a single class");

  ExperimentReport report;
  report.timed = cfg.record_time;
  const bool single_cell = cfg.C_grid.size() == 1 && cfg.kernels.size() == 1 &&
                           (cfg.kernels[0] == KernelKind::Linear || cfg.gamma_grid.size() == 1);
  if (single_cell) {
    report.model.kernel = cfg.kernels[0] == KernelKind::Rbf ? Kernel::rbf(cfg.gamma_grid[0]) : Kernel::linear();
    report.model.C = cfg.C_grid[0];
  } else {
    report.model = grid_search(prepare_fold(all, cfg, 0).train, cfg.kernels, cfg.C_grid, cfg.gamma_grid,
                               cfg.cv_folds, derive_seed(cfg.seed, kCvStream));
    report.warnings = report.model.warnings;
  }
  const Kernel ker = report.model.kernel;
  const double C = report.model.C;

  for (std::size_t fold = 0; fold < cfg.folds; ++fold) {
    const FoldData fd = prepare_fold(all, cfg, fold);
    ReportRow base;
    base.kernel = ker;
    base.C = C;
    base.fold = fold;

    std::optional<AttackProblem> problem;
    std::string fold_failure;
    try {
      problem.emplace(AttackProblem::make(fd.train, ker, C));
    } catch (const std::exception& e) {
      fold_failure = std::string("clean training failed: ") + e.what();
    }

    ReportRow clean = base;
    clean.strategy = "clean";
    if (problem) {
      clean.plan = make_plan("clean", fd.train.labels(), {});
      clean.test_error = replay_test_error(fd, ker, C, clean.plan);
    } else {
      clean.failure = fold_failure;
    }
    report.rows.push_back(clean);

    for (std::size_t si = 0; si < cfg.strategies.size(); ++si) {
      const Strategy s = cfg.strategies[si];
      for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
        ReportRow row = base;
        row.strategy = strategy_name(s);
        row.fraction = cfg.fractions[fi];
        row.budget = budget_for(row.fraction, static_cast<std::size_t>(fd.train.size()));
        if (!problem) {
          row.failure = fold_failure;
          report.rows.push_back(row);
          continue;
        }
        const std::uint64_t cell_seed =
            derive_seed(derive_seed(cfg.seed, kAttackStream + fold), static_cast<std::uint64_t>(s) * 4096 + fi);
        try {
          const auto t0 = std::chrono::steady_clock::now();
          row.plan = run_attack(s, *problem, FlipBudget{row.budget}, cfg.attack, cell_seed);
          const auto t1 = std::chrono::steady_clock::now();
          row.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
          row.test_error = replay_test_error(fd, ker, C, row.plan);
          for (const auto& w : row.plan.warnings)
            report.warnings.push_back(row.strategy + " fraction " + fmt6(row.fraction) + " fold " +
                                      std::to_string(fold) + ": " + w);
        } catch (const std::exception& e) {
          row.failure = e.what();
        }
        report.rows.push_back(std::move(row));
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------- output

std::string emit_csv(const ExperimentReport& r) {
  std::vector<const ReportRow*> rows;
  for (const auto& row : r.rows) rows.push_back(&row);
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow* a, const ReportRow* b) { return row_less(*a, *b); });

  std::string out = "strategy,kernel,C,gamma,fraction,fold,test_error,wall_time_ms\n";
  for (const ReportRow* row : rows) {
    out += csv_field(row->strategy);
    out += ',' + csv_field(row->kernel.name());
    out += ',' + fmt6(row->C);
    out += ',' + fmt6(row->kernel.kind == KernelKind::Rbf ? row->kernel.gamma : 0.0);
    out += ',' + fmt6(row->fraction);
    out += ',' + std::to_string(row->fold);
    out += ',' + (row->failure ? std::string("failed") : fmt6(row->test_error));
    out += ',' + fmt6(r.timed ? row->wall_time_ms : 0.0);
    out += '\n';
  }
  return out;
}

std::string emit_plot(const ExperimentReport& r) {
  std::vector<CellSummary> cells;
  for (const auto& c : r.summary())
    if (c.strategy != "clean") cells.push_back(c);
  if (cells.empty()) throw std::invalid_argument("emit_plot: nothing to plot");

  double y_top = 0.0;
  for (const auto& row : r.rows)
    if (!row.failure && row.strategy != "clean") y_top = std::max(y_top, row.test_error);
  y_top = y_top > 0.0 ? 1.1 * y_top : 1.0;
  double x_lo = cells.front().fraction, x_hi = x_lo;
  for (const auto& c : cells) {
    x_lo = std::min(x_lo, c.fraction);
    x_hi = std::max(x_hi, c.fraction);
  }
  if (x_hi == x_lo) {
    x_lo -= 0.05;
    x_hi += 0.05;
  }

  const double W = 640, H = 420, left = 60, right = 150, top = 20, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  auto X = [&](double f) { return left + (f - x_lo) / (x_hi - x_lo) * pw; };
  auto Y = [&](double e) { return top + (1.0 - std::clamp(e, 0.0, y_top) / y_top) * ph; };
  auto num = [](double v) { return fmt6(v); };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<g id=\"axes\" stroke=\"black\" fill=\"none\">\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
    << "\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n";
  s << "</g>\n";
  s << "<g id=\"y-axis\" data-min=\"0\" data-max=\"" << num(y_top) << "\" font-size=\"11\" text-anchor=\"end\">\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = y_top * t / 5.0;
    s << "<text x=\"" << left - 6 << "\" y=\"" << num(Y(v) + 4) << "\">" << num(std::round(v * 1000) / 1000)
      << "</text>\n";
  }
  s << "</g>\n";
  s << "<g id=\"x-axis\" font-size=\"11\" text-anchor=\"middle\">\n";
  std::vector<double> xs;
  for (const auto& c : cells)
    if (std::find(xs.begin(), xs.end(), c.fraction) == xs.end()) xs.push_back(c.fraction);
  std::sort(xs.begin(), xs.end());
  for (double f : xs)
    s << "<text x=\"" << num(X(f)) << "\" y=\"" << top + ph + 16 << "\">" << num(f) << "</text>\n";
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\">fraction of flipped labels</text>\n";
  s << "</g>\n";
  s << "<text x=\"14\" y=\"" << top + ph / 2 << "\" font-size=\"11\" transform=\"rotate(-90 14 " << top + ph / 2
    << ")\" text-anchor=\"middle\">test error</text>\n";

  std::vector<std::string> names;
  for (const auto& c : cells)
    if (std::find(names.begin(), names.end(), c.strategy) == names.end()) names.push_back(c.strategy);

  for (std::size_t k = 0; k < names.size(); ++k) {
    const char* color = palette[k % (sizeof palette / sizeof *palette)];
    const std::string name = xml_escape(names[k]);
    s << "<g class=\"series\" data-strategy=\"" << name << "\" stroke=\"" << color << "\">\n";
    s << "<polyline fill=\"none\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& c : cells) {
      if (c.strategy != names[k]) continue;
      s << (first ? "" : " ") << num(X(c.fraction)) << ',' << num(Y(c.mean));
      first = false;
    }
    s << "\"/>\n";
    for (const auto& c : cells) {
      if (c.strategy != names[k]) continue;
      const double x = X(c.fraction);
      s << "<line class=\"whisker\" x1=\"" << num(x) << "\" y1=\"" << num(Y(c.mean - c.stdev / 2)) << "\" x2=\""
        << num(x) << "\" y2=\"" << num(Y(c.mean + c.stdev / 2)) << "\"/>\n";
    }
    const double ly = top + 14 + 16.0 * static_cast<double>(k);
    s << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30 << "\" y2=\"" << ly
      << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << left + pw + 36 << "\" y=\"" << ly + 4 << "\" font-size=\"11\" stroke=\"none\" fill=\""
      << color << "\">" << name << "</text>\n";
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

ExperimentReport parse_report_csv(const std::string& csv) {
  // RFC-4180 records: quoted fields may hold commas, quotes and newlines.
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < csv.size(); ++i) {
    const char c = csv[i];
    if (quoted) {
      if (c == '"' && i + 1 < csv.size() && csv[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = any = true;
    } else if (c == ',') {
      rec.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < csv.size() && csv[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        rec.push_back(std::move(field));
        records.push_back(std::move(rec));
      }
      rec.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ParseError(records.size() + 1, "unterminated quoted field");
  if (any || !field.empty()) {
    rec.push_back(std::move(field));
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw ParseError(0, "empty report");
  static const std::vector<std::string> header{"strategy", "kernel", "C",    "gamma",
                                               "fraction", "fold",   "test_error", "wall_time_ms"};
  if (records[0] != header) throw ParseError(1, "unexpected report header");

  ExperimentReport r;
  for (std::size_t k = 1; k < records.size(); ++k) {
    const auto& f = records[k];
    if (f.size() != header.size()) throw ParseError(k + 1, "expected 8 fields");
    auto num = [&](const std::string& s) {
      auto v = text::to_double(s);
      if (!v) throw ParseError(k + 1, "bad number '" + s + "'");
      return *v;
    };
    ReportRow row;
    row.strategy = f[0];
    const double gamma = num(f[3]);
    try {
      row.kernel = parse_kernel_kind(f[1]) == KernelKind::Rbf ? Kernel::rbf(gamma) : Kernel::linear();
    } catch (const std::invalid_argument& e) {
      throw ParseError(k + 1, e.what());
    }
    row.C = num(f[2]);
    row.fraction = num(f[4]);
    auto fold = text::to_integer(f[5]);
    if (!fold || *fold < 0) throw ParseError(k + 1, "bad fold '" + f[5] + "'");
    row.fold = static_cast<std::size_t>(*fold);
    if (f[6] == "failed")
      row.failure = "failed";
    else
      row.test_error = num(f[6]);
    row.wall_time_ms = num(f[7]);
    if (row.wall_time_ms != 0.0) r.timed = true;
    r.rows.push_back(std::move(row));
  }
  return r;
}

std::string plan_file_name(const ReportRow& row) {
  return row.strategy + "_" + text::shortest(row.fraction) + "_" + std::to_string(row.fold) + ".txt";
}

std::vector<std::string> write_plans(const ExperimentReport& r, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root = fs::path(dir) / "plans";
  fs::create_directories(root);
  std::vector<std::string> written;
  for (const auto& row : r.rows) {
    if (row.failure || row.strategy == "clean") continue;
    const fs::path p = root / plan_file_name(row);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << write_plan(row.plan);
    written.push_back(p.string());
  }
  return written;
}

}  // namespace labelflip
