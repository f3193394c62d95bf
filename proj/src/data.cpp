#include "labelflip/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "labelflip/rng.hpp"
#include "labelflip/text.hpp"

namespace labelflip {

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
      line_(line) {}

Dataset::Dataset(Matrix features, Vector labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.rows() != labels_.size())
    throw std::invalid_argument("Dataset: feature rows (" + std::to_string(features_.rows()) +
                                ") != label count (" + std::to_string(labels_.size()) + ")");
  for (Eigen::Index i = 0; i < labels_.size(); ++i) {
    if (labels_[i] != 1.0 && labels_[i] != -1.0)
      throw std::invalid_argument("Dataset: label at row " + std::to_string(i) +
                                  " is not -1/+1");
  }
}

bool Dataset::has_both_classes() const {
  return (labels_.array() > 0).any() && (labels_.array() < 0).any();
}

Dataset Dataset::subset(const IndexList& rows) const {
  Matrix x(static_cast<Eigen::Index>(rows.size()), features_.cols());
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = static_cast<Eigen::Index>(rows[r]);
    if (src >= size()) throw std::out_of_range("Dataset::subset: row index out of range");
    x.row(static_cast<Eigen::Index>(r)) = features_.row(src);
    y[static_cast<Eigen::Index>(r)] = labels_[src];
  }
  return Dataset(std::move(x), std::move(y));
}

Dataset Dataset::relabeled(Vector labels) const { return Dataset(features_, std::move(labels)); }

bool operator==(const Dataset& a, const Dataset& b) {
  return a.features_.rows() == b.features_.rows() && a.features_.cols() == b.features_.cols() &&
         a.features_ == b.features_ && a.labels_ == b.labels_;
}

Dataset parse_libsvm(std::string_view text) {
  struct Row {
    double label;
    std::vector<std::pair<long long, double>> entries;
  };
  std::vector<Row> rows;
  long long max_index = 0;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }

    const auto tokens = text::split_ws(line);
    const auto label = text::to_double(tokens.front());
    if (!label) throw ParseError(line_no, "non-numeric label '" + std::string(tokens.front()) + "'");
    Row row{*label > 0.0 ? 1.0 : -1.0, {}};
    long long last = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      if (colon == std::string_view::npos)
        throw ParseError(line_no, "expected index:value, got '" + std::string(tokens[t]) + "'");
      const auto index = text::to_integer(tokens[t].substr(0, colon));
      const auto value = text::to_double(tokens[t].substr(colon + 1));
      if (!index || !value)
        throw ParseError(line_no, "non-numeric token '" + std::string(tokens[t]) + "'");
      if (*index <= last)
        throw ParseError(line_no, "indices must be 1-based and strictly increasing");
      last = *index;
      row.entries.emplace_back(*index, *value);
    }
    max_index = std::max(max_index, last);
    rows.push_back(std::move(row));
    if (end == text.size()) break;
  }
  if (rows.empty()) throw ParseError(0, "empty input");

  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), max_index);
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    y[ri] = rows[r].label;
    for (const auto& [index, value] : rows[r].entries) x(ri, index - 1) = value;
  }
  return Dataset(std::move(x), std::move(y));
}

Dataset load_libsvm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_libsvm(buf.str());
}

std::string write_libsvm(const Dataset& d) {
  std::string out;
  const Matrix& x = d.features();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    out += d.labels()[i] > 0 ? "+1" : "-1";
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (x(i, j) == 0.0) continue;
      out += ' ';
      out += std::to_string(j + 1);
      out += ':';
      out += text::shortest(x(i, j));
    }
    out += '\n';
  }
  return out;
}

namespace {

void require_even(std::size_t n, const char* who) {
  if (n < 2 || n % 2 != 0)
    throw std::invalid_argument(std::string(who) + ": n must be even and >= 2");
}

// Fills n/2 samples per class by rejection: `score` > +margin/2 is positive,
// < -margin/2 negative, anything in between is discarded.
template <typename Draw, typename Score>
Dataset rejection_sample(std::size_t n, double margin, std::uint64_t seed, Draw draw, Score score) {
  Rng rng(seed);
  const std::size_t per_class = n / 2;
  Matrix x(static_cast<Eigen::Index>(n), 2);
  Vector y(static_cast<Eigen::Index>(n));
  std::size_t pos = 0;
  std::size_t neg = 0;
  std::size_t filled = 0;
  const double half = margin / 2.0;
  while (filled < n) {
    const auto [a, b] = draw(rng);
    const double s = score(a, b);
    double label = 0.0;
    if (s >= half && pos < per_class) {
      label = 1.0;
      ++pos;
    } else if (s <= -half && neg < per_class) {
      label = -1.0;
      ++neg;
    } else {
      continue;
    }
    const auto r = static_cast<Eigen::Index>(filled++);
    x(r, 0) = a;
    x(r, 1) = b;
    y[r] = label;
  }
  return Dataset(std::move(x), std::move(y));
}

}  // namespace

Dataset gen_linear_2d(std::size_t n, double margin, std::uint64_t seed) {
  require_even(n, "gen_linear_2d");
  if (margin < 0.0 || margin >= 0.5) throw std::invalid_argument("gen_linear_2d: margin must be in [0, 0.5)");
  return rejection_sample(
      n, margin, seed, [](Rng& rng) { return std::pair{rng.uniform01(), rng.uniform01()}; },
      [](double a, double b) { return (a - b) / std::sqrt(2.0); });
}

Dataset gen_parabolic_2d(std::size_t n, double margin, std::uint64_t seed) {
  require_even(n, "gen_parabolic_2d");
  if (margin < 0.0 || margin >= 0.5) throw std::invalid_argument("gen_parabolic_2d: margin must be in [0, 0.5)");
  return rejection_sample(
      n, margin, seed,
      [](Rng& rng) { return std::pair{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}; },
      [](double a, double b) { return b - (1.5 * a * a - 0.5); });
}

std::pair<IndexList, IndexList> split_indices(std::size_t n, const SplitSpec& s) {
  if (s.train_size + s.test_size > n)
    throw std::invalid_argument("split: train_size + test_size (" +
                                std::to_string(s.train_size + s.test_size) +
                                ") exceeds available samples (" + std::to_string(n) + ")");
  Rng rng(s.seed);
  const auto perm = rng.permutation(n);
  IndexList train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(s.train_size));
  IndexList test(perm.begin() + static_cast<std::ptrdiff_t>(s.train_size),
                 perm.begin() + static_cast<std::ptrdiff_t>(s.train_size + s.test_size));
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> split(const Dataset& d, const SplitSpec& s) {
  const auto [train, test] = split_indices(static_cast<std::size_t>(d.size()), s);
  return {d.subset(train), d.subset(test)};
}

std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) throw std::invalid_argument("kfold: need 2 <= k <= n");
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<Fold> folds(k);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = n / k + (f < n % k ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= start && i < start + len)
        folds[f].validation.push_back(perm[i]);
      else
        folds[f].train.push_back(perm[i]);
    }
    start += len;
  }
  return folds;
}

}  // namespace labelflip
