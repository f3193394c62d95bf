#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace labelflip {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexList = std::vector<std::size_t>;

/// Malformed LibSVM input. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Dense n x d feature matrix with labels in {-1, +1}. Immutable once built.
class Dataset {
public:
  Dataset() = default;
  /// Throws std::invalid_argument on row/label count mismatch or a label
  /// other than -1/+1.
  Dataset(Matrix features, Vector labels);

  const Matrix& features() const noexcept { return features_; }
  const Vector& labels() const noexcept { return labels_; }
  Eigen::Index size() const noexcept { return labels_.size(); }
  Eigen::Index dim() const noexcept { return features_.cols(); }
  bool has_both_classes() const;

  /// Rows picked by `rows`, in that order.
  Dataset subset(const IndexList& rows) const;
  /// Same features, different labels (still validated).
  Dataset relabeled(Vector labels) const;

  friend bool operator==(const Dataset& a, const Dataset& b);

private:
  Matrix features_;
  Vector labels_;
};

struct SplitSpec {
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::uint64_t seed = 0;
};

struct Fold {
  IndexList train;
  IndexList validation;
};

Dataset parse_libsvm(std::string_view text);
Dataset load_libsvm(const std::string& path);
std::string write_libsvm(const Dataset& d);

/// Linearly separable points in the unit box; the line x1 = x2 separates the
/// classes with a perpendicular gap of at least `margin`.
Dataset gen_linear_2d(std::size_t n, double margin, std::uint64_t seed);

/// Points in [-1, 1]^2 split by the parabola x2 = 1.5 x1^2 - 0.5, the classes
/// kept at least `margin` apart vertically.
Dataset gen_parabolic_2d(std::size_t n, double margin, std::uint64_t seed);

/// Seeded disjoint (train, test) draw without replacement.
std::pair<IndexList, IndexList> split_indices(std::size_t n, const SplitSpec& s);
std::pair<Dataset, Dataset> split(const Dataset& d, const SplitSpec& s);

/// k folds whose validation sets partition 0..n-1; the first n % k folds
/// hold one extra sample.
std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace labelflip
