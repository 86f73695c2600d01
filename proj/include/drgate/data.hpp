#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace drgate {

/// Observed sample W = (Y, D, X, Z) with Z given as a subset of the columns of X.
///
/// Construction validates everything; a Dataset that exists is well formed:
/// equal lengths, N >= 4, binary treatment with both arms present, finite
/// values and distinct in-range moderator columns.
class Dataset {
 public:
  Dataset(Eigen::VectorXd y, Eigen::VectorXd d, Eigen::MatrixXd x, std::vector<std::size_t> z_cols,
          std::vector<std::string> x_names = {}, std::string y_name = "y", std::string d_name = "d");

  std::size_t n() const noexcept { return static_cast<std::size_t>(y_.size()); }
  std::size_t lambda_x() const noexcept { return static_cast<std::size_t>(x_.cols()); }
  std::size_t lambda_z() const noexcept { return z_cols_.size(); }
  std::size_t treated_count() const noexcept;

  const Eigen::VectorXd& y() const noexcept { return y_; }
  const Eigen::VectorXd& d() const noexcept { return d_; }
  const Eigen::MatrixXd& x() const noexcept { return x_; }
  const std::vector<std::size_t>& z_cols() const noexcept { return z_cols_; }
  /// N x lambda_Z moderator matrix.
  Eigen::MatrixXd z() const;

  const std::string& y_name() const noexcept { return y_name_; }
  const std::string& d_name() const noexcept { return d_name_; }
  const std::vector<std::string>& x_names() const noexcept { return x_names_; }
  std::vector<std::string> z_names() const;

  /// Number of leading X columns that were present before feature expansion.
  /// Learners that do their own feature construction (forests) use only these.
  std::size_t base_columns() const noexcept { return base_columns_; }

  std::size_t column_index(const std::string& name) const;

  Dataset with_moderators(std::vector<std::size_t> z_cols) const;
  Dataset with_outcome(Eigen::VectorXd y) const;

 private:
  friend Dataset expand_features(const Dataset&, int, bool, std::size_t);

  Eigen::VectorXd y_;
  Eigen::VectorXd d_;
  Eigen::MatrixXd x_;
  std::vector<std::size_t> z_cols_;
  std::vector<std::string> x_names_;
  std::string y_name_;
  std::string d_name_;
  std::size_t base_columns_ = 0;
};

struct ExpandOptions {
  int degree = 1;
  bool interactions = false;
};

/// Column-role configuration for CSV ingestion. `confounders == nullopt`
/// means "every remaining column".
struct ColumnRoles {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> moderators;
  std::optional<std::vector<std::string>> confounders;
  ExpandOptions expand;

  static ColumnRoles from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

Dataset load_csv(const std::string& path, const ColumnRoles& roles);
Dataset read_csv(std::istream& in, const ColumnRoles& roles);

/// Writes y, d and every X column with round-trip precision.
void write_csv(const Dataset& ds, const std::string& path);
void write_csv(const Dataset& ds, std::ostream& out);

inline constexpr std::size_t kDefaultMaxColumns = 20000;

/// Appends per-column powers 2..degree and, optionally, all pairwise products
/// of the original columns. Moderator indices keep pointing at the originals.
Dataset expand_features(const Dataset& ds, int degree, bool interactions,
                        std::size_t max_columns = kDefaultMaxColumns);

/// Fold labels 1..L for cross-fitting.
struct FoldPlan {
  std::vector<int> assignments;
  int folds = 0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return assignments.size(); }
  std::vector<std::size_t> rows_in(int fold) const;
  std::vector<std::size_t> rows_outside(int fold) const;
  std::vector<std::size_t> fold_sizes() const;
};

/// Uniform random permutation cut into L contiguous blocks whose sizes differ by at most one.
FoldPlan make_folds(std::size_t n, int folds, std::uint64_t seed);

/// Same balance guarantee, additionally spreading each treatment arm evenly over the folds.
FoldPlan make_stratified_folds(const Eigen::VectorXd& d, int folds, std::uint64_t seed);

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> rows);
Eigen::VectorXd select_rows(const Eigen::VectorXd& v, std::span<const std::size_t> rows);

}  // namespace drgate
