#include "drgate/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "drgate/error.hpp"
#include "drgate/rng.hpp"

namespace drgate {

namespace {

constexpr const char* kModule = "data";

[[noreturn]] void fail(ErrorKind kind, const std::string& msg, std::string hint = {}) {
  throw Error(kind, kModule, msg, std::move(hint));
}

std::vector<std::string> default_names(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < k; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

}  // namespace

Dataset::Dataset(Eigen::VectorXd y, Eigen::VectorXd d, Eigen::MatrixXd x, std::vector<std::size_t> z_cols,
                 std::vector<std::string> x_names, std::string y_name, std::string d_name)
    : y_(std::move(y)),
      d_(std::move(d)),
      x_(std::move(x)),
      z_cols_(std::move(z_cols)),
      x_names_(std::move(x_names)),
      y_name_(std::move(y_name)),
      d_name_(std::move(d_name)) {
  const auto n = y_.size();
  if (d_.size() != n || x_.rows() != n)
    fail(ErrorKind::Validation, "outcome, treatment and confounder lengths disagree");
  if (n < 4) fail(ErrorKind::Validation, "need at least 4 observations for two-fold cross-fitting");
  if (x_.cols() == 0) fail(ErrorKind::Validation, "confounder matrix has no columns");
  if (x_names_.empty()) x_names_ = default_names(static_cast<std::size_t>(x_.cols()));
  if (x_names_.size() != static_cast<std::size_t>(x_.cols()))
    fail(ErrorKind::Validation, "column name count does not match the confounder matrix");
  if (!y_.allFinite() || !x_.allFinite()) fail(ErrorKind::Validation, "non-finite value in outcome or confounders");
  std::size_t treated = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d_[i] != 0.0 && d_[i] != 1.0)
      fail(ErrorKind::Validation, "treatment value " + std::to_string(d_[i]) + " at row " + std::to_string(i + 1) +
                                      " is not 0 or 1");
    treated += d_[i] == 1.0;
  }
  if (treated == 0 || treated == static_cast<std::size_t>(n))
    fail(ErrorKind::Validation, "both treatment arms must be non-empty");
  if (z_cols_.empty()) fail(ErrorKind::Validation, "at least one moderator column is required");
  std::set<std::size_t> seen;
  for (auto c : z_cols_) {
    if (c >= static_cast<std::size_t>(x_.cols()))
      fail(ErrorKind::Validation, "moderator column index " + std::to_string(c) + " out of range");
    if (!seen.insert(c).second) fail(ErrorKind::Validation, "duplicate moderator column " + std::to_string(c));
  }
  base_columns_ = static_cast<std::size_t>(x_.cols());
}

std::size_t Dataset::treated_count() const noexcept {
  return static_cast<std::size_t>((d_.array() == 1.0).count());
}

Eigen::MatrixXd Dataset::z() const {
  Eigen::MatrixXd z(x_.rows(), static_cast<Eigen::Index>(z_cols_.size()));
  for (std::size_t k = 0; k < z_cols_.size(); ++k) z.col(static_cast<Eigen::Index>(k)) = x_.col(static_cast<Eigen::Index>(z_cols_[k]));
  return z;
}

std::vector<std::string> Dataset::z_names() const {
  std::vector<std::string> out;
  for (auto c : z_cols_) out.push_back(x_names_[c]);
  return out;
}

std::size_t Dataset::column_index(const std::string& name) const {
  auto it = std::find(x_names_.begin(), x_names_.end(), name);
  if (it == x_names_.end()) fail(ErrorKind::Configuration, "no confounder column named '" + name + "'");
  return static_cast<std::size_t>(it - x_names_.begin());
}

Dataset Dataset::with_moderators(std::vector<std::size_t> z_cols) const {
  Dataset out(y_, d_, x_, std::move(z_cols), x_names_, y_name_, d_name_);
  out.base_columns_ = base_columns_;
  return out;
}

Dataset Dataset::with_outcome(Eigen::VectorXd y) const {
  Dataset out(std::move(y), d_, x_, z_cols_, x_names_, y_name_, d_name_);
  out.base_columns_ = base_columns_;
  return out;
}

// ---------------------------------------------------------------------------
// Column roles

ColumnRoles ColumnRoles::from_json(const nlohmann::json& j) {
  ColumnRoles r;
  try {
    r.outcome = j.at("outcome").get<std::string>();
    r.treatment = j.at("treatment").get<std::string>();
    r.moderators = j.at("moderators").get<std::vector<std::string>>();
    if (j.contains("confounders")) {
      const auto& c = j.at("confounders");
      if (c.is_string()) {
        if (c.get<std::string>() != "rest")
          fail(ErrorKind::Configuration, "confounders must be an array of names or \"rest\"");
      } else {
        r.confounders = c.get<std::vector<std::string>>();
      }
    }
    if (j.contains("expand")) {
      const auto& e = j.at("expand");
      r.expand.degree = e.value("degree", 1);
      r.expand.interactions = e.value("interactions", false);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Configuration, std::string("bad column-role config: ") + e.what());
  }
  if (r.moderators.empty()) fail(ErrorKind::Configuration, "at least one moderator is required");
  return r;
}

nlohmann::json ColumnRoles::to_json() const {
  nlohmann::json j;
  j["outcome"] = outcome;
  j["treatment"] = treatment;
  j["moderators"] = moderators;
  if (confounders)
    j["confounders"] = *confounders;
  else
    j["confounders"] = "rest";
  j["expand"] = {{"degree", expand.degree}, {"interactions", expand.interactions}};
  return j;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

/// RFC-4180 record reader: quoted fields, doubled quotes, embedded newlines, CRLF.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      ++line;
      fields.push_back(std::move(field));
      return true;
    } else if (c == '\n') {
      ++line;
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) fail(ErrorKind::Parse, "unterminated quoted field near line " + std::to_string(line + 1));
  if (!any) return false;
  fields.push_back(std::move(field));
  ++line;
  return true;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan"; }

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct RawColumn {
  std::string name;
  std::vector<std::string> cells;
  std::vector<std::size_t> lines;
};

std::vector<double> numeric_column(const RawColumn& col) {
  std::vector<double> out(col.cells.size());
  for (std::size_t i = 0; i < col.cells.size(); ++i) {
    auto v = parse_number(col.cells[i]);
    if (!v)
      fail(ErrorKind::Parse, "non-numeric cell '" + col.cells[i] + "' in column '" + col.name + "' at line " +
                                 std::to_string(col.lines[i]));
    out[i] = *v;
  }
  return out;
}

bool looks_categorical(const RawColumn& col) {
  return std::none_of(col.cells.begin(), col.cells.end(), [](const std::string& s) { return parse_number(s).has_value(); });
}

}  // namespace

Dataset read_csv(std::istream& in, const ColumnRoles& roles) {
  std::size_t line = 0;
  std::vector<std::string> header;
  if (!read_record(in, header, line)) fail(ErrorKind::Parse, "empty CSV file (header row required)");
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0] = header[0].substr(3);
  for (auto& h : header) h = trim(h);
  {
    std::set<std::string> uniq(header.begin(), header.end());
    if (uniq.size() != header.size()) fail(ErrorKind::Parse, "duplicate column names in CSV header");
  }

  std::vector<RawColumn> cols(header.size());
  for (std::size_t j = 0; j < header.size(); ++j) cols[j].name = header[j];
  std::vector<std::string> rec;
  while (read_record(in, rec, line)) {
    if (rec.size() == 1 && trim(rec[0]).empty()) continue;
    if (rec.size() != header.size())
      fail(ErrorKind::Parse, "line " + std::to_string(line) + " has " + std::to_string(rec.size()) +
                                 " fields, header has " + std::to_string(header.size()));
    for (std::size_t j = 0; j < rec.size(); ++j) {
      auto cell = trim(rec[j]);
      if (is_missing(cell))
        fail(ErrorKind::Validation,
             "missing value in column '" + header[j] + "' at line " + std::to_string(line),
             "rows with missing values are not supported; remove or complete them");
      cols[j].cells.push_back(std::move(cell));
      cols[j].lines.push_back(line);
    }
  }
  const std::size_t n = cols.empty() ? 0 : cols[0].cells.size();

  auto find_col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      fail(ErrorKind::Configuration, "column '" + name + "' not found in CSV header",
           "check the column-role configuration");
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t yc = find_col(roles.outcome);
  const std::size_t dc = find_col(roles.treatment);
  std::vector<std::size_t> zc;
  for (const auto& m : roles.moderators) zc.push_back(find_col(m));

  std::vector<std::size_t> xc;
  if (roles.confounders) {
    for (const auto& c : *roles.confounders) xc.push_back(find_col(c));
  } else {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (j != yc && j != dc) xc.push_back(j);
  }
  // Moderators must be part of X.
  for (auto z : zc)
    if (std::find(xc.begin(), xc.end(), z) == xc.end()) xc.push_back(z);
  for (auto j : xc)
    if (j == yc || j == dc)
      fail(ErrorKind::Configuration, "column '" + header[j] + "' cannot be both a confounder and outcome/treatment");

  auto y_raw = numeric_column(cols[yc]);
  auto d_raw = numeric_column(cols[dc]);
  for (std::size_t i = 0; i < n; ++i)
    if (d_raw[i] != 0.0 && d_raw[i] != 1.0)
      fail(ErrorKind::Validation, "treatment column '" + roles.treatment + "' has value " + cols[dc].cells[i] +
                                      " at line " + std::to_string(cols[dc].lines[i]) + "; expected 0 or 1");

  std::vector<std::vector<double>> x_cols;
  std::vector<std::string> x_names;
  std::vector<std::size_t> z_idx(zc.size());
  for (auto j : xc) {
    const auto& col = cols[j];
    const bool is_z = std::find(zc.begin(), zc.end(), j) != zc.end();
    if (n > 0 && looks_categorical(col)) {
      if (is_z) fail(ErrorKind::Parse, "moderator column '" + col.name + "' must be numeric");
      std::set<std::string> levels(col.cells.begin(), col.cells.end());
      auto it = levels.begin();
      ++it;  // first category is the reference level
      for (; it != levels.end(); ++it) {
        std::vector<double> dummy(n);
        for (std::size_t i = 0; i < n; ++i) dummy[i] = col.cells[i] == *it ? 1.0 : 0.0;
        x_cols.push_back(std::move(dummy));
        x_names.push_back(col.name + "=" + *it);
      }
      continue;
    }
    for (std::size_t k = 0; k < zc.size(); ++k)
      if (zc[k] == j) z_idx[k] = x_cols.size();
    x_cols.push_back(numeric_column(col));
    x_names.push_back(col.name);
  }

  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(y_raw.data(), static_cast<Eigen::Index>(n));
  Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(d_raw.data(), static_cast<Eigen::Index>(n));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(x_cols.size()));
  for (std::size_t j = 0; j < x_cols.size(); ++j)
    x.col(static_cast<Eigen::Index>(j)) = Eigen::Map<Eigen::VectorXd>(x_cols[j].data(), static_cast<Eigen::Index>(n));

  Dataset ds(std::move(y), std::move(d), std::move(x), std::move(z_idx), std::move(x_names), roles.outcome,
             roles.treatment);
  if (roles.expand.degree > 1 || roles.expand.interactions)
    return expand_features(ds, roles.expand.degree, roles.expand.interactions);
  return ds;
}

Dataset load_csv(const std::string& path, const ColumnRoles& roles) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Configuration, "cannot open data file '" + path + "'");
  return read_csv(in, roles);
}

namespace {
std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}
}  // namespace

void write_csv(const Dataset& ds, std::ostream& out) {
  out << quote_if_needed(ds.y_name()) << ',' << quote_if_needed(ds.d_name());
  for (const auto& name : ds.x_names()) out << ',' << quote_if_needed(name);
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << ds.y()[r] << ',' << ds.d()[r];
    for (Eigen::Index j = 0; j < ds.x().cols(); ++j) out << ',' << ds.x()(r, j);
    out << '\n';
  }
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Resource, "cannot write '" + path + "'");
  write_csv(ds, out);
}

// ---------------------------------------------------------------------------
// Feature expansion

Dataset expand_features(const Dataset& ds, int degree, bool interactions, std::size_t max_columns) {
  if (degree < 1) fail(ErrorKind::Validation, "expansion degree must be >= 1");
  const std::size_t base = ds.base_columns();
  const auto n = static_cast<Eigen::Index>(ds.n());
  const std::size_t extra_powers = base * static_cast<std::size_t>(degree - 1);
  const std::size_t extra_inter = interactions ? base * (base - 1) / 2 : 0;
  const std::size_t total = static_cast<std::size_t>(ds.lambda_x()) + extra_powers + extra_inter;
  if (total > max_columns)
    fail(ErrorKind::Resource,
         "feature expansion would create " + std::to_string(total) + " columns (cap " + std::to_string(max_columns) + ")",
         "lower the degree or disable interactions");

  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(total));
  x.leftCols(ds.x().cols()) = ds.x();
  std::vector<std::string> names = ds.x_names();
  std::unordered_set<std::string> taken(names.begin(), names.end());
  auto unique_name = [&](std::string s) {
    std::string candidate = s;
    for (int k = 2; taken.count(candidate); ++k) candidate = s + "#" + std::to_string(k);
    taken.insert(candidate);
    return candidate;
  };

  Eigen::Index col = ds.x().cols();
  for (std::size_t j = 0; j < base; ++j) {
    const auto src = ds.x().col(static_cast<Eigen::Index>(j));
    for (int p = 2; p <= degree; ++p) {
      x.col(col++) = src.array().pow(p).matrix();
      names.push_back(unique_name(ds.x_names()[j] + "^" + std::to_string(p)));
    }
  }
  if (interactions) {
    for (std::size_t a = 0; a < base; ++a)
      for (std::size_t b = a + 1; b < base; ++b) {
        x.col(col++) = ds.x().col(static_cast<Eigen::Index>(a)).cwiseProduct(ds.x().col(static_cast<Eigen::Index>(b)));
        names.push_back(unique_name(ds.x_names()[a] + "*" + ds.x_names()[b]));
      }
  }
  if (!x.allFinite()) fail(ErrorKind::Numerical, "feature expansion overflowed to non-finite values");

  Dataset out(ds.y(), ds.d(), std::move(x), ds.z_cols(), std::move(names), ds.y_name(), ds.d_name());
  out.base_columns_ = base;
  return out;
}

// ---------------------------------------------------------------------------
// Folds

std::vector<std::size_t> FoldPlan::rows_in(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) rows.push_back(i);
  return rows;
}

std::vector<std::size_t> FoldPlan::rows_outside(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) rows.push_back(i);
  return rows;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(folds), 0);
  for (int a : assignments) ++sizes[static_cast<std::size_t>(a - 1)];
  return sizes;
}

FoldPlan make_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) fail(ErrorKind::Validation, "fold count must be at least 2");
  if (static_cast<std::size_t>(folds) > n)
    fail(ErrorKind::Validation, "fold count " + std::to_string(folds) + " exceeds sample size " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = make_rng(seed, {kStreamFolds});
  std::shuffle(perm.begin(), perm.end(), rng);

  FoldPlan plan{std::vector<int>(n), folds, seed};
  const std::size_t L = static_cast<std::size_t>(folds);
  const std::size_t base = n / L;
  const std::size_t extra = n % L;
  std::size_t pos = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t len = base + (l < extra ? 1 : 0);
    for (std::size_t k = 0; k < len; ++k) plan.assignments[perm[pos++]] = static_cast<int>(l + 1);
  }
  return plan;
}

FoldPlan make_stratified_folds(const Eigen::VectorXd& d, int folds, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(d.size());
  if (folds < 2) fail(ErrorKind::Validation, "fold count must be at least 2");
  if (static_cast<std::size_t>(folds) > n)
    fail(ErrorKind::Validation, "fold count " + std::to_string(folds) + " exceeds sample size " + std::to_string(n));
  std::vector<std::size_t> control, treated;
  for (std::size_t i = 0; i < n; ++i) (d[static_cast<Eigen::Index>(i)] == 1.0 ? treated : control).push_back(i);
  auto rng = make_rng(seed, {kStreamFolds});
  std::shuffle(control.begin(), control.end(), rng);
  std::shuffle(treated.begin(), treated.end(), rng);

  // Dealing the concatenated arms round-robin keeps the overall sizes and the
  // per-arm sizes within one of each other.
  FoldPlan plan{std::vector<int>(n), folds, seed};
  std::size_t pos = 0;
  for (const auto* arm : {&control, &treated})
    for (auto i : *arm) plan.assignments[i] = static_cast<int>(pos++ % static_cast<std::size_t>(folds)) + 1;
  return plan;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::VectorXd select_rows(const Eigen::VectorXd& v, std::span<const std::size_t> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
  return out;
}

}  // namespace drgate
