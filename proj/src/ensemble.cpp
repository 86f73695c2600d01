#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "coordinate_descent.hpp"
#include "drgate/error.hpp"
#include "drgate/learners.hpp"
#include "drgate/rng.hpp"

namespace drgate::learn {

namespace {

constexpr const char* kModule = "learners";
constexpr int kDefaultCvFolds = 5;
constexpr std::size_t kMaxEnsembleMembers = 12;

FoldPlan default_cv_folds(Eigen::Index n, std::uint64_t seed) {
  const int k = static_cast<int>(std::min<Eigen::Index>(kDefaultCvFolds, n));
  return make_folds(static_cast<std::size_t>(n), std::max(2, k), derive_seed(seed, {kStreamCv}));
}

}  // namespace

// ---------------------------------------------------------------------------
// Kinds

const char* to_string(LearnerKind kind) noexcept {
  switch (kind) {
    case LearnerKind::Mean: return "mean";
    case LearnerKind::Ols: return "ols";
    case LearnerKind::Ridge: return "ridge";
    case LearnerKind::Lasso: return "lasso";
    case LearnerKind::ElasticNet: return "elastic_net";
    case LearnerKind::Forest: return "forest";
    case LearnerKind::Logit: return "logit";
    case LearnerKind::LogitRidge: return "logit_ridge";
    case LearnerKind::LogitLasso: return "logit_lasso";
    case LearnerKind::LogitElasticNet: return "logit_elastic_net";
    case LearnerKind::ProbabilityForest: return "probability_forest";
  }
  return "?";
}

LearnerKind learner_kind_from_string(const std::string& s) {
  for (auto k : {LearnerKind::Mean, LearnerKind::Ols, LearnerKind::Ridge, LearnerKind::Lasso, LearnerKind::ElasticNet,
                 LearnerKind::Forest, LearnerKind::Logit, LearnerKind::LogitRidge, LearnerKind::LogitLasso,
                 LearnerKind::LogitElasticNet, LearnerKind::ProbabilityForest})
    if (s == to_string(k)) return k;
  throw Error(ErrorKind::Configuration, kModule, "unknown learner kind '" + s + "'");
}

bool is_penalized(LearnerKind kind) noexcept {
  switch (kind) {
    case LearnerKind::Ridge:
    case LearnerKind::Lasso:
    case LearnerKind::ElasticNet:
    case LearnerKind::LogitRidge:
    case LearnerKind::LogitLasso:
    case LearnerKind::LogitElasticNet: return true;
    default: return false;
  }
}

bool is_logistic(LearnerKind kind) noexcept {
  return kind == LearnerKind::Logit || kind == LearnerKind::LogitRidge || kind == LearnerKind::LogitLasso ||
         kind == LearnerKind::LogitElasticNet;
}

namespace {
double kind_mixing(LearnerKind kind, double alpha) {
  switch (kind) {
    case LearnerKind::Ridge:
    case LearnerKind::LogitRidge: return 0.0;
    case LearnerKind::Lasso:
    case LearnerKind::LogitLasso: return 1.0;
    default: return alpha;
  }
}
}  // namespace

double LearnerSpec::mixing() const noexcept { return kind_mixing(kind, alpha); }

std::string LearnerSpec::name() const {
  std::string n = to_string(kind);
  if (kind == LearnerKind::ElasticNet || kind == LearnerKind::LogitElasticNet) {
    std::ostringstream os;
    os << n << "(" << alpha << ")";
    n = os.str();
  }
  if (base_features_only) n += "[base]";
  return n;
}

LearnerSpec LearnerSpec::from_json(const nlohmann::json& j) {
  LearnerSpec s;
  try {
    if (j.is_string()) {
      s.kind = learner_kind_from_string(j.get<std::string>());
    } else {
      s.kind = learner_kind_from_string(j.at("kind").get<std::string>());
      s.alpha = j.value("alpha", s.alpha);
      s.grid_size = j.value("grid_size", s.grid_size);
      s.grid_ratio = j.value("grid_ratio", s.grid_ratio);
      if (j.contains("lambda_grid")) s.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
      s.forest.n_trees = j.value("n_trees", s.forest.n_trees);
      s.forest.mtry = j.value("mtry", s.forest.mtry);
      s.forest.min_leaf = j.value("min_leaf", 0);
      s.forest.max_depth = j.value("max_depth", s.forest.max_depth);
      s.forest.bootstrap = j.value("bootstrap", s.forest.bootstrap);
      if (j.contains("features")) {
        const auto f = j.at("features").get<std::string>();
        if (f != "base" && f != "expanded")
          throw Error(ErrorKind::Configuration, kModule, "learner features must be \"base\" or \"expanded\"");
        s.base_features_only = f == "base";
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Configuration, kModule, std::string("bad learner spec: ") + e.what());
  }
  if (!(s.alpha >= 0.0 && s.alpha <= 1.0)) throw Error(ErrorKind::Configuration, kModule, "alpha must lie in [0,1]");
  if (s.grid_size < 1) throw Error(ErrorKind::Configuration, kModule, "grid_size must be positive");
  if (!(s.grid_ratio > 0.0 && s.grid_ratio < 1.0)) throw Error(ErrorKind::Configuration, kModule, "grid_ratio must lie in (0,1)");
  return s;
}

nlohmann::json LearnerSpec::to_json() const {
  nlohmann::json j{{"kind", to_string(kind)}};
  if (kind == LearnerKind::ElasticNet || kind == LearnerKind::LogitElasticNet) j["alpha"] = alpha;
  if (is_penalized(kind)) {
    j["grid_size"] = grid_size;
    j["grid_ratio"] = grid_ratio;
    if (!lambda_grid.empty()) j["lambda_grid"] = lambda_grid;
  }
  if (kind == LearnerKind::Forest || kind == LearnerKind::ProbabilityForest) {
    j["n_trees"] = forest.n_trees;
    j["mtry"] = forest.mtry;
    j["min_leaf"] = forest.min_leaf;
    j["max_depth"] = forest.max_depth;
    j["bootstrap"] = forest.bootstrap;
  }
  j["features"] = base_features_only ? "base" : "expanded";
  return j;
}

// ---------------------------------------------------------------------------
// Penalty grids and selection

double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double alpha) {
  const auto s = Standardization::fit(x);
  const Eigen::MatrixXd g = s.apply(x);
  const Eigen::VectorXd tc = t.array() - t.mean();
  const double n = static_cast<double>(x.rows());
  const double m = g.cols() > 0 ? (g.transpose() * tc).cwiseAbs().maxCoeff() / n : 0.0;
  return m / std::max(alpha, 1e-3);
}

std::vector<double> default_lambda_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double alpha, int points,
                                        double ratio) {
  double top = lambda_max(x, t, alpha);
  if (!(top > 0.0)) top = 1e-6;
  std::vector<double> grid(static_cast<std::size_t>(points));
  if (points == 1) {
    grid[0] = top;
    return grid;
  }
  const double log_top = std::log(top);
  const double log_bottom = std::log(top * ratio);
  for (int k = 0; k < points; ++k)
    grid[static_cast<std::size_t>(k)] = std::exp(log_top + (log_bottom - log_top) * k / (points - 1));
  return grid;
}

PenaltyChoice select_penalty(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, LearnerKind kind,
                             std::vector<double> grid, const FoldPlan& folds, double alpha) {
  if (!is_penalized(kind)) throw Error(ErrorKind::Validation, kModule, "select_penalty needs a penalized learner kind");
  if (grid.empty()) throw Error(ErrorKind::Validation, kModule, "penalty grid is empty");
  if (folds.folds < 2) throw Error(ErrorKind::Validation, kModule, "need at least two CV folds");
  if (folds.size() != static_cast<std::size_t>(x.rows()))
    throw Error(ErrorKind::Validation, kModule, "CV fold plan does not match the training rows");
  std::sort(grid.begin(), grid.end(), std::greater<>());
  const double mix = kind_mixing(kind, alpha);
  const bool logistic = is_logistic(kind);

  const std::size_t G = grid.size();
  Eigen::MatrixXd oof(x.rows(), static_cast<Eigen::Index>(G));
  std::vector<char> failed(G, 0);
  for (int l = 1; l <= folds.folds; ++l) {
    const auto train = folds.rows_outside(l);
    const auto test = folds.rows_in(l);
    if (test.empty()) continue;
    const Eigen::MatrixXd xt = select_rows(x, train);
    const Eigen::VectorXd tt = select_rows(t, train);
    const auto s = Standardization::fit(xt);
    const Eigen::MatrixXd g = s.apply(xt);
    const Eigen::MatrixXd gv = s.apply(select_rows(x, test));
    std::vector<detail::PathPoint> path;
    if (logistic) {
      const double ybar = tt.mean();
      if (ybar <= 0.0 || ybar >= 1.0) {
        // A fold complement with one class: every lambda predicts the class.
        for (std::size_t k = 0; k < G; ++k) path.push_back({std::log(std::max(1e-12, ybar) / std::max(1e-12, 1.0 - ybar)),
                                                            Eigen::VectorXd::Zero(x.cols()), true});
      } else {
        path = detail::logit_path(g, tt, s.constant, grid, mix, {}, {});
      }
    } else if (mix == 0.0) {
      std::vector<double> ridge_lambdas(G);
      for (std::size_t k = 0; k < G; ++k) ridge_lambdas[k] = grid[k] * static_cast<double>(xt.rows());
      path = detail::ridge_path(g, tt, s.constant, ridge_lambdas);
    } else {
      path = detail::elastic_net_path(g, tt, s.constant, grid, mix, {});
    }
    for (std::size_t k = 0; k < G; ++k) {
      if (!path[k].converged) failed[k] = 1;
      Eigen::VectorXd pred = (gv * path[k].beta).array() + path[k].intercept;
      if (logistic) pred = pred.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-std::clamp(e, -35.0, 35.0))); });
      for (std::size_t i = 0; i < test.size(); ++i) oof(static_cast<Eigen::Index>(test[i]), static_cast<Eigen::Index>(k)) = pred[static_cast<Eigen::Index>(i)];
    }
  }

  PenaltyChoice choice;
  choice.grid = grid;
  choice.cv_mse.resize(G);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < G; ++k) {
    const double mse = failed[k] ? std::numeric_limits<double>::infinity()
                                 : (t - oof.col(static_cast<Eigen::Index>(k))).squaredNorm() / static_cast<double>(t.size());
    choice.cv_mse[k] = mse;
    if (mse < best) {  // strict: ties keep the larger lambda seen first
      best = mse;
      choice.index = k;
    }
  }
  if (!std::isfinite(best))
    throw Error(ErrorKind::Convergence, kModule, std::string("no penalty on the grid converged for ") + to_string(kind));
  choice.penalty = Penalty{grid[choice.index], mix};
  choice.oof_at_choice = oof.col(static_cast<Eigen::Index>(choice.index));
  return choice;
}

PenaltyChoice select_penalty(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, LearnerKind kind,
                             std::vector<double> grid, int k, std::uint64_t seed, double alpha) {
  if (k < 2) throw Error(ErrorKind::Validation, kModule, "need at least two CV folds");
  const auto folds = make_folds(static_cast<std::size_t>(x.rows()), k, derive_seed(seed, {kStreamCv}));
  return select_penalty(x, t, kind, std::move(grid), folds, alpha);
}

// ---------------------------------------------------------------------------
// Learners

CrossFitted Learner::cross_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const FoldPlan& folds,
                               std::uint64_t seed) const {
  CrossFitted out;
  out.oof.resize(x.rows());
  for (int l = 1; l <= folds.folds; ++l) {
    const auto train = folds.rows_outside(l);
    const auto test = folds.rows_in(l);
    if (test.empty()) continue;
    auto model = fit(select_rows(x, train), select_rows(t, train), derive_seed(seed, {kStreamCv, static_cast<std::uint64_t>(l)}));
    const Eigen::VectorXd pred = model->predict(select_rows(x, test));
    for (std::size_t i = 0; i < test.size(); ++i) out.oof[static_cast<Eigen::Index>(test[i])] = pred[static_cast<Eigen::Index>(i)];
  }
  out.full = fit(x, t, seed);
  return out;
}

namespace {

class MeanLearner final : public Learner {
 public:
  std::string name() const override { return "mean"; }
  ModelPtr fit(const Eigen::MatrixXd&, const Eigen::VectorXd& t, std::uint64_t) const override {
    return std::make_shared<ConstantModel>(t.mean());
  }
};

class OlsLearner final : public Learner {
 public:
  std::string name() const override { return "ols"; }
  ModelPtr fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, std::uint64_t) const override {
    return std::make_shared<LinearModel>(fit_ols(x, t));
  }
};

class LogitLearner final : public Learner {
 public:
  std::string name() const override { return "logit"; }
  ModelPtr fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, std::uint64_t) const override {
    return std::make_shared<LogitModel>(fit_logit(x, t));
  }
};

ModelPtr fit_penalized(LearnerKind kind, const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const Penalty& pen) {
  if (is_logistic(kind)) return std::make_shared<LogitModel>(fit_penalized_logit(x, t, pen.lambda, pen.alpha));
  if (pen.alpha == 0.0)
    return std::make_shared<LinearModel>(fit_ridge(x, t, pen.lambda * static_cast<double>(x.rows())));
  return std::make_shared<LinearModel>(fit_elastic_net(x, t, pen.lambda, pen.alpha));
}

/// Penalized linear or logistic learner with lambda chosen by cross-validation.
class PenalizedLearner final : public Learner {
 public:
  explicit PenalizedLearner(LearnerSpec spec) : spec_(std::move(spec)) {}
  std::string name() const override { return spec_.name(); }

  ModelPtr fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, std::uint64_t seed) const override {
    const auto folds = default_cv_folds(x.rows(), seed);
    return cross_fit(x, t, folds, seed).full;
  }

  /// Out-of-fold predictions come from the same CV path that picks lambda
  /// (prevalidation), so no nested cross-validation is needed.
  CrossFitted cross_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const FoldPlan& folds,
                        std::uint64_t) const override {
    auto grid = spec_.lambda_grid.empty()
                    ? default_lambda_grid(x, t, spec_.mixing(), spec_.grid_size, spec_.grid_ratio)
                    : spec_.lambda_grid;
    auto choice = select_penalty(x, t, spec_.kind, std::move(grid), folds, spec_.alpha);
    return {std::move(choice.oof_at_choice), fit_penalized(spec_.kind, x, t, choice.penalty)};
  }

 private:
  LearnerSpec spec_;
};

class ForestLearner final : public Learner {
 public:
  explicit ForestLearner(LearnerSpec spec) : spec_(std::move(spec)) {}
  std::string name() const override { return spec_.name(); }

  ModelPtr fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, std::uint64_t seed) const override {
    return std::make_shared<ForestModel>(fit_forest(x, t, params_for(x.rows(), seed)));
  }

  /// Bagged trees give out-of-bag predictions for free; rows that landed in
  /// every bootstrap sample fall back to the training mean.
  CrossFitted cross_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const FoldPlan& folds,
                        std::uint64_t seed) const override {
    if (!spec_.forest.bootstrap) return Learner::cross_fit(x, t, folds, seed);
    auto model = std::make_shared<ForestModel>(fit_forest(x, t, params_for(x.rows(), seed)));
    Eigen::VectorXd oof = model->oob_predictions();
    const double fallback = t.mean();
    for (Eigen::Index i = 0; i < oof.size(); ++i)
      if (std::isnan(oof[i])) oof[i] = fallback;
    return {std::move(oof), std::move(model)};
  }

 private:
  ForestParams params_for(Eigen::Index rows, std::uint64_t seed) const {
    ForestParams p = spec_.forest;
    if (p.min_leaf <= 0) p.min_leaf = spec_.kind == LearnerKind::ProbabilityForest ? 1 : 5;
    p.min_leaf = std::max(1, std::min(p.min_leaf, static_cast<int>(rows / 2)));
    p.seed = derive_seed(seed, {kStreamForest});
    return p;
  }

  LearnerSpec spec_;
};

class ColumnSubsetModel final : public Model {
 public:
  ColumnSubsetModel(ModelPtr inner, Eigen::Index cols) : inner_(std::move(inner)), cols_(cols) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override { return inner_->predict(x.leftCols(cols_)); }

 private:
  ModelPtr inner_;
  Eigen::Index cols_;
};

class ColumnSubsetLearner final : public Learner {
 public:
  ColumnSubsetLearner(LearnerPtr inner, Eigen::Index cols) : inner_(std::move(inner)), cols_(cols) {}
  std::string name() const override { return inner_->name() + "[base]"; }
  ModelPtr fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, std::uint64_t seed) const override {
    return std::make_shared<ColumnSubsetModel>(inner_->fit(x.leftCols(cols_), t, seed), cols_);
  }
  CrossFitted cross_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const FoldPlan& folds,
                        std::uint64_t seed) const override {
    auto cf = inner_->cross_fit(x.leftCols(cols_), t, folds, seed);
    return {std::move(cf.oof), std::make_shared<ColumnSubsetModel>(std::move(cf.full), cols_)};
  }

 private:
  LearnerPtr inner_;
  Eigen::Index cols_;
};

}  // namespace

LearnerPtr make_learner(const LearnerSpec& spec, std::size_t base_columns) {
  LearnerPtr inner;
  switch (spec.kind) {
    case LearnerKind::Mean: inner = std::make_shared<MeanLearner>(); break;
    case LearnerKind::Ols: inner = std::make_shared<OlsLearner>(); break;
    case LearnerKind::Logit: inner = std::make_shared<LogitLearner>(); break;
    case LearnerKind::Forest:
    case LearnerKind::ProbabilityForest: inner = std::make_shared<ForestLearner>(spec); break;
    default: inner = std::make_shared<PenalizedLearner>(spec); break;
  }
  if (spec.base_features_only && base_columns > 0)
    return std::make_shared<ColumnSubsetLearner>(std::move(inner), static_cast<Eigen::Index>(base_columns));
  return inner;
}

// ---------------------------------------------------------------------------
// Stacking

Eigen::VectorXd EnsembleModel::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (std::size_t m = 0; m < members_.size(); ++m) {
    const double w = weights_[static_cast<Eigen::Index>(m)];
    if (w == 0.0 || !members_[m]) continue;
    out += w * members_[m]->predict(x);
  }
  return out;
}

Eigen::VectorXd simplex_least_squares(const Eigen::MatrixXd& p, const Eigen::VectorXd& t) {
  const Eigen::Index m = p.cols();
  if (m == 0) throw Error(ErrorKind::Validation, kModule, "no ensemble members to weight");
  if (static_cast<std::size_t>(m) > kMaxEnsembleMembers)
    throw Error(ErrorKind::Resource, kModule, "at most " + std::to_string(kMaxEnsembleMembers) + " ensemble members");
  const double n = static_cast<double>(p.rows());
  const Eigen::MatrixXd q = p.transpose() * p / n;
  const Eigen::VectorXd b = p.transpose() * t / n;

  // The simplex optimum is the equality-constrained optimum on its support, so
  // enumerating supports and keeping feasible candidates is exact.
  Eigen::VectorXd best_w = Eigen::VectorXd::Zero(m);
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    std::vector<Eigen::Index> s;
    for (Eigen::Index j = 0; j < m; ++j)
      if (mask & (1u << j)) s.push_back(j);
    const auto k = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    Eigen::VectorXd rhs(k + 1);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index c = 0; c < k; ++c) kkt(a, c) = q(s[static_cast<std::size_t>(a)], s[static_cast<std::size_t>(c)]);
      kkt(a, k) = 1.0;
      kkt(k, a) = 1.0;
      rhs[a] = b[s[static_cast<std::size_t>(a)]];
    }
    rhs[k] = 1.0;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    bool feasible = true;
    for (Eigen::Index a = 0; a < k; ++a) {
      double v = sol[a];
      if (!std::isfinite(v) || v < -1e-10) {
        feasible = false;
        break;
      }
      w[s[static_cast<std::size_t>(a)]] = std::max(0.0, v);
    }
    if (!feasible || !(w.sum() > 0.0)) continue;
    w /= w.sum();
    const double obj = (t - p * w).squaredNorm();
    if (obj < best) {
      best = obj;
      best_w = w;
    }
  }
  return best_w;
}

EnsembleModel fit_ensemble(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const std::vector<LearnerPtr>& members,
                           int k, std::uint64_t seed) {
  if (members.empty()) throw Error(ErrorKind::Validation, kModule, "ensemble needs at least one member");
  if (k < 2) throw Error(ErrorKind::Validation, kModule, "ensemble needs at least two CV folds");
  const auto n = x.rows();
  const int folds_k = static_cast<int>(std::min<Eigen::Index>(k, n));
  const auto folds = make_folds(static_cast<std::size_t>(n), folds_k, derive_seed(seed, {kStreamCv}));

  const std::size_t m = members.size();
  std::vector<std::optional<CrossFitted>> fitted(m);
  std::vector<std::string> errors;
  for (std::size_t j = 0; j < m; ++j) {
    try {
      fitted[j] = members[j]->cross_fit(x, t, folds, derive_seed(seed, {kStreamMember, j}));
    } catch (const Error& e) {
      errors.push_back(members[j]->name() + ": " + e.what());
    }
  }
  std::vector<std::size_t> ok;
  for (std::size_t j = 0; j < m; ++j)
    if (fitted[j]) ok.push_back(j);
  if (ok.empty()) {
    std::string msg = "every ensemble member failed";
    for (const auto& e : errors) msg += "; " + e;
    throw Error(ErrorKind::Aggregate, kModule, msg);
  }

  Eigen::MatrixXd oof(n, static_cast<Eigen::Index>(ok.size()));
  for (std::size_t c = 0; c < ok.size(); ++c) oof.col(static_cast<Eigen::Index>(c)) = fitted[ok[c]]->oof;
  const Eigen::VectorXd w_ok = simplex_least_squares(oof, t);

  std::vector<ModelPtr> models(m);
  std::vector<std::string> names(m);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  Eigen::VectorXd member_mse = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < m; ++j) names[j] = members[j]->name();
  for (std::size_t c = 0; c < ok.size(); ++c) {
    const auto j = ok[c];
    models[j] = fitted[j]->full;
    weights[static_cast<Eigen::Index>(j)] = w_ok[static_cast<Eigen::Index>(c)];
    member_mse[static_cast<Eigen::Index>(j)] = (t - fitted[j]->oof).squaredNorm() / static_cast<double>(n);
  }
  const double ens_mse = (t - oof * w_ok).squaredNorm() / static_cast<double>(n);
  return EnsembleModel(std::move(models), std::move(names), std::move(weights), std::move(member_mse), ens_mse);
}

EnsembleModel fit_ensemble(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const std::vector<LearnerSpec>& members,
                           int k, std::uint64_t seed) {
  std::vector<LearnerPtr> learners;
  for (const auto& s : members) learners.push_back(make_learner(s));
  return fit_ensemble(x, t, learners, k, seed);
}

}  // namespace drgate::learn
