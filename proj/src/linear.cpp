#include <algorithm>
#include <cmath>

#include "coordinate_descent.hpp"
#include "drgate/error.hpp"
#include "drgate/learners.hpp"

namespace drgate::learn {

namespace {
constexpr const char* kModule = "learners";
}

// ---------------------------------------------------------------------------
// Standardization

Standardization Standardization::fit(const Eigen::MatrixXd& x) {
  Standardization s;
  const auto p = x.cols();
  const double n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean().transpose();
  s.scale = Eigen::VectorXd::Ones(p);
  s.constant.assign(static_cast<std::size_t>(p), false);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var = (x.col(j).array() - s.mean[j]).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])))) {
      s.constant[static_cast<std::size_t>(j)] = true;
    } else {
      s.scale[j] = sd;
    }
  }
  return s;
}

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd g = (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  for (std::size_t j = 0; j < constant.size(); ++j)
    if (constant[j]) g.col(static_cast<Eigen::Index>(j)).setZero();
  return g;
}

// ---------------------------------------------------------------------------
// Models

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& x) const {
  return (std_.apply(x) * coefficients_).array() + intercept_;
}

Eigen::VectorXd LinearModel::raw_coefficients() const { return coefficients_.cwiseQuotient(std_.scale); }

double LinearModel::raw_intercept() const { return intercept_ - raw_coefficients().dot(std_.mean); }

namespace {
double sigmoid(double eta) noexcept {
  eta = std::clamp(eta, -35.0, 35.0);
  return 1.0 / (1.0 + std::exp(-eta));
}
}  // namespace

Eigen::VectorXd LogitModel::linear_predictor(const Eigen::MatrixXd& x) const {
  return (std_.apply(x) * coefficients_).array() + intercept_;
}

Eigen::VectorXd LogitModel::predict(const Eigen::MatrixXd& x) const {
  return linear_predictor(x).unaryExpr([](double e) { return sigmoid(e); });
}

Eigen::VectorXd LogitModel::raw_coefficients() const { return coefficients_.cwiseQuotient(std_.scale); }

double LogitModel::raw_intercept() const { return intercept_ - raw_coefficients().dot(std_.mean); }

// ---------------------------------------------------------------------------
// Coordinate descent

namespace detail {

CoordinateDescent::CoordinateDescent(const Eigen::MatrixXd& g, const Eigen::VectorXd& z, Eigen::VectorXd weights,
                                     std::vector<bool> skip, bool fit_intercept)
    : g_(g), skip_(std::move(skip)), fit_intercept_(fit_intercept), beta_(Eigen::VectorXd::Zero(g.cols())) {
  reset_response(z, std::move(weights));
}

void CoordinateDescent::reset_response(const Eigen::VectorXd& z, Eigen::VectorXd weights) {
  z_ = z;
  weighted_ = weights.size() > 0;
  const double n = static_cast<double>(g_.rows());
  if (weighted_) {
    w_ = std::move(weights);
    wg_ = g_.array().colwise() * w_.array();
    col_scale_ = (wg_.array() * g_.array()).colwise().sum().transpose() / n;
    wsum_ = w_.sum();
  } else {
    w_.resize(0);
    wg_.resize(0, 0);
    col_scale_ = g_.array().square().colwise().sum().transpose() / n;
    wsum_ = n;
  }
  if (fit_intercept_ && b0_ == 0.0 && beta_.isZero()) {
    b0_ = weighted_ ? w_.dot(z_) / wsum_ : z_.mean();
  }
  refresh_residual();
}

void CoordinateDescent::refresh_residual() {
  r_ = z_ - g_ * beta_;
  r_.array() -= b0_;
}

double CoordinateDescent::update_coordinate(Eigen::Index j, double lambda, double alpha) {
  const double n = static_cast<double>(g_.rows());
  const double a = col_scale_[j];
  const double denom = a + lambda * (1.0 - alpha);
  if (denom <= 0.0) return 0.0;
  const double grad = (weighted_ ? wg_.col(j).dot(r_) : g_.col(j).dot(r_)) / n;
  const double old = beta_[j];
  const double updated = soft_threshold(grad + a * old, lambda * alpha) / denom;
  const double delta = updated - old;
  if (delta != 0.0) {
    beta_[j] = updated;
    r_.noalias() -= delta * g_.col(j);
  }
  return std::abs(delta);
}

double CoordinateDescent::update_intercept() {
  if (!fit_intercept_) return 0.0;
  const double delta = (weighted_ ? w_.dot(r_) : r_.sum()) / wsum_;
  if (delta != 0.0) {
    b0_ += delta;
    r_.array() -= delta;
  }
  return std::abs(delta);
}

int CoordinateDescent::solve(double lambda, double alpha, const CdOptions& opts) {
  const Eigen::Index p = g_.cols();
  int sweeps = 0;
  for (;;) {
    // Full sweep over every coordinate.
    double max_change = update_intercept();
    for (Eigen::Index j = 0; j < p; ++j)
      if (!skip_[static_cast<std::size_t>(j)]) max_change = std::max(max_change, update_coordinate(j, lambda, alpha));
    ++sweeps;
    if (max_change < opts.tol) break;
    if (sweeps >= opts.max_sweeps) break;
    // Iterate on the active set until it settles, then re-check with a full sweep.
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < p; ++j)
      if (beta_[j] != 0.0) active.push_back(j);
    while (sweeps < opts.max_sweeps) {
      double change = update_intercept();
      for (auto j : active) change = std::max(change, update_coordinate(j, lambda, alpha));
      ++sweeps;
      if (change < opts.tol) break;
    }
    if (sweeps >= opts.max_sweeps) break;
  }
  if (sweeps >= opts.max_sweeps) {
    // One last full sweep decides whether the cap was actually binding.
    double max_change = update_intercept();
    for (Eigen::Index j = 0; j < p; ++j)
      if (!skip_[static_cast<std::size_t>(j)]) max_change = std::max(max_change, update_coordinate(j, lambda, alpha));
    if (max_change >= opts.tol) {
      const double kkt = kkt_residual(lambda, alpha);
      throw ConvergenceError(kModule,
                             "coordinate descent did not converge in " + std::to_string(opts.max_sweeps) +
                                 " sweeps (KKT residual " + std::to_string(kkt) + ")",
                             kkt);
    }
  }
  return sweeps;
}

double CoordinateDescent::kkt_residual(double lambda, double alpha) const {
  const double n = static_cast<double>(g_.rows());
  double worst = fit_intercept_ ? std::abs(weighted_ ? w_.dot(r_) : r_.sum()) / n : 0.0;
  for (Eigen::Index j = 0; j < g_.cols(); ++j) {
    if (skip_[static_cast<std::size_t>(j)]) continue;
    const double grad = -(weighted_ ? wg_.col(j).dot(r_) : g_.col(j).dot(r_)) / n + lambda * (1.0 - alpha) * beta_[j];
    const double l1 = lambda * alpha;
    const double v = beta_[j] == 0.0 ? std::max(0.0, std::abs(grad) - l1)
                                     : std::abs(grad + l1 * (beta_[j] > 0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ridge / OLS

namespace {

void check_shapes(const Eigen::MatrixXd& x, const Eigen::VectorXd& t) {
  if (x.rows() != t.size()) throw Error(ErrorKind::Validation, kModule, "feature rows and target length disagree");
  if (x.rows() < 2) throw Error(ErrorKind::Validation, kModule, "need at least two training rows");
  if (!x.allFinite() || !t.allFinite()) throw Error(ErrorKind::Validation, kModule, "non-finite training data");
}

std::vector<Eigen::Index> active_columns(const Standardization& s) {
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < s.constant.size(); ++j)
    if (!s.constant[j]) cols.push_back(static_cast<Eigen::Index>(j));
  return cols;
}

}  // namespace

LinearModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double lambda) {
  check_shapes(x, t);
  if (!(lambda >= 0.0)) throw Error(ErrorKind::Validation, kModule, "ridge penalty must be nonnegative");
  auto s = Standardization::fit(x);
  const Eigen::MatrixXd g_full = s.apply(x);
  const auto cols = active_columns(s);
  const double tbar = t.mean();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  if (!cols.empty()) {
    const Eigen::MatrixXd g = g_full(Eigen::all, cols);
    const Eigen::VectorXd tc = t.array() - tbar;
    Eigen::VectorXd b;
    if (lambda == 0.0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g);
      qr.setThreshold(1e-10);
      if (qr.rank() < g.cols())
        throw Error(ErrorKind::Numerical, kModule, "singular least-squares system: collinear features",
                    "use a positive ridge penalty");
      b = qr.solve(tc);
    } else {
      Eigen::MatrixXd a = g.transpose() * g;
      a.diagonal().array() += lambda;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::Numerical, kModule, "ridge normal equations are not positive definite");
      b = llt.solve(g.transpose() * tc);
    }
    for (std::size_t k = 0; k < cols.size(); ++k) beta[cols[k]] = b[static_cast<Eigen::Index>(k)];
  }
  return LinearModel(tbar, std::move(beta), std::move(s), Penalty{lambda, 0.0});
}

// ---------------------------------------------------------------------------
// Elastic net

LinearModel fit_elastic_net(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double lambda, double alpha,
                            const CdOptions& opts) {
  check_shapes(x, t);
  if (!(lambda >= 0.0)) throw Error(ErrorKind::Validation, kModule, "elastic-net penalty must be nonnegative");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::Validation, kModule, "mixing weight must lie in [0,1]");
  auto s = Standardization::fit(x);
  const Eigen::MatrixXd g = s.apply(x);
  detail::CoordinateDescent cd(g, t, Eigen::VectorXd(), s.constant, true);
  cd.solve(lambda, alpha, opts);
  return LinearModel(cd.intercept(), cd.beta(), std::move(s), Penalty{lambda, alpha});
}

double elastic_net_kkt_residual(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const LinearModel& model) {
  const auto& s = model.standardization();
  const Eigen::MatrixXd g = s.apply(x);
  const double n = static_cast<double>(x.rows());
  const Eigen::VectorXd r = t - (g * model.coefficients()).array().matrix() - Eigen::VectorXd::Constant(t.size(), model.intercept());
  const double lambda = model.penalty().lambda;
  const double alpha = model.penalty().alpha;
  double worst = std::abs(r.sum()) / n;
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    if (s.constant[static_cast<std::size_t>(j)]) continue;
    const double b = model.coefficients()[j];
    const double grad = -g.col(j).dot(r) / n + lambda * (1.0 - alpha) * b;
    const double l1 = lambda * alpha;
    const double v = b == 0.0 ? std::max(0.0, std::abs(grad) - l1) : std::abs(grad + l1 * (b > 0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

void check_labels(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  check_shapes(x, y);
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0)
      has0 = true;
    else if (y[i] == 1.0)
      has1 = true;
    else
      throw Error(ErrorKind::Validation, kModule, "logistic labels must be 0 or 1");
  }
  if (!has0 || !has1) throw Error(ErrorKind::Validation, kModule, "both classes must be present");
}

double log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = eta[i];
    // log(1 + exp(e)) evaluated stably
    const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += y[i] * e - softplus;
  }
  return ll;
}

[[noreturn]] void separation() {
  throw Error(ErrorKind::Separation, kModule, "perfect or quasi-perfect separation: logistic coefficients diverge",
              "use a penalized logit (logit_lasso / logit_ridge)");
}

}  // namespace

LogitModel fit_logit(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, const IrlsOptions& opts) {
  check_labels(x, labels);
  auto s = Standardization::fit(x);
  const Eigen::MatrixXd g_full = s.apply(x);
  const auto cols = active_columns(s);
  const Eigen::Index n = x.rows();
  const Eigen::Index k = static_cast<Eigen::Index>(cols.size()) + 1;
  Eigen::MatrixXd a(n, k);
  a.col(0).setOnes();
  for (std::size_t c = 0; c < cols.size(); ++c) a.col(static_cast<Eigen::Index>(c) + 1) = g_full.col(cols[c]);

  const double ybar = labels.mean();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(k);
  theta[0] = std::log(ybar / (1.0 - ybar));
  Eigen::VectorXd eta = a * theta;
  double ll = log_likelihood(labels, eta);
  bool converged = false;
  for (int it = 0; it < opts.max_iter; ++it) {
    const Eigen::VectorXd p = eta.unaryExpr([](double e) { return sigmoid(e); });
    const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).max(1e-12);
    const Eigen::MatrixXd h = a.transpose() * (a.array().colwise() * w.array()).matrix();
    const Eigen::VectorXd grad = a.transpose() * (labels - p);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success)
      throw Error(ErrorKind::Numerical, kModule, "singular logistic Hessian (collinear features)",
                  "use a penalized logit");
    Eigen::VectorXd step = ldlt.solve(grad);
    double step_size = 1.0;
    Eigen::VectorXd cand;
    double ll_new = ll;
    for (int half = 0; half < 30; ++half) {
      cand = theta + step_size * step;
      ll_new = log_likelihood(labels, a * cand);
      if (ll_new >= ll - 1e-12) break;
      step_size *= 0.5;
    }
    theta = cand;
    eta = a * theta;
    const double change = std::abs(ll_new - ll);
    ll = ll_new;
    if (theta.tail(k - 1).cwiseAbs().maxCoeff() > 50.0 && k > 1) separation();
    if (change < opts.tol) {
      converged = true;
      break;
    }
  }
  const Eigen::VectorXd p = eta.unaryExpr([](double e) { return sigmoid(e); });
  if (k > 1 && (labels - p).cwiseAbs().maxCoeff() < 1e-3) separation();
  if (!converged)
    throw Error(ErrorKind::Convergence, kModule,
                "IRLS did not converge in " + std::to_string(opts.max_iter) + " iterations");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  for (std::size_t c = 0; c < cols.size(); ++c) beta[cols[c]] = theta[static_cast<Eigen::Index>(c) + 1];
  return LogitModel(theta[0], std::move(beta), std::move(s));
}

namespace detail {

std::vector<PathPoint> logit_path(const Eigen::MatrixXd& g, const Eigen::VectorXd& y, const std::vector<bool>& skip,
                                  const std::vector<double>& lambdas, double alpha, const IrlsOptions& irls,
                                  const CdOptions& cd_opts) {
  const double n = static_cast<double>(g.rows());
  const double ybar = y.mean();
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(g.rows(), std::log(ybar / (1.0 - ybar)));
  auto working = [&](const Eigen::VectorXd& e, Eigen::VectorXd& z, Eigen::VectorXd& w) {
    const Eigen::VectorXd p = e.unaryExpr([](double v) { return sigmoid(v); });
    w = (p.array() * (1.0 - p.array())).max(1e-5);
    z = e.array() + (y - p).array() / w.array();
  };
  Eigen::VectorXd z, w;
  working(eta, z, w);
  CoordinateDescent cd(g, z, w, skip, true);

  std::vector<PathPoint> path;
  path.reserve(lambdas.size());
  bool diverged = false;
  for (double lambda : lambdas) {
    auto objective = [&](const Eigen::VectorXd& e) {
      const auto& b = cd.beta();
      return -log_likelihood(y, e) / n + lambda * (alpha * b.lpNorm<1>() + 0.5 * (1.0 - alpha) * b.squaredNorm());
    };
    PathPoint pt;
    pt.converged = false;
    if (!diverged) {
      double obj = objective(eta);
      try {
        for (int it = 0; it < irls.max_iter; ++it) {
          cd.solve(lambda, alpha, cd_opts);
          eta = (g * cd.beta()).array() + cd.intercept();
          const double obj_new = objective(eta);
          if (cd.beta().size() > 0 && cd.beta().cwiseAbs().maxCoeff() > 1e3) {
            diverged = true;
            break;
          }
          if (std::abs(obj_new - obj) < irls.tol) {
            pt.converged = true;
            break;
          }
          obj = obj_new;
          working(eta, z, w);
          cd.reset_response(z, w);
        }
      } catch (const ConvergenceError&) {
        pt.converged = false;
      }
    }
    pt.intercept = cd.intercept();
    pt.beta = cd.beta();
    path.push_back(std::move(pt));
  }
  return path;
}

std::vector<PathPoint> elastic_net_path(const Eigen::MatrixXd& g, const Eigen::VectorXd& t, const std::vector<bool>& skip,
                                        const std::vector<double>& lambdas, double alpha, const CdOptions& opts) {
  CoordinateDescent cd(g, t, Eigen::VectorXd(), skip, true);
  std::vector<PathPoint> path;
  path.reserve(lambdas.size());
  for (double lambda : lambdas) {
    PathPoint pt;
    try {
      cd.solve(lambda, alpha, opts);
    } catch (const ConvergenceError&) {
      pt.converged = false;
    }
    pt.intercept = cd.intercept();
    pt.beta = cd.beta();
    path.push_back(std::move(pt));
  }
  return path;
}

std::vector<PathPoint> ridge_path(const Eigen::MatrixXd& g, const Eigen::VectorXd& t, const std::vector<bool>& skip,
                                  const std::vector<double>& lambdas) {
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < skip.size(); ++j)
    if (!skip[j]) cols.push_back(static_cast<Eigen::Index>(j));
  const double tbar = t.mean();
  std::vector<PathPoint> path;
  path.reserve(lambdas.size());
  if (cols.empty()) {
    for (std::size_t k = 0; k < lambdas.size(); ++k) path.push_back({tbar, Eigen::VectorXd::Zero(g.cols()), true});
    return path;
  }
  const Eigen::MatrixXd ga = g(Eigen::all, cols);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ga.transpose() * ga);
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * (ga.transpose() * (t.array() - tbar).matrix());
  for (double lambda : lambdas) {
    PathPoint pt{tbar, Eigen::VectorXd::Zero(g.cols()), true};
    const Eigen::VectorXd denom = eig.eigenvalues().array() + lambda;
    if ((denom.array() <= 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())).any()) {
      pt.converged = false;
    } else {
      const Eigen::VectorXd b = eig.eigenvectors() * proj.cwiseQuotient(denom);
      for (std::size_t k = 0; k < cols.size(); ++k) pt.beta[cols[k]] = b[static_cast<Eigen::Index>(k)];
    }
    path.push_back(std::move(pt));
  }
  return path;
}

}  // namespace detail

LogitModel fit_penalized_logit(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, double lambda, double alpha,
                               const IrlsOptions& irls, const CdOptions& cd_opts) {
  check_labels(x, labels);
  if (!(lambda >= 0.0)) throw Error(ErrorKind::Validation, kModule, "penalty must be nonnegative");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::Validation, kModule, "mixing weight must lie in [0,1]");
  auto s = Standardization::fit(x);
  const Eigen::MatrixXd g = s.apply(x);
  auto path = detail::logit_path(g, labels, s.constant, {lambda}, alpha, irls, cd_opts);
  auto& pt = path.front();
  if (pt.beta.size() > 0 && pt.beta.cwiseAbs().maxCoeff() > 1e3) separation();
  if (!pt.converged)
    throw Error(ErrorKind::Convergence, kModule,
                "penalized IRLS did not converge in " + std::to_string(irls.max_iter) + " iterations");
  return LogitModel(pt.intercept, std::move(pt.beta), std::move(s), Penalty{lambda, alpha});
}

Eigen::VectorXd logit_score(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, const LogitModel& model) {
  const Eigen::VectorXd p = model.predict(x);
  const Eigen::VectorXd resid = labels - p;
  const double n = static_cast<double>(x.rows());
  Eigen::VectorXd out(x.cols() + 1);
  out[0] = resid.sum() / n;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double m = x.col(j).mean();
    double sd = std::sqrt((x.col(j).array() - m).square().sum() / n);
    if (sd <= 0.0) sd = 1.0;
    out[j + 1] = ((x.col(j).array() - m) / sd * resid.array()).sum() / n;
  }
  return out;
}

}  // namespace drgate::learn
