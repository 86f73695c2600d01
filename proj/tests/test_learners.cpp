#include <doctest.h>

#include <cmath>

#include "drgate/error.hpp"
#include "drgate/learners.hpp"
#include "helpers.hpp"

using namespace drgate;
using namespace drgate::learn;
using testing::normal_matrix;
using testing::normal_vector;

namespace {

/// Population-standardized copy of x, the scale the solvers penalize on.
Eigen::MatrixXd standardized(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd g = x.rowwise() - x.colwise().mean();
  for (Eigen::Index j = 0; j < g.cols(); ++j) g.col(j) /= std::sqrt(g.col(j).squaredNorm() / static_cast<double>(g.rows()));
  return g;
}

double lasso_objective(const Eigen::MatrixXd& g, const Eigen::VectorXd& tc, double b1, double b2, double lambda) {
  const Eigen::VectorXd r = tc - g.col(0) * b1 - g.col(1) * b2;
  return r.squaredNorm() / (2.0 * static_cast<double>(g.rows())) + lambda * (std::abs(b1) + std::abs(b2));
}

/// Zooming grid search over the coefficient plane; the objective is convex,
/// so each refinement stays around the global minimizer.
double grid_search_lasso(const Eigen::MatrixXd& g, const Eigen::VectorXd& tc, double lambda) {
  double c1 = 0, c2 = 0, half = 5.0, best = lasso_objective(g, tc, 0, 0, lambda);
  for (int round = 0; round < 40; ++round) {
    const int steps = 40;
    double n1 = c1, n2 = c2;
    for (int i = -steps; i <= steps; ++i)
      for (int j = -steps; j <= steps; ++j) {
        const double b1 = c1 + half * i / steps, b2 = c2 + half * j / steps;
        const double v = lasso_objective(g, tc, b1, b2, lambda);
        if (v < best) {
          best = v;
          n1 = b1;
          n2 = b2;
        }
      }
    c1 = n1;
    c2 = n2;
    half *= 0.5;
  }
  return best;
}

class FixedLearner final : public Learner {
 public:
  FixedLearner(std::string name, std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> f)
      : name_(std::move(name)), f_(std::move(f)) {}
  std::string name() const override { return name_; }
  ModelPtr fit(const Eigen::MatrixXd&, const Eigen::VectorXd&, std::uint64_t) const override {
    struct M final : Model {
      std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> f;
      Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override { return f(x); }
    };
    auto m = std::make_shared<M>();
    m->f = f_;
    return m;
  }

 private:
  std::string name_;
  std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> f_;
};

}  // namespace

TEST_SUITE("learners") {
  TEST_CASE("ridge interpolates two points") {
    Eigen::MatrixXd x(2, 1);
    x << 0, 1;
    Eigen::VectorXd t(2);
    t << 0, 1;
    const auto m = fit_ridge(x, t, 0.0);
    const Eigen::VectorXd fit = m.predict(x);
    CHECK(fit[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit[1] == doctest::Approx(1.0));
    CHECK(m.raw_coefficients()[0] == doctest::Approx(1.0));
    CHECK(std::abs(m.raw_intercept()) < 1e-12);
  }

  TEST_CASE("ridge full shrinkage limit") {
    const auto x = normal_matrix(20, 3, 1);
    const auto t = normal_vector(20, 2);
    const auto m = fit_ridge(x, t, 1e12);
    CHECK(m.coefficients().cwiseAbs().maxCoeff() < 1e-9);
    CHECK(m.intercept() == doctest::Approx(t.mean()));
  }

  TEST_CASE("ridge matches the normal-equations oracle") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto x = normal_matrix(20, 3, seed);
      const Eigen::VectorXd t = x * Eigen::Vector3d(1, -2, 0.5) + normal_vector(20, seed + 50);
      for (double lambda : {0.0, 0.3, 4.0}) {
        const Eigen::MatrixXd g = standardized(x);
        Eigen::MatrixXd a = g.transpose() * g;
        a.diagonal().array() += lambda;
        const Eigen::VectorXd beta = a.ldlt().solve(g.transpose() * (t.array() - t.mean()).matrix());
        const Eigen::VectorXd oracle = (g * beta).array() + t.mean();
        const auto m = fit_ridge(x, t, lambda);
        CHECK((m.predict(x) - oracle).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((m.coefficients() - beta).cwiseAbs().maxCoeff() < 1e-8);
      }
    }
  }

  TEST_CASE("collinear OLS is a numerical error") {
    Eigen::MatrixXd x = normal_matrix(10, 2, 3);
    x.col(1) = 2.0 * x.col(0);
    try {
      fit_ols(x, normal_vector(10, 4));
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Numerical);
    }
  }

  TEST_CASE("elastic net without penalty equals OLS") {
    const auto x = normal_matrix(20, 3, 7);
    const Eigen::VectorXd t = x * Eigen::Vector3d(0.5, 1, -1) + normal_vector(20, 8);
    const Eigen::VectorXd ols = fit_ridge(x, t, 0.0).predict(x);
    for (double alpha : {0.0, 0.5, 1.0}) {
      const auto m = fit_elastic_net(x, t, 0.0, alpha);
      CHECK((m.predict(x) - ols).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("lasso null threshold") {
    const auto x = normal_matrix(30, 4, 9);
    const Eigen::VectorXd t = x.col(1) + normal_vector(30, 10);
    const Eigen::MatrixXd g = standardized(x);
    const double oracle = (g.transpose() * (t.array() - t.mean()).matrix()).cwiseAbs().maxCoeff() / 30.0;
    CHECK(lambda_max(x, t, 1.0) == doctest::Approx(oracle).epsilon(1e-12));
    const auto m = fit_elastic_net(x, t, oracle, 1.0);
    CHECK(m.coefficients().cwiseAbs().maxCoeff() == 0.0);
    const auto below = fit_elastic_net(x, t, 0.9 * oracle, 1.0);
    CHECK(below.coefficients().cwiseAbs().maxCoeff() > 0.0);
  }

  TEST_CASE("two-feature lasso matches grid search") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto x = normal_matrix(25, 2, seed * 11);
      const Eigen::VectorXd t = x * Eigen::Vector2d(1.0, -0.3) + 0.5 * normal_vector(25, seed * 13);
      const double lambda = 0.1 * static_cast<double>(seed);
      const auto m = fit_elastic_net(x, t, lambda, 1.0, {1e-12, 100000});
      const Eigen::MatrixXd g = standardized(x);
      const Eigen::VectorXd tc = t.array() - t.mean();
      const double cd = lasso_objective(g, tc, m.coefficients()[0], m.coefficients()[1], lambda);
      const double grid = grid_search_lasso(g, tc, lambda);
      CHECK(std::abs(cd - grid) < 1e-6);
      CHECK(cd <= grid + 1e-12);
    }
  }

  TEST_CASE("lasso and elastic net satisfy KKT") {
    const auto x = normal_matrix(60, 8, 21);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(8);
    beta.head(3) << 2, -1, 0.5;
    const Eigen::VectorXd t = x * beta + normal_vector(60, 22);
    const double tol = 1e-7;
    for (double alpha : {1.0, 0.5}) {
      const double lmax = lambda_max(x, t, alpha);
      for (double frac : {0.5, 0.1, 0.01}) {
        const double lambda = frac * lmax;
        const auto m = fit_elastic_net(x, t, lambda, alpha, {tol, 10000});
        const Eigen::MatrixXd g = standardized(x);
        const Eigen::VectorXd r = t - g * m.coefficients() - Eigen::VectorXd::Constant(60, m.intercept());
        for (Eigen::Index j = 0; j < 8; ++j) {
          const double b = m.coefficients()[j];
          const double grad = -g.col(j).dot(r) / 60.0 + lambda * (1 - alpha) * b;
          if (b == 0.0) CHECK(std::abs(grad) <= lambda * alpha + 2 * tol);
          else CHECK(std::abs(grad + lambda * alpha * (b > 0 ? 1 : -1)) < 1e-5);
        }
        CHECK(elastic_net_kkt_residual(x, t, m) < 1e-5);
      }
    }
  }

  TEST_CASE("logit intercept-only MLE is the label mean") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(40, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(40);
    for (int i = 0; i < 10; ++i) y[i * 4] = 1;
    const auto p = fit_logit(x, y).predict(x);
    CHECK((p.array() - 0.25).abs().maxCoeff() < 1e-8);
  }

  TEST_CASE("logit symmetry") {
    const auto x = normal_matrix(80, 2, 31);
    Eigen::VectorXd y(80);
    drgate::Rng rng(5);
    std::uniform_real_distribution<double> u;
    for (Eigen::Index i = 0; i < 80; ++i) y[i] = u(rng) < 1 / (1 + std::exp(-0.3 - x(i, 0) + 0.5 * x(i, 1)));
    const auto base = fit_logit(x, y);
    const Eigen::VectorXd flipped = 1.0 - y.array();
    const auto neg = fit_logit(x, flipped);
    CHECK((neg.raw_coefficients() + base.raw_coefficients()).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(neg.raw_intercept() == doctest::Approx(-base.raw_intercept()).epsilon(1e-7));
    const auto both = fit_logit(-x, flipped);
    CHECK((both.raw_coefficients() - base.raw_coefficients()).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(both.raw_intercept() == doctest::Approx(-base.raw_intercept()).epsilon(1e-7));
  }

  TEST_CASE("logit gradient vanishes at the MLE") {
    const auto x = normal_matrix(30, 2, 41);
    Eigen::VectorXd y(30);
    drgate::Rng rng(6);
    std::uniform_real_distribution<double> u;
    for (Eigen::Index i = 0; i < 30; ++i) y[i] = u(rng) < 1 / (1 + std::exp(-x(i, 0)));
    const auto m = fit_logit(x, y);
    const Eigen::VectorXd p = m.predict(x);
    CHECK((p.array() > 0).all());
    CHECK((p.array() < 1).all());
    Eigen::MatrixXd design(30, 3);
    design << Eigen::VectorXd::Ones(30), x;
    CHECK((design.transpose() * (y - p)).norm() < 1e-6);
  }

  TEST_CASE("perfect separation is reported") {
    Eigen::MatrixXd x(20, 1);
    Eigen::VectorXd y(20);
    for (int i = 0; i < 20; ++i) {
      x(i, 0) = i - 9.5;
      y[i] = i >= 10;
    }
    try {
      fit_logit(x, y);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Separation);
    }
  }

  TEST_CASE("penalized logit stays inside (0,1) under separation") {
    Eigen::MatrixXd x(20, 1);
    Eigen::VectorXd y(20);
    for (int i = 0; i < 20; ++i) {
      x(i, 0) = i - 9.5;
      y[i] = i >= 10;
    }
    const auto p = fit_penalized_logit(x, y, 0.05, 1.0).predict(x);
    CHECK((p.array() > 0).all());
    CHECK((p.array() < 1).all());
  }

  TEST_CASE("forest constant target") {
    const auto x = normal_matrix(50, 3, 51);
    ForestParams params;
    params.n_trees = 20;
    const auto f = fit_forest(x, Eigen::VectorXd::Constant(50, 7.0), params);
    CHECK((f.predict(normal_matrix(10, 3, 52)).array() == 7.0).all());
  }

  TEST_CASE("forest with constant features is a single leaf at the mean") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(30, 2);
    const auto t = normal_vector(30, 53);
    ForestParams params;
    params.n_trees = 5;
    params.bootstrap = false;
    const auto f = fit_forest(x, t, params);
    for (const auto& tree : f.trees()) CHECK(tree.nodes().size() == 1);
    CHECK(f.predict(x)[0] == doctest::Approx(t.mean()));
  }

  TEST_CASE("deep trees reproduce a step function") {
    const auto x = normal_matrix(100, 1, 54);
    const Eigen::VectorXd t = (x.col(0).array() > 0).cast<double>();
    ForestParams params;
    params.n_trees = 10;
    params.min_leaf = 1;
    params.bootstrap = false;
    const auto f = fit_forest(x, t, params);
    CHECK((f.predict(x) - t).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("forest invariants") {
    const auto x = normal_matrix(200, 4, 55);
    const Eigen::VectorXd t = (x.col(0).array() + 0.3 * x.col(1).array() > 0).cast<double>();
    ForestParams params;
    params.n_trees = 30;
    params.min_leaf = 4;
    params.seed = 9;
    const auto f = fit_forest(x, t, params);
    const auto p = f.predict(normal_matrix(100, 4, 56));
    CHECK((p.array() >= 0).all());
    CHECK((p.array() <= 1).all());
    for (const auto& tree : f.trees())
      for (const auto& node : tree.nodes())
        if (node.feature < 0) CHECK(node.count >= params.min_leaf);
    const auto again = fit_forest(x, t, params);
    CHECK(again.predict(x) == f.predict(x));
    CHECK(again.oob_predictions().size() == 200);
  }

  TEST_CASE("select_penalty singleton grid") {
    const auto x = normal_matrix(40, 3, 61);
    const auto t = normal_vector(40, 62);
    const auto c = select_penalty(x, t, LearnerKind::Lasso, {0.123}, 5, 1);
    CHECK(c.penalty.lambda == 0.123);
    CHECK(c.index == 0);
  }

  TEST_CASE("select_penalty prefers the largest penalty on pure noise") {
    int at_max = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const auto x = normal_matrix(60, 5, seed * 3);
      const auto t = normal_vector(60, seed * 3 + 1);
      auto grid = default_lambda_grid(x, t, 1.0, 20);
      const double top = *std::max_element(grid.begin(), grid.end());
      const auto c = select_penalty(x, t, LearnerKind::Lasso, grid, 5, seed);
      at_max += c.penalty.lambda == top;
    }
    CHECK(at_max > 25);
  }

  TEST_CASE("select_penalty argmin property") {
    const auto x = normal_matrix(100, 10, 71);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(10);
    beta.head(2) << 3, -2;
    const Eigen::VectorXd t = x * beta + 0.5 * normal_vector(100, 72);
    for (auto kind : {LearnerKind::Lasso, LearnerKind::Ridge, LearnerKind::ElasticNet}) {
      const auto c = select_penalty(x, t, kind, default_lambda_grid(x, t, kind == LearnerKind::Ridge ? 0.0 : 1.0, 40), 5, 3);
      CHECK(c.cv_mse[c.index] <= c.cv_mse.front());
      CHECK(c.cv_mse[c.index] <= c.cv_mse.back());
      CHECK(*std::min_element(c.cv_mse.begin(), c.cv_mse.end()) == c.cv_mse[c.index]);
    }
  }

  TEST_CASE("simplex least squares") {
    Eigen::MatrixXd p(4, 2);
    p << 1, 0, 2, 0, 3, 0, 4, 0;
    Eigen::VectorXd t(4);
    t << 1, 2, 3, 4;
    const auto w = simplex_least_squares(p, t);
    CHECK(w[0] == doctest::Approx(1.0));
    CHECK(w[1] == doctest::Approx(0.0));
    // Brute force over the 1-simplex for a random problem.
    const auto q = normal_matrix(30, 2, 81);
    const auto s = normal_vector(30, 82);
    const auto w2 = simplex_least_squares(q, s);
    double best = 1e300;
    for (int i = 0; i <= 100000; ++i) {
      const double a = i / 100000.0;
      best = std::min(best, (s - a * q.col(0) - (1 - a) * q.col(1)).squaredNorm());
    }
    CHECK((s - q * w2).squaredNorm() <= best + 1e-9);
    CHECK(w2.sum() == doctest::Approx(1.0));
    CHECK((w2.array() >= 0).all());
  }

  TEST_CASE("ensemble with one member") {
    const auto x = normal_matrix(50, 3, 91);
    const Eigen::VectorXd t = x.col(0) + normal_vector(50, 92);
    const auto e = fit_ensemble(x, t, std::vector<LearnerSpec>{testing::spec_of(LearnerKind::Ols)}, 5, 1);
    REQUIRE(e.weights().size() == 1);
    CHECK(e.weights()[0] == 1.0);
  }

  TEST_CASE("oracle member takes the weight") {
    const auto x = normal_matrix(200, 3, 93);
    const Eigen::VectorXd t = x.col(0);
    std::vector<LearnerPtr> members;
    members.push_back(std::make_shared<FixedLearner>("noise1", [](const Eigen::MatrixXd& z) {
      return normal_vector(z.rows(), static_cast<std::uint64_t>(z.rows()) + 1);
    }));
    members.push_back(std::make_shared<FixedLearner>("oracle", [](const Eigen::MatrixXd& z) { return Eigen::VectorXd(z.col(0)); }));
    members.push_back(std::make_shared<FixedLearner>("noise2", [](const Eigen::MatrixXd& z) {
      return Eigen::VectorXd(2.0 * normal_vector(z.rows(), static_cast<std::uint64_t>(z.rows()) + 7));
    }));
    const auto e = fit_ensemble(x, t, members, 5, 3);
    CHECK(e.weights()[1] >= 0.99);
  }

  TEST_CASE("ensemble weights and out-of-fold MSE") {
    const auto x = normal_matrix(150, 6, 94);
    const Eigen::VectorXd t = x.col(0) - x.col(1) + 0.5 * (x.col(2).array() > 0).cast<double>().matrix() + normal_vector(150, 95);
    std::vector<LearnerSpec> specs(4);
    specs[0].kind = LearnerKind::Lasso;
    specs[1].kind = LearnerKind::Ridge;
    specs[2].kind = LearnerKind::Mean;
    specs[3].kind = LearnerKind::Forest;
    specs[3].forest.n_trees = 50;
    const auto e = fit_ensemble(x, t, specs, 5, 4);
    CHECK((e.weights().array() >= 0).all());
    CHECK(e.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.oof_mse() <= e.member_oof_mse().minCoeff() + 1e-9);
    const auto xq = normal_matrix(10, 6, 96);
    Eigen::VectorXd manual = Eigen::VectorXd::Zero(10);
    for (std::size_t j = 0; j < e.members().size(); ++j)
      manual += e.weights()[static_cast<Eigen::Index>(j)] * e.members()[j]->predict(xq);
    CHECK((e.predict(xq) - manual).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("duplicate members give identical predictions") {
    const auto x = normal_matrix(60, 3, 97);
    const Eigen::VectorXd t = x.col(0) + normal_vector(60, 98);
    const std::vector<LearnerSpec> two{testing::spec_of(LearnerKind::Ols), testing::spec_of(LearnerKind::Ols)};
    const auto e = fit_ensemble(x, t, two, 5, 5);
    const auto single = fit_ols(x, t);
    CHECK((e.predict(x) - single.predict(x)).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("all members failing is an aggregate error") {
    Eigen::MatrixXd x = normal_matrix(30, 2, 99);
    x.col(1) = x.col(0);
    try {
      fit_ensemble(x, normal_vector(30, 100), std::vector<LearnerSpec>{testing::spec_of(LearnerKind::Ols)}, 3, 1);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Aggregate);
    }
  }

  TEST_CASE("learner spec json round trip") {
    const auto spec = LearnerSpec::from_json(nlohmann::json{{"kind", "elastic_net"}, {"alpha", 0.3}, {"grid_size", 12}});
    CHECK(spec.kind == LearnerKind::ElasticNet);
    CHECK(spec.alpha == 0.3);
    const auto back = LearnerSpec::from_json(spec.to_json());
    CHECK(back.name() == spec.name());
    CHECK(back.grid_size == 12);
    CHECK_THROWS_AS(LearnerSpec::from_json(nlohmann::json("boosting")), Error);
  }
}
