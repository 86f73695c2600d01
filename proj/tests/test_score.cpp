#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "drgate/error.hpp"
#include "drgate/score.hpp"
#include "drgate/sim.hpp"
#include "drgate/stats.hpp"
#include "helpers.hpp"

using namespace drgate;

namespace {

Dataset one_row_pair(double y1, double y0) {
  Eigen::VectorXd y(4), d(4);
  y << y1, y0, y1, y0;
  d << 1, 0, 1, 0;
  return Dataset(y, d, testing::normal_matrix(4, 1, 1), {0});
}

NuisanceFits constant_fits(const Dataset& ds, double p, double m0, double m1) {
  const auto n = static_cast<Eigen::Index>(ds.n());
  return NuisanceFits::from_values(ds.d(), Eigen::VectorXd::Constant(n, p), Eigen::VectorXd::Constant(n, m0),
                                   Eigen::VectorXd::Constant(n, m1));
}

}  // namespace

TEST_SUITE("score") {
  TEST_CASE("plug-in arithmetic") {
    const Dataset ds = one_row_pair(1.0, 0.0);
    CHECK(aipw_score(ds, constant_fits(ds, 0.5, 0, 0)).psi[0] == 2.0);
    const Dataset ds2 = one_row_pair(2.0, 0.0);
    CHECK(ipw_score(ds2, constant_fits(ds2, 0.5, 0, 0)).psi[0] == 4.0);
    CHECK((outcome_score(ds, constant_fits(ds, 0.5, 3, 3)).psi.array() == 0.0).all());
    CHECK((outcome_score(ds, constant_fits(ds, 0.5, 1, 6)).psi.array() == 5.0).all());
  }

  TEST_CASE("zero residuals leave only the augmentation") {
    const Dataset raw = testing::toy_dataset(20, 2, 3);
    const Eigen::VectorXd m0 = raw.x().col(1), m1 = raw.x().col(0) + raw.x().col(1);
    Eigen::VectorXd y(20);
    for (Eigen::Index i = 0; i < 20; ++i) y[i] = raw.d()[i] == 1 ? m1[i] : m0[i];
    const Dataset ds = raw.with_outcome(y);
    const auto fits = NuisanceFits::from_values(ds.d(), Eigen::VectorXd::Constant(20, 0.3), m0, m1);
    const auto psi = aipw_score(ds, fits);
    CHECK((psi.psi - (m1 - m0)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("AIPW minus IPW is the augmentation term, row by row") {
    const Dataset ds = testing::toy_dataset(50, 2, 4);
    Eigen::VectorXd p = (0.5 + 0.3 * ds.x().col(1).array().tanh()).matrix();
    const Eigen::VectorXd m0 = ds.x().col(0), m1 = 2.0 * ds.x().col(1);
    const auto fits = NuisanceFits::from_values(ds.d(), p, m0, m1);
    const auto a = aipw_score(ds, fits), b = ipw_score(ds, fits);
    for (Eigen::Index i = 0; i < 50; ++i) {
      const double di = ds.d()[i], pi = fits.p_hat[i];
      const double aug = (1 - di / pi) * m1[i] - (1 - (1 - di) / (1 - pi)) * m0[i];
      CHECK(a.psi[i] - b.psi[i] == doctest::Approx(aug).epsilon(1e-12));
    }
    const auto zero = NuisanceFits::from_values(ds.d(), p, Eigen::VectorXd::Zero(50), Eigen::VectorXd::Zero(50));
    CHECK(aipw_score(ds, zero).psi == ipw_score(ds, zero).psi);
  }

  TEST_CASE("provenance and variant tags") {
    const Dataset ds = testing::toy_dataset(10, 1, 5);
    const auto f1 = constant_fits(ds, 0.5, 0, 1), f2 = constant_fits(ds, 0.5, 0, 2);
    CHECK(aipw_score(ds, f1).provenance == fingerprint(f1));
    CHECK(fingerprint(f1) != fingerprint(f2));
    CHECK(make_score(ScoreVariant::Ipw, ds, f1).variant == ScoreVariant::Ipw);
    std::ostringstream out;
    write_scores_csv(aipw_score(ds, f1), out);
    const std::string text = out.str();
    CHECK(text.rfind("row,psi,variant\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 11);
  }

  TEST_CASE("true nuisances: mean score is root-N consistent and IPW is noisier") {
    sim::DgpSpec spec;
    spec.n = 1000;
    spec.tau_shape = sim::TauShape::Sine;
    int covered = 0, ipw_noisier = 0;
    double outcome_mean = 0, ipw_mean = 0, aipw_mean = 0;
    const int reps = 500;
    for (int r = 0; r < reps; ++r) {
      spec.seed = 1000 + static_cast<std::uint64_t>(r);
      const auto s = sim::generate(spec);
      const auto fits = NuisanceFits::from_values(s.data.d(), s.truth.p, s.truth.m0, s.truth.m1);
      const auto a = aipw_score(s.data, fits), b = ipw_score(s.data, fits), c = outcome_score(s.data, fits);
      const double m = a.psi.mean(), sd = stats::sample_sd(stats::view(a.psi));
      covered += std::abs(m - s.truth.theta) < 3 * sd / std::sqrt(1000.0);
      ipw_noisier += stats::sample_sd(stats::view(b.psi)) >= sd;
      aipw_mean += m / reps;
      ipw_mean += b.psi.mean() / reps;
      outcome_mean += c.psi.mean() / reps;
    }
    CHECK(covered >= 495);
    CHECK(ipw_noisier >= 450);
    const double theta = sim::true_theta(spec);
    CHECK(std::abs(aipw_mean - theta) < 0.02);
    CHECK(std::abs(ipw_mean - theta) < 0.03);
    CHECK(std::abs(outcome_mean - theta) < 0.02);
  }

  TEST_CASE("double robustness of the mean score") {
    sim::DgpSpec spec;
    spec.n = 4000;
    spec.seed = 77;
    const auto s = sim::generate(spec);
    const auto n = static_cast<Eigen::Index>(spec.n);
    const Eigen::VectorXd flat_p = Eigen::VectorXd::Constant(n, s.data.d().mean());
    const Eigen::VectorXd y = s.data.y(), d = s.data.d();
    double y1 = 0, y0 = 0;
    for (Eigen::Index i = 0; i < n; ++i) (d[i] == 1 ? y1 : y0) += y[i];
    const double t1 = d.sum();
    const Eigen::VectorXd flat_m0 = Eigen::VectorXd::Constant(n, y0 / (n - t1));
    const Eigen::VectorXd flat_m1 = Eigen::VectorXd::Constant(n, y1 / t1);
    auto mean_psi = [&](const Eigen::VectorXd& p, const Eigen::VectorXd& m0, const Eigen::VectorXd& m1) {
      const auto psi = aipw_score(s.data, NuisanceFits::from_values(d, p, m0, m1));
      return std::make_pair(psi.psi.mean(), stats::sample_sd(stats::view(psi.psi)) / std::sqrt(static_cast<double>(n)));
    };
    const double theta = s.truth.theta;
    auto [a, sa] = mean_psi(flat_p, s.truth.m0, s.truth.m1);
    CHECK(std::abs(a - theta) < 4 * sa);
    auto [b, sb] = mean_psi(s.truth.p, flat_m0, flat_m1);
    CHECK(std::abs(b - theta) < 4 * sb);
    auto [c, sc] = mean_psi(flat_p, flat_m0, flat_m1);
    CHECK(std::abs(c - theta) > 4 * sc);
  }
}
