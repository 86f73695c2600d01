#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "drgate/error.hpp"
#include "drgate/rng.hpp"
#include "drgate/theory.hpp"
#include "oracles.hpp"

using namespace drgate;
using namespace drgate::theory;

TEST_SUITE("theory") {
  TEST_CASE("joint exponent thresholds for the second-order kernel") {
    CHECK(gate_threshold(1, 2) == doctest::Approx(3.0 / 5));
    CHECK(gate_threshold(2, 2) == doctest::Approx(2.0 / 3));
    CHECK(gate_threshold(3, 2) == doctest::Approx(5.0 / 7));
  }

  TEST_CASE("worked ranges") {
    const RateSpec spec{1, 2, 0.35, 0.35};
    const auto g = gate_range(spec);
    CHECK(g.feasible);
    CHECK(g.lower == doctest::Approx(0.2));
    CHECK(g.upper == doctest::Approx(0.4));
    CHECK_FALSE(ate_range(spec).feasible);
    const auto a = ate_range(RateSpec{1, 2, 0.375, 0.375});
    CHECK(a.feasible);
    CHECK(a.lower == doctest::Approx(0.2));
    CHECK(a.upper == doctest::Approx(0.25));
    const auto a4 = ate_range(RateSpec{1, 4, 0.375, 0.375});
    CHECK(a4.lower == doctest::Approx(1.0 / 9));
    CHECK(a4.upper == doctest::Approx(0.25));
  }

  TEST_CASE("infeasible joint rate") {
    const auto g = gate_range(RateSpec{1, 2, 0.25, 0.25});
    CHECK_FALSE(g.feasible);
    CHECK_FALSE(ate_range(RateSpec{1, 2, 0.25, 0.25}).feasible);
  }

  TEST_CASE("minimum kernel order") {
    const auto g = gate_range(RateSpec{3, 2, 0.3, 0.3});
    CHECK_FALSE(g.feasible);
    CHECK(g.min_kernel_order == doctest::Approx(6));
    CHECK_FALSE(gate_range(RateSpec{3, 6, 0.3, 0.3}).feasible);
    CHECK(gate_range(RateSpec{3, 8, 0.3, 0.3}).feasible);
    CHECK(std::isinf(gate_range(RateSpec{1, 2, 0.25, 0.25}).min_kernel_order));
  }

  TEST_CASE("closed forms agree with the inequality scan") {
    drgate::Rng rng(2024);
    std::uniform_int_distribution<int> lz(1, 4), order(1, 3);
    std::uniform_real_distribution<double> delta(0.01, 0.5);
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
      const RateSpec s{lz(rng), 2 * order(rng), delta(rng), delta(rng)};
      for (Regime regime : {Regime::Gate, Regime::Ate}) {
        const auto closed = range(s, regime);
        const auto scanned = oracle::scan([&](double dh) {
          return regime == Regime::Gate ? oracle::gate_conditions(dh, s.lambda_z, s.r, s.delta_p, s.delta_m)
                                        : oracle::ate_conditions(dh, s.lambda_z, s.r, s.delta_p, s.delta_m);
        });
        CAPTURE(i);
        CAPTURE(s.lambda_z);
        CAPTURE(s.r);
        CAPTURE(s.delta_p);
        CAPTURE(s.delta_m);
        // Ranges narrower than the scan step are not resolvable by the grid.
        if (closed.feasible && closed.upper - closed.lower < 2e-4) continue;
        REQUIRE(closed.feasible == scanned.has_value());
        if (scanned) {
          CHECK(std::abs(scanned->first - closed.lower) <= 1.01e-4);
          CHECK(std::abs(scanned->second - closed.upper) <= 1.01e-4);
        }
        ++checked;
      }
    }
    CHECK(checked > 1900);
  }

  TEST_CASE("ranges widen with the joint exponent and kernel order") {
    for (int lz = 1; lz <= 3; ++lz)
      for (double s = 0.55; s < 1.0; s += 0.05) {
        const auto a = gate_range(RateSpec{lz, 2, s / 2, s / 2});
        const auto b = gate_range(RateSpec{lz, 2, s / 2 + 0.02, s / 2 + 0.02});
        CHECK(b.upper >= a.upper);
        const auto c = gate_range(RateSpec{lz, 4, s / 2, s / 2});
        CHECK(c.lower <= a.lower);
      }
  }

  TEST_CASE("a feasible ATE design is also feasible for GATE") {
    drgate::Rng rng(7);
    std::uniform_int_distribution<int> lz(1, 4), order(1, 3);
    std::uniform_real_distribution<double> delta(0.01, 0.5);
    int feasible = 0;
    for (int i = 0; i < 2000; ++i) {
      const RateSpec s{lz(rng), 2 * order(rng), delta(rng), delta(rng)};
      if (!ate_range(s).feasible) continue;
      ++feasible;
      CHECK(gate_range(s).feasible);
    }
    CHECK(feasible > 0);
    for (int lz = 1; lz <= 3; ++lz) CHECK(ate_threshold(lz, 2) > gate_threshold(lz, 2));
  }

  TEST_CASE("condition diagnostics") {
    const RateSpec spec{1, 2, 0.35, 0.35};
    const auto ok = check_config(spec, 0.3, Regime::Gate);
    CHECK(ok.all_pass);
    CHECK(ok.checks.size() == 4);
    const auto too_wide = check_config(spec, 0.1, Regime::Gate);
    CHECK_FALSE(too_wide.all_pass);
    CHECK_FALSE(too_wide.checks[1].pass);
    const auto too_narrow = check_config(spec, 0.45, Regime::Gate);
    CHECK_FALSE(too_narrow.all_pass);
    for (double dh = 0.01; dh < 1.0; dh += 0.01) {
      CHECK(check_config(spec, dh, Regime::Gate).all_pass == oracle::gate_conditions(dh, 1, 2, 0.35, 0.35));
      CHECK(check_config(spec, dh, Regime::Ate).all_pass == oracle::ate_conditions(dh, 1, 2, 0.35, 0.35));
    }
    CHECK(bandwidth_exponent(std::pow(1000.0, -0.25), 1000) == doctest::Approx(0.25));
  }

  TEST_CASE("validation") {
    CHECK_THROWS_AS(gate_range(RateSpec{0, 2, 0.3, 0.3}), Error);
    CHECK_THROWS_AS(gate_range(RateSpec{1, 3, 0.3, 0.3}), Error);
    CHECK_THROWS_AS(gate_range(RateSpec{1, 2, 0.0, 0.3}), Error);
    CHECK_THROWS_AS(gate_range(RateSpec{1, 2, 0.3, 0.6}), Error);
    CHECK_THROWS_AS(regime_from_string("late"), Error);
    CHECK(regime_from_string("ate") == Regime::Ate);
  }
}
