#include <doctest.h>

#include <set>
#include <sstream>

#include "drgate/data.hpp"
#include "drgate/error.hpp"
#include "helpers.hpp"

using namespace drgate;

namespace {

ColumnRoles roles(std::vector<std::string> z = {"x1"}) {
  ColumnRoles r;
  r.outcome = "y";
  r.treatment = "d";
  r.moderators = std::move(z);
  return r;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Aggregate;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("minimal csv") {
    std::istringstream in("y,d,x1\n1.5,0,0.1\n2,1,0.2\n0.5,0,0.3\n3,1,0.4\n");
    const Dataset ds = read_csv(in, roles());
    CHECK(ds.n() == 4);
    CHECK(ds.lambda_x() == 1);
    CHECK(ds.lambda_z() == 1);
    CHECK(ds.treated_count() == 2);
    CHECK(ds.y()[1] == 2.0);
  }

  TEST_CASE("treatment outside {0,1} is a validation error") {
    std::istringstream in("y,d,x1\n1,0,0.1\n2,2,0.2\n0.5,0,0.3\n3,1,0.4\n");
    CHECK(kind_of([&] { read_csv(in, roles()); }) == ErrorKind::Validation);
  }

  TEST_CASE("missing column names the column") {
    std::istringstream in("y,d,x1\n1,0,0.1\n2,1,0.2\n0.5,0,0.3\n3,1,0.4\n");
    auto r = roles({"age"});
    try {
      read_csv(in, r);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Configuration);
      CHECK(std::string(e.what()).find("'age'") != std::string::npos);
    }
  }

  TEST_CASE("non-numeric cell reports line and column") {
    ColumnRoles r = roles();
    r.confounders = std::vector<std::string>{"x1"};
    std::istringstream in("y,d,x1\n1,0,0.1\nfoo,1,0.2\n0.5,0,0.3\n3,1,0.4\n");
    try {
      read_csv(in, r);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Parse);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
      CHECK(std::string(e.what()).find("'y'") != std::string::npos);
    }
  }

  TEST_CASE("missing values are rejected") {
    std::istringstream in("y,d,x1\n1,0,0.1\n2,1,\n0.5,0,0.3\n3,1,0.4\n");
    CHECK(kind_of([&] { read_csv(in, roles()); }) == ErrorKind::Validation);
  }

  TEST_CASE("categorical column is one-hot encoded with the first level dropped") {
    std::istringstream in("y,d,x1,g\n1,0,0.1,b\n2,1,0.2,a\n0.5,0,0.3,c\n3,1,0.4,a\n");
    const Dataset ds = read_csv(in, roles());
    CHECK(ds.lambda_x() == 3);
    const auto& names = ds.x_names();
    CHECK(std::find(names.begin(), names.end(), "g=b") != names.end());
    CHECK(std::find(names.begin(), names.end(), "g=c") != names.end());
    CHECK(std::find(names.begin(), names.end(), "g=a") == names.end());
    const auto gb = ds.column_index("g=b");
    CHECK(ds.x()(0, static_cast<Eigen::Index>(gb)) == 1.0);
    CHECK(ds.x()(1, static_cast<Eigen::Index>(gb)) == 0.0);
  }

  TEST_CASE("dataset invariants") {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(4), d(4);
    d << 0, 1, 0, 1;
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 2);
    CHECK_NOTHROW(Dataset(y, d, x, {1}));
    CHECK_THROWS_AS(Dataset(y, d, x, {2}), Error);
    CHECK_THROWS_AS(Dataset(y, d, x, {0, 0}), Error);
    CHECK_THROWS_AS(Dataset(y, Eigen::VectorXd::Zero(4), x, {0}), Error);
    Eigen::VectorXd bad = y;
    bad[2] = std::nan("");
    CHECK_THROWS_AS(Dataset(bad, d, x, {0}), Error);
    CHECK_THROWS_AS(Dataset(y.head(3), d, x, {0}), Error);
  }

  TEST_CASE("expand_features column counts") {
    const Dataset two = testing::toy_dataset(8, 2, 3);
    CHECK(expand_features(two, 2, false).lambda_x() == 4);
    CHECK(expand_features(two, 4, true).lambda_x() == 9);
    const Dataset three = testing::toy_dataset(8, 3, 4);
    const Dataset e = expand_features(three, 1, true);
    CHECK(e.lambda_x() == 6);
    CHECK(e.z_cols() == three.z_cols());
    CHECK(e.base_columns() == 3);
    std::set<std::string> names(e.x_names().begin(), e.x_names().end());
    CHECK(names.size() == e.x_names().size());
    CHECK_THROWS_AS(expand_features(three, 4, true, 5), Error);
  }

  TEST_CASE("expanded powers and products are correct") {
    const Dataset two = testing::toy_dataset(6, 2, 5);
    const Dataset e = expand_features(two, 3, true);
    const auto& x = two.x();
    const auto& ex = e.x();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto cube = ex(i, static_cast<Eigen::Index>(e.column_index(e.x_names()[0] + "^3")));
      CHECK(cube == doctest::Approx(std::pow(x(i, 0), 3)).epsilon(1e-14));
    }
    // Enumeration oracle for the count: p*degree + p(p-1)/2.
    for (int p = 1; p <= 4; ++p)
      for (int deg = 1; deg <= 4; ++deg) {
        const Dataset ds = testing::toy_dataset(6, static_cast<std::size_t>(p), 7);
        CHECK(expand_features(ds, deg, true).lambda_x() == static_cast<std::size_t>(p * deg + p * (p - 1) / 2));
      }
  }

  TEST_CASE("csv round trip is bit identical") {
    Dataset ds = testing::toy_dataset(30, 3, 11);
    std::ostringstream out;
    write_csv(ds, out);
    std::istringstream in(out.str());
    ColumnRoles r;
    r.outcome = ds.y_name();
    r.treatment = ds.d_name();
    r.moderators = {ds.x_names()[0]};
    const Dataset back = read_csv(in, r);
    CHECK(back.y() == ds.y());
    CHECK(back.d() == ds.d());
    CHECK(back.x() == ds.x());
  }

  TEST_CASE("make_folds sizes and determinism") {
    const auto a = make_folds(10, 2, 42);
    CHECK(a.fold_sizes() == std::vector<std::size_t>{5, 5});
    auto b = make_folds(11, 2, 42).fold_sizes();
    std::sort(b.begin(), b.end());
    CHECK(b == std::vector<std::size_t>{5, 6});
    CHECK(make_folds(10, 2, 42).assignments == a.assignments);
    CHECK(make_folds(10, 2, 43).assignments != a.assignments);
    CHECK_THROWS_AS(make_folds(3, 4, 1), Error);
    CHECK_THROWS_AS(make_folds(10, 1, 1), Error);
  }

  TEST_CASE("fold plans are balanced partitions") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      const std::size_t n = 7 + seed * 3;
      const int folds = 2 + static_cast<int>(seed % 4);
      const auto plan = make_folds(n, folds, seed);
      const auto sizes = plan.fold_sizes();
      CHECK(sizes.size() == static_cast<std::size_t>(folds));
      CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
      std::size_t total = 0;
      for (int f = 1; f <= folds; ++f) {
        total += plan.rows_in(f).size();
        CHECK(plan.rows_in(f).size() + plan.rows_outside(f).size() == n);
      }
      CHECK(total == n);
      for (int label : plan.assignments) CHECK((label >= 1 && label <= folds));
    }
  }

  TEST_CASE("stratified folds spread both arms") {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(40);
    for (int i = 0; i < 9; ++i) d[i * 4] = 1;
    const auto plan = make_stratified_folds(d, 3, 5);
    for (int f = 1; f <= 3; ++f) {
      double treated = 0;
      for (auto r : plan.rows_in(f)) treated += d[static_cast<Eigen::Index>(r)];
      CHECK(treated == 3);
    }
    const auto sizes = plan.fold_sizes();
    CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
  }
}
