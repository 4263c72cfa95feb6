#include <cmath>

#include "cpikw/error.hpp"
#include "cpikw/random.hpp"
#include "cpikw/stats.hpp"
#include "doctest.h"
#include "stats_oracle.hpp"

using namespace cpikw;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

oracle::Table to_table(const Eigen::MatrixXd& m) {
  oracle::Table t(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t[i][j] = m(i, j);
  return t;
}

ErrorCategory category_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  return ErrorCategory::kInternal;
}

}  // namespace

TEST_CASE("standardize") {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  auto s = standardize(x);
  CHECK(s.z.col(0).mean() == doctest::Approx(0.0));
  CHECK(std::sqrt(s.z.col(0).squaredNorm() / 2.0) == doctest::Approx(1.0));
  CHECK(s.means(0) == 2.0);
  CHECK(s.scales(0) == doctest::Approx(1.0));

  auto again = standardize(s.z);
  CHECK((again.z - s.z).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::MatrixXd c(4, 2);
  c << 1, 5, 2, 5, 3, 5, 4, 5;
  try {
    standardize(c, {"alpha", "beta"});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::kData);
    CHECK(std::string(e.what()).find("beta") != std::string::npos);
  }
}

TEST_CASE("jacobi eigen matches the characteristic polynomial on 3x3") {
  Eigen::MatrixXd x(4, 3);
  x << 1.0, 2.0, 0.5, 2.0, 1.5, 1.0, 3.5, 3.0, -0.5, 4.0, 5.5, 2.0;
  auto corr = oracle::correlation(to_table(x));
  oracle::Mat3 a{};
  Eigen::MatrixXd ae(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) ae(i, j) = a[i][j] = corr[i][j];

  auto eig = jacobi_eigen(ae);
  auto want = oracle::eigenvalues3(a);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(eig.values(k) - want[k]) < 1e-8);
    auto v = oracle::eigenvector3(a, want[k]);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(eig.vectors(i, k) - v[i]) < 1e-8);
  }

  auto model = pca(x, 3);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(model.eigenvalues(k) - want[k]) < 1e-8);
  CHECK((model.loadings - eig.vectors).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pca structure and invariants") {
  SUBCASE("rank one") {
    Eigen::MatrixXd x(5, 2);
    x << 1, 1, 2, 2, 4, 4, 7, 7, 8, 8;
    auto m = pca(x, 2);
    CHECK(std::abs(m.explained_proportion(0) - 1.0) < 1e-9);
    CHECK(m.n_components == 1);
    CHECK(m.warnings.size() == 1);
  }
  SUBCASE("orthogonal design has equal proportions") {
    Eigen::MatrixXd x(4, 3);
    x << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
    auto m = pca(x, 3);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(m.explained_proportion(k) - 1.0 / 3.0) < 1e-12);
  }
  SUBCASE("orthonormal loadings, reconstruction, uncorrelated scores") {
    auto x = random_matrix(30, 5, 7);
    x.col(1) += 0.8 * x.col(0);
    x.col(3) = 2.0 * x.col(3).array() + 10.0;
    auto m = pca(x, 5);
    CHECK((m.loadings.transpose() * m.loadings - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(m.explained_proportion.sum() - 1.0) < 1e-8);
    for (int k = 1; k < 5; ++k) {
      CHECK(m.explained_proportion(k) <= m.explained_proportion(k - 1));
      CHECK(m.cumulative_proportion(k) == doctest::Approx(m.cumulative_proportion(k - 1) + m.explained_proportion(k)));
    }
    auto scores = project(m, x);
    auto z = standardize(x).z;
    CHECK((scores * m.loadings.transpose() - z).norm() < 1e-8);
    Eigen::MatrixXd centered = scores.rowwise() - scores.colwise().mean();
    Eigen::MatrixXd cov = centered.transpose() * centered / 29.0;
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b)
        if (a != b) CHECK(std::abs(cov(a, b)) < 1e-8);
    for (int k = 0; k < 5; ++k) {
      Eigen::Index arg;
      m.loadings.col(k).cwiseAbs().maxCoeff(&arg);
      CHECK(m.loadings(arg, k) > 0.0);
    }
  }
  SUBCASE("cumulative warning and truncation") {
    auto x = random_matrix(200, 20, 3);
    auto m = pca(x, 6, 0.70);
    CHECK(m.n_components == 6);
    CHECK(m.loadings.cols() == 6);
    CHECK(m.cumulative_proportion.size() == 20);
    CHECK(m.retained_cumulative() < 0.70);
    CHECK(m.warnings.size() == 1);
    auto quiet = pca(x, 6, 0.0);
    CHECK(quiet.warnings.empty());
  }
  SUBCASE("errors") {
    Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(4, 2);
    bad(0, 0) = std::nan("");
    CHECK(category_of([&] { pca(bad); }) == ErrorCategory::kNumeric);
    CHECK(category_of([&] { pca(random_matrix(2, 2, 1)); }) == ErrorCategory::kData);
    auto m = pca(random_matrix(10, 3, 1), 2);
    CHECK(category_of([&] { project(m, random_matrix(10, 4, 1)); }) == ErrorCategory::kInput);
  }
}

TEST_CASE("project matches hand multiplication") {
  Eigen::MatrixXd x(3, 2);
  x << 1, 2, 2, 4, 3, 3;
  auto m = pca(x, 2, 0.0, PcaBasis::kCovariance);
  auto scores = project(m, x);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 2; ++k) {
      double s = (x(i, 0) - 2.0) * m.loadings(0, k) + (x(i, 1) - 3.0) * m.loadings(1, k);
      CHECK(std::abs(scores(i, k) - s) < 1e-12);
    }
}

TEST_CASE("ols agrees with the normal-equation oracle") {
  auto x = random_matrix(25, 3, 21);
  Eigen::VectorXd y(25);
  Rng rng(22);
  for (int i = 0; i < 25; ++i) y(i) = 0.5 + 1.5 * x(i, 0) - 0.7 * x(i, 2) + 0.3 * rng.gaussian();
  auto rep = ols(x, y);
  std::vector<double> yv(y.data(), y.data() + 25);
  auto want = oracle::ols(to_table(x), yv);
  REQUIRE(rep.coefficients.size() == 4);
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs(rep.coefficients[j].estimate - want.beta[j]) < 1e-10);
    CHECK(std::abs(rep.coefficients[j].std_error - want.std_error[j]) < 1e-10);
  }
  CHECK(std::abs(rep.r_squared - want.r_squared) < 1e-10);
  REQUIRE(rep.f_statistic);
  CHECK(std::abs(*rep.f_statistic - want.f_statistic) < 1e-8);
  CHECK(std::abs(*rep.f_statistic - (rep.r_squared / 3) / ((1 - rep.r_squared) / 21)) < 1e-9);
  CHECK(rep.f_p_below_1pct);
  REQUIRE(rep.durbin_watson);
  CHECK(std::abs(*rep.durbin_watson - oracle::durbin_watson(want.residuals)) < 1e-12);
  CHECK(*rep.durbin_watson >= 0.0);
  CHECK(*rep.durbin_watson <= 4.0);
  CHECK(rep.coefficients[0].name == "const");
  CHECK(rep.coefficients[1].name == "PC1");
  CHECK(rep.coefficients[1].stars == "***");

  Eigen::VectorXd e = Eigen::Map<Eigen::VectorXd>(rep.residuals.data(), 25);
  CHECK(std::abs(e.sum()) < 1e-8);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(x.col(j).dot(e)) < 1e-8);

  double prev = -1.0;
  for (int k = 1; k <= 3; ++k) {
    double r2 = ols(x.leftCols(k), y).r_squared;
    CHECK(r2 >= prev - 1e-12);
    prev = r2;
  }
}

TEST_CASE("ols special cases") {
  SUBCASE("perfect fit") {
    auto x = random_matrix(10, 2, 5);
    Eigen::VectorXd y = 1.0 + 2.0 * x.col(0).array() - 3.0 * x.col(1).array();
    auto rep = ols(x, y);
    CHECK(rep.r_squared == 1.0);
    CHECK_FALSE(rep.durbin_watson);
    CHECK_FALSE(rep.f_statistic);
    CHECK_FALSE(rep.coefficients[1].t_stat);
    for (double r : rep.residuals) CHECK(std::abs(r) < 1e-10);
  }
  SUBCASE("independent noise") {
    auto x = random_matrix(120, 6, 100);
    Eigen::VectorXd y = random_matrix(120, 1, 200).col(0);
    auto rep = ols(x, y);
    CHECK(rep.r_squared < 0.1);
    CHECK(*rep.f_statistic < 2.2);
    CHECK_FALSE(rep.f_p_below_1pct);
  }
  SUBCASE("errors") {
    CHECK(category_of([] { ols(random_matrix(3, 2, 1), Eigen::VectorXd::Ones(3)); }) == ErrorCategory::kData);
    Eigen::MatrixXd dup = random_matrix(10, 2, 1);
    dup.col(1) = dup.col(0);
    CHECK(category_of([&] { ols(dup, random_matrix(10, 1, 2).col(0)); }) == ErrorCategory::kNumeric);
  }
  SUBCASE("t-distribution critical value") {
    // Two-sided 5% critical value of t with 10 df is 2.228139.
    Eigen::MatrixXd x(13, 2);
    Rng rng(9);
    for (int i = 0; i < 13; ++i) {
      x(i, 0) = rng.gaussian();
      x(i, 1) = rng.gaussian();
    }
    Eigen::VectorXd y = x.col(0) + random_matrix(13, 1, 10).col(0);
    auto rep = ols(x, y);
    for (const auto& c : rep.coefficients) {
      double t = std::abs(*c.t_stat);
      CHECK((*c.p_value < 0.05) == (t > 2.228139));
    }
  }
}

TEST_CASE("durbin watson") {
  CHECK(durbin_watson({2.0, 2.0, 2.0}) == 0.0);
  for (int n : {2, 5, 10}) {
    std::vector<double> alt;
    for (int i = 0; i < n; ++i) alt.push_back(i % 2 ? -1.0 : 1.0);
    CHECK(std::abs(durbin_watson(alt) - 4.0 * (n - 1) / n) < 1e-12);
  }
  Rng rng(31);
  std::vector<double> e;
  for (int i = 0; i < 400; ++i) e.push_back(rng.gaussian());
  double num = 0, den = 0;
  for (std::size_t t = 0; t < e.size(); ++t) den += e[t] * e[t];
  for (std::size_t t = 1; t < e.size(); ++t) num += e[t] * e[t - 1];
  CHECK(std::abs(durbin_watson(e) - 2.0 * (1.0 - num / den)) < 0.05);
  CHECK(std::abs(durbin_watson(e) - oracle::durbin_watson(e)) < 1e-12);
  CHECK(category_of([] { durbin_watson({1.0}); }) == ErrorCategory::kData);
  CHECK(category_of([] { durbin_watson({0.0, 0.0}); }) == ErrorCategory::kData);
}

TEST_CASE("significance stars") {
  CHECK(significance_stars(0.005) == "***");
  CHECK(significance_stars(0.03) == "**");
  CHECK(significance_stars(0.07) == "*");
  CHECK(significance_stars(0.2).empty());
}

TEST_CASE("compare reports") {
  RegressionReport a, b;
  a.label = "Seed Keywords";
  b.label = "Generate Keywords";
  a.r_squared = 0.481;
  b.r_squared = 0.528;
  a.n_obs = b.n_obs = 120;
  auto c = compare_reports(a, b);
  CHECK(c.higher_r_squared == Winner::kSecond);
  CHECK(c.to_markdown().find("Higher R^2: Generate Keywords") != std::string::npos);
  CHECK(c.to_markdown() == compare_reports(a, b).to_markdown());
  CHECK(c.to_json() == compare_reports(a, b).to_json());

  auto tie = compare_reports(a, a);
  CHECK(tie.higher_r_squared == Winner::kTie);
  CHECK(tie.to_markdown().find("Higher R^2: tie") != std::string::npos);
  CHECK(tie.to_json().find("\"tie\": true") != std::string::npos);
}
