#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cpikw {

struct Standardized {
  Eigen::MatrixXd z;
  Eigen::VectorXd means;
  Eigen::VectorXd scales;
};

// Column z-scores using the sample standard deviation. A constant column is
// an error naming that column (names optional).
Standardized standardize(const Eigen::MatrixXd& x, const std::vector<std::string>& names = {});

struct SymmetricEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns, largest-magnitude entry positive
};

// Cyclic Jacobi rotations until the off-diagonal norm drops below tol.
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& a, double tol = 1e-12, int max_sweeps = 100);

enum class PcaBasis { kCorrelation, kCovariance };

std::string_view basis_name(PcaBasis basis);
PcaBasis parse_basis(std::string_view name);

struct PCAModel {
  PcaBasis basis = PcaBasis::kCorrelation;
  Eigen::VectorXd means;
  Eigen::VectorXd scales;
  Eigen::MatrixXd loadings;  // columns are components
  Eigen::VectorXd eigenvalues;
  Eigen::VectorXd explained_proportion;   // every component
  Eigen::VectorXd cumulative_proportion;  // every component
  int n_components = 0;
  std::vector<std::string> warnings;

  double retained_cumulative() const { return n_components ? cumulative_proportion(n_components - 1) : 0.0; }
};

// Principal components of the sample correlation (or covariance) matrix of
// x. Keeps at most n_components usable components.
PCAModel pca(const Eigen::MatrixXd& x, int n_components = 6, double min_cumulative = 0.70,
             PcaBasis basis = PcaBasis::kCorrelation, const std::vector<std::string>& names = {});

Eigen::MatrixXd project(const PCAModel& model, const Eigen::MatrixXd& x);

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  std::optional<double> t_stat;
  std::optional<double> p_value;
  std::string stars;
};

struct RegressionReport {
  std::string label;
  std::vector<Coefficient> coefficients;  // intercept first
  double r_squared = 0.0;
  std::optional<double> f_statistic;
  std::optional<double> f_p_value;
  bool f_p_below_1pct = false;
  std::optional<double> durbin_watson;
  std::size_t n_obs = 0;
  std::vector<double> cumulative_pca_proportion;
  std::vector<double> residuals;
  std::vector<std::string> warnings;

  std::string to_json() const;
  static RegressionReport parse_json(std::string_view json_text);
};

// "***" p<0.01, "**" p<0.05, "*" p<0.10.
std::string significance_stars(double p_value);

// Least squares with intercept. A perfect fit reports R^2 = 1 and leaves the
// t, F and DW statistics empty.
RegressionReport ols(const Eigen::MatrixXd& scores, const Eigen::VectorXd& y,
                     const std::vector<std::string>& names = {});

double durbin_watson(const std::vector<double>& residuals);

enum class Winner { kFirst, kSecond, kTie };

struct Comparison {
  RegressionReport first;
  RegressionReport second;
  Winner higher_r_squared = Winner::kTie;
  std::string header;  // free text placed above the table

  std::string to_markdown() const;
  std::string to_json() const;
};

Comparison compare_reports(RegressionReport first, RegressionReport second);

}  // namespace cpikw
