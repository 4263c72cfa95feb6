#include "cpikw/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "cpikw/error.hpp"
#include "json.hpp"

namespace cpikw {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string column_label(const std::vector<std::string>& names, Eigen::Index j) {
  if (static_cast<std::size_t>(j) < names.size()) return names[static_cast<std::size_t>(j)];
  return "column " + std::to_string(j);
}

void require_finite(const Eigen::MatrixXd& x, std::string_view what) {
  if (!x.allFinite()) fail(ErrorCategory::kNumeric, std::string(what) + " contains non-finite values");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

ordered_json optional_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

Standardized standardize(const Eigen::MatrixXd& x, const std::vector<std::string>& names) {
  require_finite(x, "matrix");
  if (x.rows() < 2) fail(ErrorCategory::kData, "standardize needs at least 2 rows");
  Standardized out;
  out.means = x.colwise().mean().transpose();
  out.z = x.rowwise() - out.means.transpose();
  out.scales.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double sd = std::sqrt(out.z.col(j).squaredNorm() / static_cast<double>(x.rows() - 1));
    if (!(sd > 0.0)) fail(ErrorCategory::kData, "constant column cannot be standardized: " + column_label(names, j));
    out.scales(j) = sd;
    out.z.col(j) /= sd;
  }
  return out;
}

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& input, double tol, int max_sweeps) {
  if (input.rows() != input.cols()) fail(ErrorCategory::kInput, "eigen solver needs a square matrix");
  require_finite(input, "matrix");
  const Eigen::Index n = input.rows();
  Eigen::MatrixXd a = 0.5 * (input + input.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) s += 2.0 * a(p, q) * a(p, q);
    return std::sqrt(s);
  };

  int sweep = 0;
  while (off_norm() > tol * scale) {
    if (++sweep > max_sweeps) fail(ErrorCategory::kNumeric, "Jacobi eigen solver did not converge");
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (apq == 0.0) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    Eigen::VectorXd col = v.col(src);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
      if (std::abs(col(i)) > std::abs(col(arg))) arg = i;
    }
    if (col(arg) < 0.0) col = -col;
    out.vectors.col(k) = col;
  }
  return out;
}

std::string_view basis_name(PcaBasis basis) {
  return basis == PcaBasis::kCorrelation ? "correlation" : "covariance";
}

PcaBasis parse_basis(std::string_view name) {
  if (name == "correlation") return PcaBasis::kCorrelation;
  if (name == "covariance") return PcaBasis::kCovariance;
  fail(ErrorCategory::kConfig, "unknown PCA basis: " + std::string(name));
}

PCAModel pca(const Eigen::MatrixXd& x, int n_components, double min_cumulative, PcaBasis basis,
             const std::vector<std::string>& names) {
  if (n_components < 1) fail(ErrorCategory::kConfig, "n_components must be at least 1");
  require_finite(x, "PCA input");
  if (x.rows() < 3) fail(ErrorCategory::kData, "PCA needs at least 3 rows");
  if (x.cols() < 1) fail(ErrorCategory::kData, "PCA needs at least 1 column");

  PCAModel model;
  model.basis = basis;
  Eigen::MatrixXd z;
  if (basis == PcaBasis::kCorrelation) {
    auto s = standardize(x, names);
    z = std::move(s.z);
    model.means = std::move(s.means);
    model.scales = std::move(s.scales);
  } else {
    model.means = x.colwise().mean().transpose();
    model.scales = Eigen::VectorXd::Ones(x.cols());
    z = x.rowwise() - model.means.transpose();
  }
  Eigen::MatrixXd c = z.transpose() * z / static_cast<double>(x.rows() - 1);
  auto eig = jacobi_eigen(c);

  model.eigenvalues = eig.values.cwiseMax(0.0);
  double total = model.eigenvalues.sum();
  if (!(total > 0.0)) fail(ErrorCategory::kData, "PCA input has no variance");
  model.explained_proportion = model.eigenvalues / total;
  model.cumulative_proportion.resize(model.explained_proportion.size());
  double run = 0.0;
  for (Eigen::Index i = 0; i < model.explained_proportion.size(); ++i) {
    run += model.explained_proportion(i);
    model.cumulative_proportion(i) = run;
  }

  int usable = 0;
  for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i) {
    if (model.eigenvalues(i) > 1e-10 * model.eigenvalues(0)) ++usable;
  }
  model.n_components = std::min(n_components, usable);
  if (model.n_components < n_components) {
    model.warnings.push_back("only " + std::to_string(usable) + " usable components, " +
                             std::to_string(n_components) + " requested");
  }
  if (model.retained_cumulative() < min_cumulative) {
    model.warnings.push_back("first " + std::to_string(model.n_components) + " components explain " +
                             fixed(100.0 * model.retained_cumulative(), 1) + "% (< " +
                             fixed(100.0 * min_cumulative, 1) + "%)");
  }
  model.loadings = eig.vectors.leftCols(model.n_components);
  return model;
}

Eigen::MatrixXd project(const PCAModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.loadings.rows()) {
    fail(ErrorCategory::kInput, "project: expected " + std::to_string(model.loadings.rows()) + " columns, got " +
                                    std::to_string(x.cols()));
  }
  require_finite(x, "projection input");
  Eigen::MatrixXd z = x.rowwise() - model.means.transpose();
  z = z.array().rowwise() / model.scales.transpose().array();
  return z * model.loadings;
}

std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

double durbin_watson(const std::vector<double>& e) {
  if (e.size() < 2) fail(ErrorCategory::kData, "Durbin-Watson needs at least 2 residuals");
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < e.size(); ++t) {
    den += e[t] * e[t];
    if (t > 0) num += (e[t] - e[t - 1]) * (e[t] - e[t - 1]);
  }
  if (!(den > 0.0)) fail(ErrorCategory::kData, "Durbin-Watson undefined for all-zero residuals");
  return num / den;
}

RegressionReport ols(const Eigen::MatrixXd& scores, const Eigen::VectorXd& y, const std::vector<std::string>& names) {
  const Eigen::Index n = scores.rows();
  const Eigen::Index k = scores.cols();
  if (y.size() != n) fail(ErrorCategory::kInput, "ols: response length does not match design rows");
  if (k < 1) fail(ErrorCategory::kData, "ols: no regressors");
  if (n <= k + 1) {
    fail(ErrorCategory::kData, "insufficient observations for regression: n=" + std::to_string(n) + " with " +
                                   std::to_string(k) + " regressors");
  }
  require_finite(scores, "regressors");
  require_finite(y, "response");

  Eigen::MatrixXd a(n, k + 1);
  a.col(0).setOnes();
  a.rightCols(k) = scores;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < k + 1) fail(ErrorCategory::kNumeric, "singular regression design (rank " + std::to_string(qr.rank()) + ")");
  Eigen::VectorXd beta = qr.solve(y);
  Eigen::VectorXd resid = y - a * beta;

  const double ybar = y.mean();
  const double sst = (y.array() - ybar).square().sum();
  if (!(sst > 0.0)) fail(ErrorCategory::kData, "ols: response is constant");
  const double ssr = resid.squaredNorm();
  const auto df = static_cast<double>(n - k - 1);

  RegressionReport rep;
  rep.n_obs = static_cast<std::size_t>(n);
  rep.residuals.assign(resid.data(), resid.data() + n);
  const bool perfect = ssr <= 1e-20 * sst;
  rep.r_squared = perfect ? 1.0 : std::clamp(1.0 - ssr / sst, 0.0, 1.0);

  // (A'A)^-1 = P R^-1 R^-T P'
  Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k + 1, k + 1).triangularView<Eigen::Upper>();
  Eigen::MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k + 1, k + 1));
  Eigen::MatrixXd inv_perm = rinv * rinv.transpose();
  Eigen::MatrixXd xtx_inv = qr.colsPermutation() * inv_perm * qr.colsPermutation().transpose();
  const double sigma2 = ssr / df;
  boost::math::students_t tdist(df);

  for (Eigen::Index j = 0; j <= k; ++j) {
    Coefficient c;
    c.name = j == 0 ? "const" : (static_cast<std::size_t>(j - 1) < names.size() ? names[j - 1] : "PC" + std::to_string(j));
    c.estimate = beta(j);
    c.std_error = std::sqrt(std::max(0.0, sigma2 * xtx_inv(j, j)));
    if (!perfect && c.std_error > 0.0) {
      c.t_stat = c.estimate / c.std_error;
      c.p_value = 2.0 * boost::math::cdf(boost::math::complement(tdist, std::abs(*c.t_stat)));
      c.stars = significance_stars(*c.p_value);
    }
    rep.coefficients.push_back(std::move(c));
  }

  if (perfect) {
    rep.warnings.push_back("perfect fit: t, F and Durbin-Watson statistics not applicable");
  } else {
    const double kk = static_cast<double>(k);
    rep.f_statistic = (rep.r_squared / kk) / ((1.0 - rep.r_squared) / df);
    boost::math::fisher_f fdist(kk, df);
    rep.f_p_value = boost::math::cdf(boost::math::complement(fdist, *rep.f_statistic));
    rep.f_p_below_1pct = *rep.f_p_value < 0.01;
    rep.durbin_watson = durbin_watson(rep.residuals);
  }
  return rep;
}

std::string RegressionReport::to_json() const {
  ordered_json j;
  j["label"] = label;
  j["n_obs"] = n_obs;
  j["coefficients"] = ordered_json::array();
  for (const auto& c : coefficients) {
    ordered_json item;
    item["name"] = c.name;
    item["estimate"] = c.estimate;
    item["std_error"] = c.std_error;
    item["t_stat"] = optional_json(c.t_stat);
    item["p_value"] = optional_json(c.p_value);
    item["stars"] = c.stars;
    j["coefficients"].push_back(std::move(item));
  }
  j["r_squared"] = r_squared;
  j["f_statistic"] = optional_json(f_statistic);
  j["f_p_value"] = optional_json(f_p_value);
  j["f_p_below_1pct"] = f_p_below_1pct;
  j["durbin_watson"] = optional_json(durbin_watson);
  j["cumulative_pca_proportion"] = cumulative_pca_proportion;
  j["warnings"] = warnings;
  j["residuals"] = residuals;
  return j.dump(2);
}

RegressionReport RegressionReport::parse_json(std::string_view json_text) {
  auto opt = [](const ordered_json& v) -> std::optional<double> {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  try {
    auto j = ordered_json::parse(json_text);
    RegressionReport r;
    r.label = j.at("label").get<std::string>();
    r.n_obs = j.at("n_obs").get<std::size_t>();
    for (const auto& c : j.at("coefficients")) {
      r.coefficients.push_back({c.at("name").get<std::string>(), c.at("estimate").get<double>(),
                                c.at("std_error").get<double>(), opt(c.at("t_stat")), opt(c.at("p_value")),
                                c.at("stars").get<std::string>()});
    }
    r.r_squared = j.at("r_squared").get<double>();
    r.f_statistic = opt(j.at("f_statistic"));
    r.f_p_value = opt(j.at("f_p_value"));
    r.f_p_below_1pct = j.at("f_p_below_1pct").get<bool>();
    r.durbin_watson = opt(j.at("durbin_watson"));
    r.cumulative_pca_proportion = j.at("cumulative_pca_proportion").get<std::vector<double>>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (j.contains("residuals")) r.residuals = j.at("residuals").get<std::vector<double>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kInput, std::string("malformed regression report: ") + e.what());
  }
}

Comparison compare_reports(RegressionReport first, RegressionReport second) {
  Comparison c;
  if (first.r_squared > second.r_squared) {
    c.higher_r_squared = Winner::kFirst;
  } else if (second.r_squared > first.r_squared) {
    c.higher_r_squared = Winner::kSecond;
  }
  c.first = std::move(first);
  c.second = std::move(second);
  return c;
}

std::string Comparison::to_markdown() const {
  const std::size_t rows = std::max(first.coefficients.size(), second.coefficients.size());
  auto coef_cell = [](const RegressionReport& r, std::size_t i) -> std::string {
    if (i >= r.coefficients.size()) return "";
    return fixed(r.coefficients[i].estimate, 4) + r.coefficients[i].stars;
  };
  auto cum_cell = [](const RegressionReport& r, std::size_t i) -> std::string {
    if (i == 0 || i > r.cumulative_pca_proportion.size()) return "";
    return fixed(r.cumulative_pca_proportion[i - 1], 4);
  };
  auto opt_cell = [](const std::optional<double>& v, int digits, std::string_view suffix = "") -> std::string {
    return v ? fixed(*v, digits) + std::string(suffix) : "n/a";
  };

  std::string out = header;
  if (!out.empty() && out.back() != '\n') out += "\n";
  if (!out.empty()) out += "\n";
  out += "| Term | " + first.label + " coefficient | " + first.label + " cumulative proportion | " + second.label +
         " coefficient | " + second.label + " cumulative proportion |\n";
  out += "|---|---:|---:|---:|---:|\n";
  for (std::size_t i = 0; i < rows; ++i) {
    std::string term = i == 0 ? "const" : std::to_string(i);
    out += "| " + term + " | " + coef_cell(first, i) + " | " + cum_cell(first, i) + " | " + coef_cell(second, i) +
           " | " + cum_cell(second, i) + " |\n";
  }
  auto f_cell = [&](const RegressionReport& r) {
    return opt_cell(r.f_statistic, 2, r.f_p_below_1pct ? " (p<0.01)" : "");
  };
  out += "| F statistic | " + f_cell(first) + " | | " + f_cell(second) + " | |\n";
  out += "| DW statistic | " + opt_cell(first.durbin_watson, 3) + " | | " + opt_cell(second.durbin_watson, 3) + " | |\n";
  out += "| R^2 | " + fixed(first.r_squared, 3) + " | | " + fixed(second.r_squared, 3) + " | |\n";
  out += "| Sample size | " + std::to_string(first.n_obs) + " | | " + std::to_string(second.n_obs) + " | |\n";
  out += "\nNote: *, **, *** mark the 10%, 5% and 1% significance levels.\n\n";
  switch (higher_r_squared) {
    case Winner::kFirst: out += "Higher R^2: " + first.label + "\n"; break;
    case Winner::kSecond: out += "Higher R^2: " + second.label + "\n"; break;
    case Winner::kTie: out += "Higher R^2: tie\n"; break;
  }
  auto cum_note = [](const RegressionReport& r) {
    return r.cumulative_pca_proportion.empty() ? std::string("n/a") : fixed(r.cumulative_pca_proportion.back(), 4);
  };
  out += "Cumulative PCA proportion of retained components: " + first.label + " " + cum_note(first) + ", " +
         second.label + " " + cum_note(second) + "\n";
  return out;
}

std::string Comparison::to_json() const {
  ordered_json j;
  j["first"] = ordered_json::parse(first.to_json());
  j["second"] = ordered_json::parse(second.to_json());
  j["higher_r_squared"] = higher_r_squared == Winner::kFirst    ? first.label
                          : higher_r_squared == Winner::kSecond ? second.label
                                                                : std::string("tie");
  j["tie"] = higher_r_squared == Winner::kTie;
  return j.dump(2) + "\n";
}

}  // namespace cpikw
