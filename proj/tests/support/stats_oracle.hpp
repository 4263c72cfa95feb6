#pragma once

// Loop-based reference implementations for the statistics kernels. Kept
// independent of Eigen's decompositions on purpose.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace oracle {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Table = std::vector<std::vector<double>>;  // row-major

// Raw-sum Pearson formula.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// Sample correlation matrix of the columns.
inline Table correlation(const Table& x) {
  const std::size_t n = x.size(), p = x[0].size();
  std::vector<double> mean(p, 0.0), sd(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) mean[j] += x[i][j];
    mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) sd[j] += (x[i][j] - mean[j]) * (x[i][j] - mean[j]);
    sd[j] = std::sqrt(sd[j] / static_cast<double>(n - 1));
  }
  Table c(p, std::vector<double>(p, 0.0));
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += (x[i][a] - mean[a]) * (x[i][b] - mean[b]);
      c[a][b] = s / static_cast<double>(n - 1) / (sd[a] * sd[b]);
    }
  return c;
}

// Roots of the characteristic polynomial det(A - l I) of a symmetric 3x3,
// via the trigonometric form of the cubic. Descending.
inline std::array<double, 3> eigenvalues3(const Mat3& a) {
  const double q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
  const double p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
  const double p2 = (a[0][0] - q) * (a[0][0] - q) + (a[1][1] - q) * (a[1][1] - q) + (a[2][2] - q) * (a[2][2] - q) + 2 * p1;
  const double p = std::sqrt(p2 / 6.0);
  if (p == 0.0) return {q, q, q};
  Mat3 b{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b[i][j] = (a[i][j] - (i == j ? q : 0.0)) / p;
  const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                     b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
  const double r = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double l1 = q + 2 * p * std::cos(phi);
  const double l3 = q + 2 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  const double l2 = 3 * q - l1 - l3;
  return {l1, l2, l3};
}

// Null vector of (A - l I) from the largest cross product of its rows,
// normalized with its largest-magnitude entry positive.
inline std::array<double, 3> eigenvector3(const Mat3& a, double l) {
  Mat3 m = a;
  for (int i = 0; i < 3; ++i) m[i][i] -= l;
  auto cross = [](const std::array<double, 3>& u, const std::array<double, 3>& v) {
    return std::array<double, 3>{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
  };
  std::array<std::array<double, 3>, 3> cands{cross(m[0], m[1]), cross(m[0], m[2]), cross(m[1], m[2])};
  std::array<double, 3> best{};
  double best_norm = -1;
  for (const auto& c : cands) {
    double nrm = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
    if (nrm > best_norm) {
      best_norm = nrm;
      best = c;
    }
  }
  int arg = 0;
  for (int i = 0; i < 3; ++i) {
    best[i] /= best_norm;
    if (std::abs(best[i]) > std::abs(best[arg])) arg = i;
  }
  if (best[arg] < 0)
    for (auto& v : best) v = -v;
  return best;
}

// Gauss-Jordan inverse with partial pivoting.
inline Table inverse(Table a) {
  const std::size_t n = a.size();
  Table inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (a[piv][c] == 0.0) throw std::runtime_error("singular");
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    const double d = a[c][c];
    for (std::size_t j = 0; j < n; ++j) {
      a[c][j] /= d;
      inv[c][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[c][j];
        inv[r][j] -= f * inv[c][j];
      }
    }
  }
  return inv;
}

struct OlsFit {
  std::vector<double> beta;  // intercept first
  std::vector<double> std_error;
  std::vector<double> residuals;
  double r_squared = 0;
  double f_statistic = 0;
};

// Normal equations with an intercept column.
inline OlsFit ols(const Table& x, const std::vector<double>& y) {
  const std::size_t n = x.size(), k = x[0].size(), m = k + 1;
  auto row = [&](std::size_t i, std::size_t j) { return j == 0 ? 1.0 : x[i][j - 1]; };
  Table xtx(m, std::vector<double>(m, 0.0));
  std::vector<double> xty(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < m; ++a) {
      xty[a] += row(i, a) * y[i];
      for (std::size_t b = 0; b < m; ++b) xtx[a][b] += row(i, a) * row(i, b);
    }
  const Table inv = inverse(xtx);
  OlsFit fit;
  fit.beta.assign(m, 0.0);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) fit.beta[a] += inv[a][b] * xty[b];
  double ybar = 0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  double ssr = 0, sst = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0;
    for (std::size_t a = 0; a < m; ++a) pred += fit.beta[a] * row(i, a);
    fit.residuals.push_back(y[i] - pred);
    ssr += (y[i] - pred) * (y[i] - pred);
    sst += (y[i] - ybar) * (y[i] - ybar);
  }
  const double df = static_cast<double>(n - k - 1);
  for (std::size_t a = 0; a < m; ++a) fit.std_error.push_back(std::sqrt(ssr / df * inv[a][a]));
  fit.r_squared = 1.0 - ssr / sst;
  fit.f_statistic = ((sst - ssr) / static_cast<double>(k)) / (ssr / df);
  return fit;
}

inline double durbin_watson(const std::vector<double>& e) {
  double num = 0, den = 0;
  for (std::size_t t = 0; t < e.size(); ++t) den += e[t] * e[t];
  for (std::size_t t = 1; t < e.size(); ++t) num += (e[t] - e[t - 1]) * (e[t] - e[t - 1]);
  return num / den;
}

}  // namespace oracle
