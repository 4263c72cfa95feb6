#pragma once

#include <chrono>
#include <compare>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cpikw {

struct YearMonth {
  int year = 2000;
  int month = 1;  // 1..12

  int ordinal() const { return year * 12 + (month - 1); }
  static YearMonth from_ordinal(int ordinal) { return {ordinal / 12, ordinal % 12 + 1}; }
  YearMonth plus(int months) const { return from_ordinal(ordinal() + months); }
  std::string str() const;
  static YearMonth parse(std::string_view s);

  auto operator<=>(const YearMonth&) const = default;
};

struct DailySeries {
  std::string keyword;
  std::vector<std::pair<std::chrono::year_month_day, double>> observations;

  // Dates strictly increasing; values finite and non-negative.
  void validate() const;
};

enum class SeriesKind { kCpiMom, kSearchIndex, kChangeRate };

std::string_view kind_name(SeriesKind kind);

// Gap-free monthly series starting at `start`.
struct MonthlySeries {
  std::string name;
  SeriesKind kind = SeriesKind::kChangeRate;
  YearMonth start;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  YearMonth month(std::size_t i) const { return start.plus(static_cast<int>(i)); }
  YearMonth last() const { return month(values.size() - 1); }
  void validate() const;
};

enum class CpiTransform { kSubtractBase, kDifference };
enum class IndexTransform { kRatio, kDifference };

std::string_view cpi_transform_name(CpiTransform t);
CpiTransform parse_cpi_transform(std::string_view name);
std::string_view index_transform_name(IndexTransform t);
IndexTransform parse_index_transform(std::string_view name);

// Mean of each calendar month's observations; months with none inside the
// observed range are an error.
MonthlySeries monthly_average(const DailySeries& daily);

// kSubtractBase: raw - 100 (length kept). kDifference: raw_t - raw_{t-1}
// (first month dropped).
MonthlySeries cpi_change(const MonthlySeries& series, CpiTransform mode = CpiTransform::kSubtractBase);

// kRatio: (x_t - x_{t-1}) / x_{t-1}, requires positive values.
// kDifference: x_t - x_{t-1}. The first month is dropped.
MonthlySeries index_change(const MonthlySeries& series, IndexTransform mode = IndexTransform::kRatio);

// value at month t = input at month t-k; first k months dropped.
MonthlySeries lag(const MonthlySeries& series, int k, int max_lag = 12);

// Sample Pearson correlation. Throws on mismatched lengths, fewer than 3
// points, or a constant input.
double pearson(std::span<const double> x, std::span<const double> y);

struct FeatureColumn {
  std::string name;
  int lag = 1;
  std::vector<double> values;
  double correlation = 0.0;

  std::string column_name() const { return name + "__lag" + std::to_string(lag); }
};

struct FeatureMatrix {
  std::vector<YearMonth> months;
  std::vector<FeatureColumn> columns;
  std::vector<double> target;
  std::string target_name = "target";

  Eigen::MatrixXd design() const;
  Eigen::VectorXd response() const;
  std::vector<std::string> column_names() const;

  // Wide CSV: month,target,<keyword>__lag<k>,...
  std::string to_csv() const;
  static FeatureMatrix parse_csv(std::string_view content);
};

struct ScreeningEntry {
  std::string name;
  int lag = 0;
  bool constant = false;
  double correlation = 0.0;
  bool retained = false;
};

struct ScreeningReport {
  std::size_t candidate_count = 0;
  std::size_t retained_count = 0;
  std::size_t observation_count = 0;
  std::vector<ScreeningEntry> entries;
  std::vector<std::string> warnings;

  std::string to_json() const;
};

// Keeps candidates with |r| >= threshold against `target`. Constant
// candidates are dropped with a warning. Throws ErrorCategory::kData when
// nothing survives, listing the strongest correlations.
FeatureMatrix correlation_filter(std::vector<FeatureColumn> candidates, std::span<const double> target,
                                 std::vector<YearMonth> months, double threshold = 0.3,
                                 ScreeningReport* report = nullptr);

struct DesignOptions {
  int max_lag = 12;
  double threshold = 0.3;
  std::size_t min_observations = 3;
};

// Lags each predictor by 1..max_lag, aligns everything on the common month
// range, then screens by correlation with the target.
FeatureMatrix build_design(const MonthlySeries& target, const std::vector<MonthlySeries>& predictors,
                           const DesignOptions& options = {}, ScreeningReport* report = nullptr);

// CSV readers for the external input formats.
std::map<std::string, DailySeries> parse_daily_csv(std::string_view content);
MonthlySeries parse_monthly_csv(std::string_view content, std::string name = "CPI",
                                SeriesKind kind = SeriesKind::kCpiMom);

}  // namespace cpikw
