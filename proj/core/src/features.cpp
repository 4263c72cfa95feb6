#include "cpikw/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "cpikw/error.hpp"
#include "cpikw/text.hpp"
#include "json.hpp"

namespace cpikw {

namespace {

int parse_int(std::string_view s, std::string_view what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorCategory::kInput, "invalid " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return value;
}

double parse_double(std::string_view raw, std::string_view what) {
  const std::string trimmed = text::trim(raw);
  std::string_view s = trimmed;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
    fail(ErrorCategory::kInput, "invalid " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::chrono::year_month_day parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
    fail(ErrorCategory::kInput, "invalid date (expected YYYY-MM-DD): '" + std::string(s) + "'");
  }
  std::chrono::year_month_day d{std::chrono::year{parse_int(s.substr(0, 4), "year")},
                                std::chrono::month{static_cast<unsigned>(parse_int(s.substr(5, 2), "month"))},
                                std::chrono::day{static_cast<unsigned>(parse_int(s.substr(8, 2), "day"))}};
  if (!d.ok()) fail(ErrorCategory::kInput, "invalid calendar date: '" + std::string(s) + "'");
  return d;
}

YearMonth month_of(const std::chrono::year_month_day& d) {
  return {static_cast<int>(d.year()), static_cast<int>(static_cast<unsigned>(d.month()))};
}

// Splits one CSV record. Handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) fail(ErrorCategory::kInput, "unterminated quote in CSV line: " + std::string(line));
  return fields;
}

std::string quote_csv(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Non-empty lines, with line numbers, CR stripped.
std::vector<std::pair<std::size_t, std::string_view>> csv_lines(std::string_view content) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  std::size_t line_no = 0;
  while (!content.empty()) {
    auto nl = content.find('\n');
    std::string_view line = content.substr(0, nl);
    content = nl == std::string_view::npos ? std::string_view{} : content.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty()) continue;
    lines.emplace_back(line_no, line);
  }
  return lines;
}

void expect_header(const std::vector<std::pair<std::size_t, std::string_view>>& lines,
                   const std::vector<std::string>& expected) {
  if (lines.empty()) fail(ErrorCategory::kInput, "empty CSV");
  auto header = split_csv(lines.front().second);
  for (auto& h : header) h = std::string(text::trim(h));
  if (header.size() >= 1 && header[0].starts_with("\xEF\xBB\xBF")) header[0] = header[0].substr(3);
  if (header != expected) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    fail(ErrorCategory::kInput, "unexpected CSV header, expected '" + want + "'");
  }
}

}  // namespace

std::string YearMonth::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

YearMonth YearMonth::parse(std::string_view raw) {
  const std::string trimmed = text::trim(raw);
  std::string_view s = trimmed;
  if (s.size() != 7 || s[4] != '-') {
    fail(ErrorCategory::kInput, "invalid month (expected YYYY-MM): '" + std::string(s) + "'");
  }
  YearMonth ym{parse_int(s.substr(0, 4), "year"), parse_int(s.substr(5, 2), "month")};
  if (ym.month < 1 || ym.month > 12) {
    fail(ErrorCategory::kInput, "invalid month (expected YYYY-MM): '" + std::string(s) + "'");
  }
  return ym;
}

void DailySeries::validate() const {
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& [date, value] = observations[i];
    if (!std::isfinite(value) || value < 0.0) {
      fail(ErrorCategory::kInput, "daily series '" + keyword + "' has invalid value " + format_double(value));
    }
    if (i > 0 && !(observations[i - 1].first < date)) {
      fail(ErrorCategory::kInput, "daily series '" + keyword + "' dates are not strictly increasing");
    }
  }
}

std::string_view kind_name(SeriesKind kind) {
  switch (kind) {
    case SeriesKind::kCpiMom: return "cpi_mom";
    case SeriesKind::kSearchIndex: return "search_index";
    case SeriesKind::kChangeRate: return "change_rate";
  }
  return "unknown";
}

void MonthlySeries::validate() const {
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorCategory::kNumeric, "monthly series '" + name + "' has a non-finite value");
  }
}

std::string_view cpi_transform_name(CpiTransform t) {
  return t == CpiTransform::kSubtractBase ? "subtract_base" : "difference";
}

CpiTransform parse_cpi_transform(std::string_view name) {
  if (name == "subtract_base") return CpiTransform::kSubtractBase;
  if (name == "difference") return CpiTransform::kDifference;
  fail(ErrorCategory::kConfig, "unknown cpi transform: " + std::string(name));
}

std::string_view index_transform_name(IndexTransform t) {
  return t == IndexTransform::kRatio ? "ratio" : "difference";
}

IndexTransform parse_index_transform(std::string_view name) {
  if (name == "ratio") return IndexTransform::kRatio;
  if (name == "difference") return IndexTransform::kDifference;
  fail(ErrorCategory::kConfig, "unknown index transform: " + std::string(name));
}

MonthlySeries monthly_average(const DailySeries& daily) {
  daily.validate();
  if (daily.observations.empty()) fail(ErrorCategory::kData, "daily series '" + daily.keyword + "' is empty");
  MonthlySeries out;
  out.name = daily.keyword;
  out.kind = SeriesKind::kSearchIndex;
  out.start = month_of(daily.observations.front().first);
  YearMonth last = month_of(daily.observations.back().first);
  std::size_t n = static_cast<std::size_t>(last.ordinal() - out.start.ordinal() + 1);
  std::vector<double> sums(n, 0.0);
  std::vector<std::size_t> counts(n, 0);
  for (const auto& [date, value] : daily.observations) {
    auto i = static_cast<std::size_t>(month_of(date).ordinal() - out.start.ordinal());
    sums[i] += value;
    ++counts[i];
  }
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i] == 0) {
      fail(ErrorCategory::kData, "daily series '" + daily.keyword + "' has no observations in " + out.month(i).str());
    }
    out.values[i] = sums[i] / static_cast<double>(counts[i]);
  }
  return out;
}

MonthlySeries cpi_change(const MonthlySeries& series, CpiTransform mode) {
  if (series.kind != SeriesKind::kCpiMom) {
    fail(ErrorCategory::kInput, "cpi_change expects a cpi_mom series, got " + std::string(kind_name(series.kind)));
  }
  series.validate();
  MonthlySeries out;
  out.name = series.name;
  out.kind = SeriesKind::kChangeRate;
  if (mode == CpiTransform::kSubtractBase) {
    out.start = series.start;
    out.values.reserve(series.size());
    for (double v : series.values) out.values.push_back(v - 100.0);
  } else {
    if (series.size() < 2) fail(ErrorCategory::kData, "series '" + series.name + "' is shorter than 2 months");
    out.start = series.start.plus(1);
    for (std::size_t t = 1; t < series.size(); ++t) out.values.push_back(series.values[t] - series.values[t - 1]);
  }
  return out;
}

MonthlySeries index_change(const MonthlySeries& series, IndexTransform mode) {
  if (series.kind != SeriesKind::kSearchIndex) {
    fail(ErrorCategory::kInput,
         "index_change expects a search_index series, got " + std::string(kind_name(series.kind)));
  }
  series.validate();
  if (series.size() < 2) fail(ErrorCategory::kData, "series '" + series.name + "' is shorter than 2 months");
  if (mode == IndexTransform::kRatio) {
    for (std::size_t t = 0; t < series.size(); ++t) {
      if (series.values[t] <= 0.0) {
        fail(ErrorCategory::kData, "series '" + series.name + "' has non-positive value in " +
                                       series.month(t).str() + "; change ratio undefined");
      }
    }
  }
  MonthlySeries out;
  out.name = series.name;
  out.kind = SeriesKind::kChangeRate;
  out.start = series.start.plus(1);
  out.values.reserve(series.size() - 1);
  for (std::size_t t = 1; t < series.size(); ++t) {
    double diff = series.values[t] - series.values[t - 1];
    out.values.push_back(mode == IndexTransform::kRatio ? diff / series.values[t - 1] : diff);
  }
  return out;
}

MonthlySeries lag(const MonthlySeries& series, int k, int max_lag) {
  if (k < 1 || k > max_lag) {
    fail(ErrorCategory::kConfig, "lag order " + std::to_string(k) + " out of range [1, " + std::to_string(max_lag) + "]");
  }
  if (series.size() <= static_cast<std::size_t>(k)) {
    fail(ErrorCategory::kData, "series '" + series.name + "' too short for lag " + std::to_string(k));
  }
  MonthlySeries out;
  out.name = series.name + "__lag" + std::to_string(k);
  out.kind = series.kind;
  out.start = series.start.plus(k);
  out.values.assign(series.values.begin(), series.values.end() - k);
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(ErrorCategory::kInput, "pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
                                    std::to_string(y.size()) + ")");
  }
  if (x.size() < 3) fail(ErrorCategory::kData, "pearson: need at least 3 points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorCategory::kData, "pearson: constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Eigen::MatrixXd FeatureMatrix::design() const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(months.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    for (std::size_t i = 0; i < months.size(); ++i) x(i, j) = columns[j].values[i];
  }
  return x;
}

Eigen::VectorXd FeatureMatrix::response() const {
  return Eigen::Map<const Eigen::VectorXd>(target.data(), static_cast<Eigen::Index>(target.size()));
}

std::vector<std::string> FeatureMatrix::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& c : columns) names.push_back(c.column_name());
  return names;
}

std::string FeatureMatrix::to_csv() const {
  std::string out = "month," + quote_csv(target_name);
  for (const auto& c : columns) out += "," + quote_csv(c.column_name());
  out += "\n";
  for (std::size_t i = 0; i < months.size(); ++i) {
    out += months[i].str() + "," + format_double(target[i]);
    for (const auto& c : columns) out += "," + format_double(c.values[i]);
    out += "\n";
  }
  return out;
}

FeatureMatrix FeatureMatrix::parse_csv(std::string_view content) {
  auto lines = csv_lines(content);
  if (lines.empty()) fail(ErrorCategory::kInput, "empty feature CSV");
  auto header = split_csv(lines.front().second);
  if (header.size() < 2 || header[0] != "month") fail(ErrorCategory::kInput, "feature CSV header must start with month,<target>");
  FeatureMatrix fm;
  fm.target_name = header[1];
  for (std::size_t j = 2; j < header.size(); ++j) {
    auto pos = header[j].rfind("__lag");
    if (pos == std::string::npos) fail(ErrorCategory::kInput, "feature column without lag suffix: " + header[j]);
    FeatureColumn col;
    col.name = header[j].substr(0, pos);
    col.lag = parse_int(std::string_view(header[j]).substr(pos + 5), "lag order");
    fm.columns.push_back(std::move(col));
  }
  for (std::size_t r = 1; r < lines.size(); ++r) {
    auto fields = split_csv(lines[r].second);
    if (fields.size() != header.size()) {
      fail(ErrorCategory::kInput, "feature CSV line " + std::to_string(lines[r].first) + ": expected " +
                                      std::to_string(header.size()) + " fields");
    }
    fm.months.push_back(YearMonth::parse(fields[0]));
    fm.target.push_back(parse_double(fields[1], "target value"));
    for (std::size_t j = 2; j < fields.size(); ++j) fm.columns[j - 2].values.push_back(parse_double(fields[j], "feature value"));
  }
  if (fm.months.empty()) fail(ErrorCategory::kInput, "feature CSV has no rows");
  return fm;
}

std::string ScreeningReport::to_json() const {
  nlohmann::ordered_json j;
  j["candidate_count"] = candidate_count;
  j["retained_count"] = retained_count;
  j["observation_count"] = observation_count;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json item;
    item["name"] = e.name;
    item["lag"] = e.lag;
    item["constant"] = e.constant;
    item["r"] = e.constant ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(e.correlation);
    item["retained"] = e.retained;
    j["entries"].push_back(std::move(item));
  }
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

FeatureMatrix correlation_filter(std::vector<FeatureColumn> candidates, std::span<const double> target,
                                 std::vector<YearMonth> months, double threshold, ScreeningReport* report) {
  if (!std::isfinite(threshold) || threshold < 0.0) {
    fail(ErrorCategory::kConfig, "pearson threshold must be finite and non-negative");
  }
  if (months.size() != target.size()) fail(ErrorCategory::kInput, "month vector does not match target length");
  ScreeningReport local;
  ScreeningReport& rep = report ? *report : local;
  rep.candidate_count = candidates.size();
  rep.observation_count = target.size();

  FeatureMatrix out;
  out.months = std::move(months);
  out.target.assign(target.begin(), target.end());
  std::vector<std::pair<double, std::string>> ranked;
  for (auto& c : candidates) {
    if (c.values.size() != target.size()) {
      fail(ErrorCategory::kInput, "candidate " + c.column_name() + " is not aligned with the target");
    }
    ScreeningEntry entry{c.name, c.lag};
    bool constant = std::all_of(c.values.begin(), c.values.end(), [&](double v) { return v == c.values.front(); });
    if (constant) {
      entry.constant = true;
      rep.warnings.push_back("dropped constant candidate " + c.column_name());
    } else {
      c.correlation = pearson(c.values, target);
      entry.correlation = c.correlation;
      entry.retained = std::abs(c.correlation) >= threshold;
      ranked.emplace_back(std::abs(c.correlation), c.column_name());
      if (entry.retained) out.columns.push_back(std::move(c));
    }
    rep.entries.push_back(std::move(entry));
  }
  rep.retained_count = out.columns.size();
  if (out.columns.empty()) {
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::string msg = "no candidate reached |r| >= " + format_double(threshold);
    if (ranked.empty()) msg += " (all candidates constant)";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, ranked.size()); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.4f", ranked[i].first);
      msg += (i == 0 ? "; top |r|: " : ", ") + ranked[i].second + "=" + buf;
    }
    fail(ErrorCategory::kData, msg);
  }
  return out;
}

FeatureMatrix build_design(const MonthlySeries& target, const std::vector<MonthlySeries>& predictors,
                           const DesignOptions& options, ScreeningReport* report) {
  if (options.max_lag < 1) fail(ErrorCategory::kConfig, "max_lag must be at least 1");
  if (predictors.empty()) fail(ErrorCategory::kData, "no predictor series");
  target.validate();
  if (target.values.empty()) fail(ErrorCategory::kData, "target series is empty");

  // Lag-k of a predictor covers [start + k, last]; the widest lag bounds the
  // common range from below.
  int lo = target.start.ordinal();
  int hi = target.last().ordinal();
  for (const auto& p : predictors) {
    p.validate();
    if (p.values.empty()) fail(ErrorCategory::kData, "predictor '" + p.name + "' is empty");
    lo = std::max(lo, p.start.ordinal() + options.max_lag);
    hi = std::min(hi, p.last().ordinal());
  }
  if (hi < lo) fail(ErrorCategory::kData, "empty overlap between target and lagged predictors");
  auto rows = static_cast<std::size_t>(hi - lo + 1);
  if (rows < options.min_observations) {
    fail(ErrorCategory::kData, "insufficient observations: " + std::to_string(rows) + " usable months after lag " +
                                   std::to_string(options.max_lag) + " trimming, need at least " +
                                   std::to_string(options.min_observations));
  }

  std::vector<YearMonth> months;
  for (int m = lo; m <= hi; ++m) months.push_back(YearMonth::from_ordinal(m));
  auto slice = [&](const MonthlySeries& s, int shift) {
    // Value at month m of lag-`shift` series is s at month m - shift.
    auto first = static_cast<std::size_t>(lo - shift - s.start.ordinal());
    return std::vector<double>(s.values.begin() + first, s.values.begin() + first + rows);
  };
  std::vector<FeatureColumn> candidates;
  for (const auto& p : predictors) {
    for (int k = 1; k <= options.max_lag; ++k) candidates.push_back({p.name, k, slice(p, k), 0.0});
  }
  auto y = slice(target, 0);
  auto fm = correlation_filter(std::move(candidates), y, std::move(months), options.threshold, report);
  fm.target_name = target.name;
  return fm;
}

std::map<std::string, DailySeries> parse_daily_csv(std::string_view content) {
  auto lines = csv_lines(content);
  expect_header(lines, {"date", "keyword", "value"});
  std::map<std::string, DailySeries> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    auto fields = split_csv(lines[r].second);
    if (fields.size() != 3) {
      fail(ErrorCategory::kInput, "daily CSV line " + std::to_string(lines[r].first) + ": expected 3 fields");
    }
    std::string keyword(text::trim(fields[1]));
    auto& series = out[keyword];
    series.keyword = keyword;
    series.observations.emplace_back(parse_date(text::trim(fields[0])), parse_double(fields[2], "index value"));
  }
  for (const auto& [kw, s] : out) s.validate();
  return out;
}

MonthlySeries parse_monthly_csv(std::string_view content, std::string name, SeriesKind kind) {
  auto lines = csv_lines(content);
  expect_header(lines, {"month", "value"});
  MonthlySeries s;
  s.name = std::move(name);
  s.kind = kind;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    auto fields = split_csv(lines[r].second);
    if (fields.size() != 2) {
      fail(ErrorCategory::kInput, "monthly CSV line " + std::to_string(lines[r].first) + ": expected 2 fields");
    }
    auto ym = YearMonth::parse(fields[0]);
    if (s.values.empty()) {
      s.start = ym;
    } else if (ym != s.month(s.values.size())) {
      fail(ErrorCategory::kInput, "monthly CSV line " + std::to_string(lines[r].first) + ": expected month " +
                                      s.month(s.values.size()).str() + ", got " + ym.str());
    }
    s.values.push_back(parse_double(fields[1], "monthly value"));
  }
  if (s.values.empty()) fail(ErrorCategory::kInput, "monthly CSV has no rows");
  return s;
}

}  // namespace cpikw
