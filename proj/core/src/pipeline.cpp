#include "cpikw/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "cpikw/digest.hpp"
#include "cpikw/error.hpp"
#include "cpikw/lm/checkpoint.hpp"
#include "cpikw/lm/vocabulary.hpp"
#include "cpikw/random.hpp"
#include "cpikw/text.hpp"
#include "json.hpp"

namespace cpikw {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kIngest: return "ingest";
    case Stage::kTrain: return "train";
    case Stage::kSimilar: return "similar";
    case Stage::kImportant: return "important";
    case Stage::kExpand: return "expand";
    case Stage::kFeatures: return "features";
    case Stage::kAnalyze: return "analyze";
    case Stage::kReport: return "report";
  }
  return "unknown";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::kIngest, Stage::kTrain,    Stage::kSimilar, Stage::kImportant,
                                         Stage::kExpand, Stage::kFeatures, Stage::kAnalyze, Stage::kReport};
  return stages;
}

Stage parse_stage(std::string_view name) {
  for (Stage s : all_stages()) {
    if (stage_name(s) == name) return s;
  }
  fail(ErrorCategory::kConfig, "unknown stage: " + std::string(name));
}

std::string_view second_model_name(SecondModel m) {
  return m == SecondModel::kUnion ? "union" : "generated_only";
}

SecondModel parse_second_model(std::string_view name) {
  if (name == "union") return SecondModel::kUnion;
  if (name == "generated_only") return SecondModel::kGeneratedOnly;
  fail(ErrorCategory::kConfig, "unknown second model: " + std::string(name));
}

fs::path PipelineConfig::Paths::resolve(const std::string& p) const {
  fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

// ---------------------------------------------------------------------------
// Config schema

namespace {

std::string_view length_unit_name(LengthUnit u) {
  return u == LengthUnit::kCharacters ? "characters" : "tokens";
}

LengthUnit parse_length_unit(std::string_view name) {
  if (name == "characters") return LengthUnit::kCharacters;
  if (name == "tokens") return LengthUnit::kWhitespaceTokens;
  fail(ErrorCategory::kConfig, "unknown length unit: " + std::string(name));
}

struct Field {
  std::string key;
  std::vector<Stage> stages;  // stages whose artifacts depend on this key
  // Returns an error message, or empty on success.
  std::function<std::string(const json&, PipelineConfig&)> set;
  std::function<json(const PipelineConfig&)> get;
};

std::string render(double v) {
  return json(v).dump();
}

template <typename T, typename Access>
Field integer_field(std::string key, std::vector<Stage> stages, Access access, long long lo, long long hi) {
  Field f{key, std::move(stages), nullptr, nullptr};
  f.set = [key, access, lo, hi](const json& v, PipelineConfig& c) -> std::string {
    if (!v.is_number_integer()) return key + " must be an integer";
    const bool huge = v.is_number_unsigned() &&
                      v.get<unsigned long long>() > static_cast<unsigned long long>(std::numeric_limits<long long>::max());
    const long long x = huge ? 0 : v.get<long long>();
    if (huge || x < lo || x > hi) {
      return key + " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]: " + v.dump();
    }
    access(c) = static_cast<T>(x);
    return {};
  };
  f.get = [access](const PipelineConfig& c) { return json(access(const_cast<PipelineConfig&>(c))); };
  return f;
}

template <typename Access>
Field real_field(std::string key, std::vector<Stage> stages, Access access, double lo, double hi, bool lo_open,
                 bool hi_open) {
  Field f{key, std::move(stages), nullptr, nullptr};
  f.set = [=](const json& v, PipelineConfig& c) -> std::string {
    if (!v.is_number()) return key + " must be a number";
    double x = v.get<double>();
    bool ok = std::isfinite(x) && (lo_open ? x > lo : x >= lo) && (hi_open ? x < hi : x <= hi);
    if (!ok) {
      return key + " out of range " + (lo_open ? "(" : "[") + render(lo) + ", " +
             (std::isinf(hi) ? std::string("inf") : render(hi)) + (hi_open ? ")" : "]") + ": " + v.dump();
    }
    access(c) = x;
    return {};
  };
  f.get = [access](const PipelineConfig& c) { return json(access(const_cast<PipelineConfig&>(c))); };
  return f;
}

template <typename Access>
Field string_field(std::string key, std::vector<Stage> stages, Access access, bool allow_empty) {
  Field f{key, std::move(stages), nullptr, nullptr};
  f.set = [key, access, allow_empty](const json& v, PipelineConfig& c) -> std::string {
    if (!v.is_string()) return key + " must be a string";
    if (!allow_empty && v.get<std::string>().empty()) return key + " must not be empty";
    access(c) = v.get<std::string>();
    return {};
  };
  f.get = [access](const PipelineConfig& c) { return json(access(const_cast<PipelineConfig&>(c))); };
  return f;
}

template <typename Access, typename Parse, typename Name>
Field enum_field(std::string key, std::vector<Stage> stages, Access access, Parse parse, Name name) {
  Field f{key, std::move(stages), nullptr, nullptr};
  f.set = [key, access, parse](const json& v, PipelineConfig& c) -> std::string {
    if (!v.is_string()) return key + " must be a string";
    try {
      access(c) = parse(v.get<std::string>());
    } catch (const Error&) {
      return key + " has unknown value " + v.dump();
    }
    return {};
  };
  f.get = [access, name](const PipelineConfig& c) {
    return json(std::string(name(access(const_cast<PipelineConfig&>(c)))));
  };
  return f;
}

template <typename Access>
Field bool_field(std::string key, std::vector<Stage> stages, Access access) {
  Field f{key, std::move(stages), nullptr, nullptr};
  f.set = [key, access](const json& v, PipelineConfig& c) -> std::string {
    if (!v.is_boolean()) return key + " must be true or false";
    access(c) = v.get<bool>();
    return {};
  };
  f.get = [access](const PipelineConfig& c) { return json(access(const_cast<PipelineConfig&>(c))); };
  return f;
}

const std::vector<Field>& schema() {
  using S = Stage;
  constexpr long long kBig = 1'000'000'000;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(string_field("paths.corpus", {S::kIngest}, [](PipelineConfig& c) -> auto& { return c.paths.corpus; }, false));
    f.push_back(string_field("paths.seeds", {S::kIngest}, [](PipelineConfig& c) -> auto& { return c.paths.seeds; }, false));
    f.push_back(string_field("paths.lm_corpus", {S::kIngest}, [](PipelineConfig& c) -> auto& { return c.paths.lm_corpus; }, true));
    f.push_back(string_field("paths.lexicon", {S::kSimilar}, [](PipelineConfig& c) -> auto& { return c.paths.lexicon; }, true));
    f.push_back(string_field("paths.daily_index", {S::kFeatures}, [](PipelineConfig& c) -> auto& { return c.paths.daily_index; }, false));
    f.push_back(string_field("paths.target", {S::kFeatures}, [](PipelineConfig& c) -> auto& { return c.paths.target; }, false));
    f.push_back(string_field("paths.output_dir", {}, [](PipelineConfig& c) -> auto& { return c.paths.output_dir; }, false));

    f.push_back(integer_field<std::size_t>("corpus.min_length", {S::kIngest}, [](PipelineConfig& c) -> auto& { return c.min_length; }, 1, kBig));
    f.push_back(integer_field<std::size_t>("corpus.max_length", {S::kIngest}, [](PipelineConfig& c) -> auto& { return c.max_length; }, 1, kBig));
    f.push_back(enum_field("corpus.length_unit", {S::kIngest}, [](PipelineConfig& c) -> auto& { return c.length_unit; },
                           parse_length_unit, length_unit_name));
    f.push_back(bool_field("corpus.strict", {S::kIngest}, [](PipelineConfig& c) -> auto& { return c.strict; }));

    f.push_back(integer_field<int>("model.n_layers", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.model.n_layers; }, 1, 64));
    f.push_back(integer_field<int>("model.d_model", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.model.d_model; }, 1, 4096));
    f.push_back(integer_field<int>("model.n_heads", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.model.n_heads; }, 1, 256));
    f.push_back(integer_field<int>("model.d_ff", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.model.d_ff; }, 1, 16384));
    f.push_back(integer_field<int>("model.max_seq_len", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.model.max_seq_len; }, 2, 65536));

    f.push_back(integer_field<int>("train.steps", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.train.steps; }, 0, kBig));
    f.push_back(integer_field<int>("train.batch_size", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.train.batch_size; }, 1, 65536));
    f.push_back(real_field("train.learning_rate", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.train.learning_rate; }, 0, 10, true, false));
    f.push_back(enum_field("train.optimizer", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.train.optimizer; },
                           lm::parse_optimizer, lm::optimizer_name));
    f.push_back(real_field("train.momentum", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.train.momentum; }, 0, 1, false, true));
    f.push_back(real_field("train.beta2", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.train.beta2; }, 0, 1, false, true));
    f.push_back(real_field("train.adam_epsilon", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.train.adam_epsilon; }, 0, 1, true, false));
    f.push_back(real_field("train.grad_clip", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.train.grad_clip; }, 0, kInf, false, true));
    f.push_back(real_field("train.init_scale", {S::kTrain}, [](PipelineConfig& c) -> auto& { return c.train.init_scale; }, 0, 10, true, false));

    f.push_back(string_field("prompt.task_label", {S::kTrain, S::kImportant}, [](PipelineConfig& c) -> auto& { return c.prompt.task_label; }, true));
    f.push_back(string_field("prompt.abstract_label", {S::kTrain, S::kImportant}, [](PipelineConfig& c) -> auto& { return c.prompt.abstract_label; }, true));
    f.push_back(string_field("prompt.keywords_label", {S::kTrain, S::kImportant}, [](PipelineConfig& c) -> auto& { return c.prompt.keywords_label; }, true));

    f.push_back(real_field("similarity.threshold", {S::kSimilar}, [](PipelineConfig& c) -> auto& { return c.similarity.threshold; }, -1, 1, false, false));
    f.push_back(enum_field("similarity.pooling", {S::kSimilar}, [](PipelineConfig& c) -> auto& { return c.similarity.pooling; },
                           parse_pooling, pooling_name));
    f.push_back(enum_field("similarity.candidates", {S::kSimilar}, [](PipelineConfig& c) -> auto& { return c.similarity.candidates; },
                           parse_candidate_source, candidate_source_name));

    f.push_back(integer_field<int>("robustness.n_runs", {S::kImportant}, [](PipelineConfig& c) -> auto& { return c.robustness.n_runs; }, 1, 1000));
    f.push_back(enum_field("robustness.strategy", {S::kImportant}, [](PipelineConfig& c) -> auto& { return c.robustness.strategy; },
                           lm::parse_strategy, lm::strategy_name));
    f.push_back(integer_field<std::size_t>("robustness.max_new", {S::kImportant}, [](PipelineConfig& c) -> auto& { return c.robustness.max_new; }, 1, 65536));
    f.push_back(real_field("robustness.temperature", {S::kImportant}, [](PipelineConfig& c) -> auto& { return c.robustness.temperature; }, 0, 100, true, false));

    f.push_back(integer_field<int>("features.max_lag", {S::kFeatures}, [](PipelineConfig& c) -> auto& { return c.max_lag; }, 1, 60));
    f.push_back(real_field("features.pearson_threshold", {S::kFeatures}, [](PipelineConfig& c) -> auto& { return c.pearson_threshold; }, 0, 1, false, false));
    f.push_back(enum_field("features.cpi_transform", {S::kFeatures}, [](PipelineConfig& c) -> auto& { return c.cpi_transform; },
                           parse_cpi_transform, cpi_transform_name));
    f.push_back(enum_field("features.index_transform", {S::kFeatures}, [](PipelineConfig& c) -> auto& { return c.index_transform; },
                           parse_index_transform, index_transform_name));

    f.push_back(integer_field<int>("stats.n_components", {S::kAnalyze}, [](PipelineConfig& c) -> auto& { return c.n_components; }, 1, 1000));
    f.push_back(real_field("stats.min_cumulative", {S::kAnalyze}, [](PipelineConfig& c) -> auto& { return c.min_cumulative; }, 0, 1, false, false));
    f.push_back(enum_field("stats.pca_basis", {S::kAnalyze}, [](PipelineConfig& c) -> auto& { return c.pca_basis; }, parse_basis, basis_name));
    f.push_back(enum_field("stats.second_model", {S::kFeatures}, [](PipelineConfig& c) -> auto& { return c.second_model; },
                           parse_second_model, second_model_name));

    f.push_back(string_field("report.first_label", {S::kAnalyze}, [](PipelineConfig& c) -> auto& { return c.first_label; }, false));
    f.push_back(string_field("report.second_label", {S::kAnalyze}, [](PipelineConfig& c) -> auto& { return c.second_label; }, false));

    f.push_back(integer_field<std::uint64_t>("rng_seed", {S::kTrain, S::kImportant},
                                             [](PipelineConfig& c) -> auto& { return c.rng_seed; }, 0,
                                             std::numeric_limits<long long>::max()));
    return f;
  }();
  return fields;
}

void flatten(const json& obj, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object()) {
      flatten(it.value(), key, out);
    } else {
      out.emplace_back(key, it.value());
    }
  }
}

std::vector<std::string> cross_check(const PipelineConfig& c) {
  std::vector<std::string> errors;
  if (c.min_length > c.max_length) errors.push_back("corpus.min_length must not exceed corpus.max_length");
  if (c.model.d_model % c.model.n_heads != 0) errors.push_back("model.d_model must be divisible by model.n_heads");
  if (c.robustness.max_new + 2 > static_cast<std::size_t>(c.model.max_seq_len)) {
    errors.push_back("robustness.max_new must leave room for a prompt within model.max_seq_len");
  }
  return errors;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

void apply_entries(PipelineConfig& cfg, const std::vector<std::pair<std::string, json>>& entries,
                   std::vector<std::string>& errors) {
  for (const auto& [key, value] : entries) {
    auto it = std::find_if(schema().begin(), schema().end(), [&](const Field& f) { return f.key == key; });
    if (it == schema().end()) {
      errors.push_back("unknown config key: " + key);
      continue;
    }
    std::string err = it->set(value, cfg);
    if (!err.empty()) {
      errors.push_back(err);
    } else {
      cfg.overrides[key] = value.dump();
    }
  }
}

void raise_if(const std::vector<std::string>& errors) {
  if (errors.empty()) return;
  fail(ErrorCategory::kConfig, std::to_string(errors.size()) + " config error(s): " + join(errors, "; "));
}

}  // namespace

std::string PipelineConfig::to_json() const {
  json j = json::object();
  std::vector<const Field*> sorted;
  for (const Field& f : schema()) sorted.push_back(&f);
  std::sort(sorted.begin(), sorted.end(), [](const Field* a, const Field* b) { return a->key < b->key; });
  for (const Field* f : sorted) j[f->key] = f->get(*this);
  return j.dump(2) + "\n";
}

std::vector<std::pair<std::string, std::string>> config_schema() {
  PipelineConfig defaults;
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : schema()) out.emplace_back(f.key, f.get(defaults).dump());
  return out;
}

PipelineConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  PipelineConfig cfg;
  cfg.paths.base_dir = base_dir;
  if (text::trim(json_text).empty()) return cfg;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCategory::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCategory::kConfig, "config must be a JSON object");
  std::vector<std::pair<std::string, json>> entries;
  flatten(doc, "", entries);
  std::vector<std::string> errors;
  apply_entries(cfg, entries, errors);
  auto cross = cross_check(cfg);
  errors.insert(errors.end(), cross.begin(), cross.end());
  raise_if(errors);
  return cfg;
}

PipelineConfig validate_config(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCategory::kConfig, "config file not found: " + path.string());
  fs::path base = path.parent_path();
  return parse_config(read_file(path), base.empty() ? fs::path(".") : base);
}

void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& assignments) {
  std::vector<std::pair<std::string, json>> entries;
  std::vector<std::string> errors;
  for (const std::string& a : assignments) {
    auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) {
      errors.push_back("override must look like key=value: " + a);
      continue;
    }
    std::string key = text::trim(std::string_view(a).substr(0, eq));
    std::string raw = text::trim(std::string_view(a).substr(eq + 1));
    // Bare words are taken as strings.
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    entries.emplace_back(key, value);
  }
  apply_entries(cfg, entries, errors);
  auto cross = cross_check(cfg);
  errors.insert(errors.end(), cross.begin(), cross.end());
  raise_if(errors);
}

std::string stage_config_hash(Stage stage, const PipelineConfig& cfg) {
  json j = json::object();
  for (const Field& f : schema()) {
    if (std::find(f.stages.begin(), f.stages.end(), stage) != f.stages.end()) j[f.key] = f.get(cfg);
  }
  return sha256_hex(std::string(stage_name(stage)) + "\n" + j.dump());
}

// ---------------------------------------------------------------------------
// Manifest and stage context

namespace {

constexpr const char* kManifest = "manifest.json";

std::vector<Stage> direct_deps(Stage stage, const PipelineConfig& cfg) {
  switch (stage) {
    case Stage::kIngest: return {};
    case Stage::kTrain: return {Stage::kIngest};
    case Stage::kSimilar:
      if (cfg.similarity.candidates == CandidateSource::kExtractedKeywords) {
        return {Stage::kIngest, Stage::kTrain, Stage::kImportant};
      }
      return {Stage::kIngest, Stage::kTrain};
    case Stage::kImportant: return {Stage::kIngest, Stage::kTrain};
    case Stage::kExpand: return {Stage::kSimilar, Stage::kImportant};
    case Stage::kFeatures: return {Stage::kIngest, Stage::kExpand};
    case Stage::kAnalyze: return {Stage::kFeatures};
    case Stage::kReport: return {Stage::kIngest, Stage::kExpand, Stage::kFeatures, Stage::kAnalyze};
  }
  return {};
}

std::vector<Stage> ancestors(Stage stage, const PipelineConfig& cfg) {
  std::set<Stage> seen;
  std::vector<Stage> todo = direct_deps(stage, cfg);
  while (!todo.empty()) {
    Stage s = todo.back();
    todo.pop_back();
    if (!seen.insert(s).second) continue;
    for (Stage d : direct_deps(s, cfg)) todo.push_back(d);
  }
  return {seen.begin(), seen.end()};
}

json load_manifest(const fs::path& dir) {
  fs::path p = dir / kManifest;
  if (!fs::exists(p)) return json{{"version", 1}, {"stages", json::object()}};
  try {
    json j = json::parse(read_file(p));
    if (!j.is_object() || !j.contains("stages")) throw std::runtime_error("missing stages");
    return j;
  } catch (const std::exception& e) {
    fail(ErrorCategory::kStale, "manifest " + p.string() + " is unreadable: " + e.what());
  }
}

class StageContext {
 public:
  StageContext(Stage stage, const PipelineConfig& cfg, const RunOptions& options)
      : stage_(stage), cfg_(cfg), dir_(cfg.output_dir()) {
    fs::create_directories(dir_);
    check_upstream(options.force);
  }

  const PipelineConfig& cfg() const { return cfg_; }

  std::string read_artifact(const std::string& name) {
    fs::path p = dir_ / name;
    if (!fs::exists(p)) fail(ErrorCategory::kInput, "missing upstream artifact: " + p.string());
    std::string bytes = read_file(p);
    inputs_["artifact:" + name] = sha256_hex(bytes);
    return bytes;
  }

  bool has_artifact(const std::string& name) const { return fs::exists(dir_ / name); }

  std::string read_external(const std::string& configured, std::string_view what) {
    fs::path p = cfg_.paths.resolve(configured);
    if (!fs::exists(p)) fail(ErrorCategory::kInput, std::string(what) + " not found: " + p.string());
    std::string bytes = read_file(p);
    inputs_["file:" + configured] = sha256_hex(bytes);
    return bytes;
  }

  void write(const std::string& name, std::string_view bytes) {
    write_file(dir_ / name, bytes);
    outputs_[name] = sha256_hex(bytes);
    result_.outputs.push_back(name);
  }

  void warn(std::string msg) { result_.warnings.push_back(std::move(msg)); }
  void warn_all(const std::vector<std::string>& msgs) {
    for (const auto& m : msgs) warn(m);
  }

  StageResult finish() {
    json manifest = load_manifest(dir_);
    json entry = json::object();
    entry["config_hash"] = stage_config_hash(stage_, cfg_);
    entry["inputs"] = json(inputs_);
    entry["outputs"] = json(outputs_);
    manifest["stages"][std::string(stage_name(stage_))] = entry;
    write_file(dir_ / kManifest, manifest.dump(2) + "\n");
    result_.stage = stage_;
    return result_;
  }

 private:
  void check_upstream(bool force) {
    json manifest = load_manifest(dir_);
    const json& stages = manifest["stages"];
    for (Stage up : ancestors(stage_, cfg_)) {
      const std::string name(stage_name(up));
      if (!stages.contains(name)) {
        fail(ErrorCategory::kInput, "missing upstream artifact: stage '" + name + "' has not been run in " + dir_.string());
      }
      if (force) continue;
      const json& entry = stages[name];
      auto stale = [&](const std::string& why) {
        fail(ErrorCategory::kStale, "stage '" + name + "' is stale: " + why + " (rerun it, or pass --force)");
      };
      if (entry.value("config_hash", "") != stage_config_hash(up, cfg_)) stale("configuration changed since it ran");
      for (const auto& [file, sha] : entry["outputs"].items()) {
        fs::path p = dir_ / file;
        if (!fs::exists(p)) fail(ErrorCategory::kInput, "missing upstream artifact: " + p.string());
        if (sha256_file(p) != sha.get<std::string>()) stale("artifact " + file + " does not match its recorded hash");
      }
      for (const auto& [key, sha] : entry["inputs"].items()) {
        fs::path p = key.starts_with("artifact:") ? dir_ / key.substr(9) : cfg_.paths.resolve(key.substr(5));
        if (!fs::exists(p) || sha256_file(p) != sha.get<std::string>()) stale("input " + key + " changed since it ran");
      }
    }
    if (force) warn("--force: upstream staleness checks skipped");
  }

  Stage stage_;
  const PipelineConfig& cfg_;
  fs::path dir_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  StageResult result_{};
};

// ---------------------------------------------------------------------------
// Stage bodies

std::vector<std::string> union_words(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto* list : {&a, &b}) {
    for (const auto& w : *list) {
      if (seen.insert(w).second) out.push_back(w);
    }
  }
  return out;
}

Corpus corpus_artifact(StageContext& ctx, const std::string& name) {
  return parse_corpus(ctx.read_artifact(name), name);
}

std::vector<std::string> training_texts(const Corpus& corpus, const Corpus* extra, const PromptTemplate& tmpl) {
  std::vector<std::string> texts;
  for (const Document& d : corpus) texts.push_back(render_training_text(d, tmpl));
  if (extra) {
    for (const Document& d : *extra) texts.push_back(d.text);
  }
  return texts;
}

struct ModelBundle {
  lm::DecoderWeights weights;
  lm::Vocabulary vocab;
};

ModelBundle model_artifact(StageContext& ctx) {
  ModelBundle b{lm::parse_weights(ctx.read_artifact("model.ckpt")), lm::Vocabulary::parse(ctx.read_artifact("vocab.txt"))};
  if (static_cast<std::size_t>(b.weights.config.vocab_size) != b.vocab.size()) {
    fail(ErrorCategory::kStale, "model.ckpt and vocab.txt disagree on vocabulary size");
  }
  return b;
}

void run_ingest(StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  SeedKeywords seeds = cfg.paths.seeds == "builtin" ? builtin_seed_keywords()
                                                    : parse_seed_keywords(ctx.read_external(cfg.paths.seeds, "seed file"));
  LoadOptions opts{cfg.strict, cfg.length_unit};
  std::vector<std::string> warnings;
  Corpus raw = parse_corpus(ctx.read_external(cfg.paths.corpus, "corpus"), cfg.paths.corpus, opts, &warnings);
  Corpus kept = filter_length(raw, cfg.min_length, cfg.max_length);
  if (kept.empty()) {
    fail(ErrorCategory::kData, "no corpus document within length bounds [" + std::to_string(cfg.min_length) + ", " +
                                   std::to_string(cfg.max_length) + "]");
  }
  json report = json::object();
  report["documents_read"] = raw.size();
  report["documents_retained"] = kept.size();
  json per_keyword = json::object();
  for (const auto& [kw, pos] : kept.keyword_index()) per_keyword[kw] = pos.size();
  report["retained_per_keyword"] = per_keyword;
  std::vector<std::string> unmatched;
  for (const Document& d : kept) {
    if (!seeds.contains(d.keyword)) unmatched.push_back(d.keyword);
  }
  std::sort(unmatched.begin(), unmatched.end());
  unmatched.erase(std::unique(unmatched.begin(), unmatched.end()), unmatched.end());
  for (const auto& kw : unmatched) warnings.push_back("corpus keyword '" + kw + "' is not a seed keyword");

  if (!cfg.paths.lm_corpus.empty()) {
    Corpus extra = parse_corpus(ctx.read_external(cfg.paths.lm_corpus, "LM corpus"), cfg.paths.lm_corpus, opts, &warnings);
    report["lm_documents"] = extra.size();
    ctx.write("lm_corpus.jsonl", serialize_corpus(extra));
  }
  report["warnings"] = warnings;
  ctx.warn_all(warnings);
  ctx.write("corpus.jsonl", serialize_corpus(kept));
  ctx.write("seeds.json", serialize_seed_keywords(seeds));
  ctx.write("ingest_report.json", report.dump(2) + "\n");
}

void run_train(StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  Corpus corpus = corpus_artifact(ctx, "corpus.jsonl");
  std::optional<Corpus> extra;
  if (!cfg.paths.lm_corpus.empty()) extra = corpus_artifact(ctx, "lm_corpus.jsonl");
  std::vector<std::string> texts = training_texts(corpus, extra ? &*extra : nullptr, cfg.prompt);

  std::vector<std::string> vocab_texts = texts;
  vocab_texts.push_back(build_prompt("x", cfg.prompt) + ", ");
  lm::Vocabulary vocab = lm::Vocabulary::build(vocab_texts);

  lm::ModelConfig mc = cfg.model;
  mc.vocab_size = static_cast<int>(vocab.size());
  mc.rng_seed = derive_seed(cfg.rng_seed, "model", 0);
  lm::TrainState state = lm::train(texts, vocab, mc, cfg.train);
  lm::TrainingData data = lm::TrainingData::from_texts(texts, vocab);

  json report = json::object();
  report["parameters"] = state.weights.parameter_count();
  report["vocab_size"] = vocab.size();
  report["training_texts"] = texts.size();
  report["steps"] = state.step;
  report["final_mean_nll"] = lm::mean_nll(data, state.weights);
  json history = json::array();
  for (const auto& [step, loss] : state.loss_history) history.push_back(json::array({step, loss}));
  report["loss_history"] = history;

  ctx.write("model.ckpt", lm::serialize_weights(state.weights));
  ctx.write("vocab.txt", vocab.serialize());
  ctx.write("train_report.json", report.dump(2) + "\n");
}

KeywordSet keyword_set_artifact(StageContext& ctx, const std::string& name) {
  return parse_keyword_set(ctx.read_artifact(name));
}

std::string perspective_file(std::string_view prefix, Perspective p) {
  return std::string(prefix) + "_" + std::string(perspective_name(p)) + ".json";
}

constexpr Perspective kPerspectives[] = {Perspective::kMacro, Perspective::kMicro};

void run_similar(StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  Corpus corpus = corpus_artifact(ctx, "corpus.jsonl");
  SeedKeywords seeds = parse_seed_keywords(ctx.read_artifact("seeds.json"));
  ModelBundle model = model_artifact(ctx);

  Lexicon lexicon;
  if (!cfg.paths.lexicon.empty()) lexicon = Lexicon::parse(ctx.read_external(cfg.paths.lexicon, "lexicon"));
  const Lexicon* lex = lexicon.empty() ? nullptr : &lexicon;

  std::vector<std::string> candidates;
  if (cfg.similarity.candidates == CandidateSource::kCorpusVocabulary) {
    std::set<std::string> words;
    for (const Document& d : corpus) {
      for (auto& w : segment(d.text, lex)) words.insert(std::move(w));
    }
    candidates.assign(words.begin(), words.end());
  } else {
    std::set<std::string> words;
    for (Perspective p : kPerspectives) {
      for (const auto& w : keyword_set_artifact(ctx, perspective_file("important", p)).words) words.insert(w);
    }
    candidates.assign(words.begin(), words.end());
  }

  std::vector<std::string> all_words = union_words(union_words(seeds.macro, seeds.micro), candidates);
  auto vectors = vectorize_all(all_words, corpus.documents(), model.weights, model.vocab, cfg.similarity.pooling, lex);

  json report = json::object();
  for (Perspective p : kPerspectives) {
    std::vector<std::string> present;
    for (const auto& s : seeds.of(p)) {
      if (vectors.count(s)) {
        present.push_back(s);
      } else {
        ctx.warn("seed '" + s + "' does not occur in the corpus; no vector");
      }
    }
    std::vector<std::string> usable;
    for (const auto& c : candidates) {
      if (vectors.count(c)) usable.push_back(c);
    }
    const std::string name = "similar_" + std::string(perspective_name(p));
    SimilarSelection sel;
    if (present.empty()) {
      sel.set = make_keyword_set(name, KeywordTag::kSimilar, p, {});
      ctx.warn("no " + std::string(perspective_name(p)) + " seed has a vector; similar set is empty");
    } else {
      // Candidates are restricted to this perspective's vocabulary minus every seed.
      std::vector<std::string> filtered;
      for (const auto& c : usable) {
        if (!seeds.contains(c)) filtered.push_back(c);
      }
      sel = similar_select(present, filtered, vectors, cfg.similarity, name, p);
    }
    json matches = json::array();
    for (const auto& m : sel.matches) matches.push_back({{"word", m.word}, {"best_seed", m.best_seed}, {"score", m.score}});
    report[std::string(perspective_name(p))] = {{"seeds_with_vectors", present.size()},
                                                {"candidates", usable.size()},
                                                {"selected", sel.set.words.size()},
                                                {"matches", matches}};
    ctx.write(perspective_file("similar", p), serialize_keyword_set(sel.set));
  }
  ctx.write("similar_report.json", report.dump(2) + "\n");
}

void run_important(StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  Corpus corpus = corpus_artifact(ctx, "corpus.jsonl");
  SeedKeywords seeds = parse_seed_keywords(ctx.read_artifact("seeds.json"));
  ModelBundle model = model_artifact(ctx);
  RobustnessConfig rc = cfg.robustness;
  rc.seed = derive_seed(cfg.rng_seed, "robustness", 0);
  std::vector<std::string> excluded = union_words(seeds.macro, seeds.micro);

  json report = json::object();
  for (Perspective p : kPerspectives) {
    Corpus sub;
    for (const Document& d : corpus) {
      const auto& list = seeds.of(p);
      if (std::find(list.begin(), list.end(), d.keyword) != list.end()) sub.add(d);
    }
    const std::string name = "important_" + std::string(perspective_name(p));
    KeywordSet set;
    ExtractionReport ex;
    if (sub.empty()) {
      set = make_keyword_set(name, KeywordTag::kImportant, p, {});
      ctx.warn("no " + std::string(perspective_name(p)) + " documents; important set is empty");
    } else {
      set = importance_select(sub, model.weights, model.vocab, cfg.prompt, rc, excluded, name, p, &ex);
      ctx.warn_all(ex.warnings);
    }
    report[std::string(perspective_name(p))] = json::parse(ex.to_json());
    ctx.write(perspective_file("important", p), serialize_keyword_set(set));
  }
  ctx.write("extraction_report.json", report.dump(2) + "\n");
}

void run_expand(StageContext& ctx) {
  json report = json::object();
  for (Perspective p : kPerspectives) {
    KeywordSet similar = keyword_set_artifact(ctx, perspective_file("similar", p));
    KeywordSet important = keyword_set_artifact(ctx, perspective_file("important", p));
    std::vector<std::string> warnings;
    KeywordSet generated = expand(similar, important, "generated_" + std::string(perspective_name(p)), &warnings);
    ctx.warn_all(warnings);
    report[std::string(perspective_name(p))] = {{"similar", similar.words.size()},
                                                {"important", important.words.size()},
                                                {"generated", generated.words}};
    ctx.write(perspective_file("generated", p), serialize_keyword_set(generated));
  }
  ctx.write("expand_report.json", report.dump(2) + "\n");
}

struct PredictorSet {
  std::vector<MonthlySeries> series;
  json summary = json::object();
};

PredictorSet predictors_for(const std::vector<std::string>& words, const std::map<std::string, DailySeries>& daily,
                            IndexTransform mode, StageContext& ctx, const std::string& label) {
  PredictorSet out;
  std::vector<std::string> used, missing, dropped;
  for (const auto& w : words) {
    auto it = daily.find(w);
    if (it == daily.end()) {
      missing.push_back(w);
      continue;
    }
    try {
      out.series.push_back(index_change(monthly_average(it->second), mode));
      used.push_back(w);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::kData) throw;
      dropped.push_back(w);
      ctx.warn(label + ": dropped '" + w + "': " + e.what());
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    ctx.warn(label + ": no search index series for " + list);
  }
  out.summary = {{"keywords", words}, {"used", used}, {"missing", missing}, {"dropped", dropped}};
  if (out.series.empty()) fail(ErrorCategory::kData, label + ": no keyword has a usable search index series");
  return out;
}

void run_features(StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  SeedKeywords seeds = parse_seed_keywords(ctx.read_artifact("seeds.json"));
  std::vector<std::string> generated;
  for (Perspective p : kPerspectives) {
    generated = union_words(generated, keyword_set_artifact(ctx, perspective_file("generated", p)).words);
  }
  auto daily = parse_daily_csv(ctx.read_external(cfg.paths.daily_index, "daily index CSV"));
  MonthlySeries target = parse_monthly_csv(ctx.read_external(cfg.paths.target, "target CSV"), "CPI");
  MonthlySeries change = cpi_change(target, cfg.cpi_transform);

  const std::vector<std::string> seed_words = union_words(seeds.macro, seeds.micro);
  const std::vector<std::string> second_words =
      cfg.second_model == SecondModel::kUnion ? union_words(seed_words, generated) : generated;
  if (second_words.empty()) fail(ErrorCategory::kData, "second model has no keywords (no generated keywords)");

  DesignOptions opts{cfg.max_lag, cfg.pearson_threshold, 3};
  json summary = json::object();
  const std::pair<const char*, const std::vector<std::string>*> models[] = {{"seed", &seed_words},
                                                                           {"expanded", &second_words}};
  for (const auto& [tag, words] : models) {
    PredictorSet ps = predictors_for(*words, daily, cfg.index_transform, ctx, tag);
    ScreeningReport screening;
    FeatureMatrix fm = build_design(change, ps.series, opts, &screening);
    ctx.warn_all(screening.warnings);
    summary[tag] = ps.summary;
    ctx.write(std::string("features_") + tag + ".csv", fm.to_csv());
    ctx.write(std::string("screening_") + tag + ".json", screening.to_json());
  }
  ctx.write("predictors.json", summary.dump(2) + "\n");
}

void run_analyze(StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  const std::pair<const char*, const std::string*> models[] = {{"seed", &cfg.first_label},
                                                               {"expanded", &cfg.second_label}};
  for (const auto& [tag, label] : models) {
    FeatureMatrix fm = FeatureMatrix::parse_csv(ctx.read_artifact(std::string("features_") + tag + ".csv"));
    PCAModel model = pca(fm.design(), cfg.n_components, cfg.min_cumulative, cfg.pca_basis, fm.column_names());
    Eigen::MatrixXd scores = project(model, fm.design());
    RegressionReport rep = ols(scores, fm.response());
    rep.label = *label;
    for (int k = 0; k < model.n_components; ++k) rep.cumulative_pca_proportion.push_back(model.cumulative_proportion(k));
    rep.warnings.insert(rep.warnings.begin(), model.warnings.begin(), model.warnings.end());
    ctx.warn_all(rep.warnings);
    ctx.write(std::string("regression_") + tag + ".json", rep.to_json() + "\n");
  }
}

std::string words_line(const std::vector<std::string>& words) {
  if (words.empty()) return "(none)";
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : ", ") + w;
  return out;
}

void run_report(StageContext& ctx) {
  const auto& cfg = ctx.cfg();
  SeedKeywords seeds = parse_seed_keywords(ctx.read_artifact("seeds.json"));
  auto first = RegressionReport::parse_json(ctx.read_artifact("regression_seed.json"));
  auto second = RegressionReport::parse_json(ctx.read_artifact("regression_expanded.json"));
  json screening_seed = json::parse(ctx.read_artifact("screening_seed.json"));
  json screening_expanded = json::parse(ctx.read_artifact("screening_expanded.json"));
  FeatureMatrix fm = FeatureMatrix::parse_csv(ctx.read_artifact("features_expanded.csv"));

  std::string header = "# CPI regression report\n\n## Configuration\n\n";
  if (cfg.overrides.empty()) {
    header += "All parameters at their defaults.\n";
  } else {
    header += "Overrides of default values:\n\n";
    for (const auto& [key, value] : cfg.overrides) header += "- `" + key + "` = `" + value + "`\n";
  }
  header += "\n## Keywords\n\n";
  header += "- Seed keywords (macro): " + words_line(seeds.macro) + "\n";
  header += "- Seed keywords (micro): " + words_line(seeds.micro) + "\n";
  json generated = json::object();
  for (Perspective p : kPerspectives) {
    KeywordSet g = keyword_set_artifact(ctx, perspective_file("generated", p));
    header += "- Generated keywords (" + std::string(perspective_name(p)) + "): " + words_line(g.words) + "\n";
    generated[std::string(perspective_name(p))] = g.words;
  }
  header += "\n## Features\n\n";
  header += "- Observations: " + std::to_string(fm.months.size()) + " months (" + fm.months.front().str() + " to " +
            fm.months.back().str() + ")\n";
  header += "- " + first.label + ": " + screening_seed["retained_count"].dump() + " of " +
            screening_seed["candidate_count"].dump() + " lagged predictors retained\n";
  header += "- " + second.label + ": " + screening_expanded["retained_count"].dump() + " of " +
            screening_expanded["candidate_count"].dump() + " lagged predictors retained\n";
  std::vector<std::string> warnings;
  for (const auto* r : {&first, &second}) {
    for (const auto& w : r->warnings) warnings.push_back(r->label + ": " + w);
  }
  if (!warnings.empty()) {
    header += "\n## Warnings\n\n";
    for (const auto& w : warnings) header += "- " + w + "\n";
  }
  header += "\n## Principal component regression\n";

  Comparison cmp = compare_reports(std::move(first), std::move(second));
  cmp.header = header;
  json out = json::object();
  out["overrides"] = json(cfg.overrides);
  out["config"] = json::parse(cfg.to_json());
  out["generated_keywords"] = generated;
  out["observations"] = fm.months.size();
  out["comparison"] = json::parse(cmp.to_json());
  ctx.write("report.md", cmp.to_markdown());
  ctx.write("report.json", out.dump(2) + "\n");
}

}  // namespace

StageResult run_stage(Stage stage, const PipelineConfig& cfg, const RunOptions& options) {
  StageContext ctx(stage, cfg, options);
  switch (stage) {
    case Stage::kIngest: run_ingest(ctx); break;
    case Stage::kTrain: run_train(ctx); break;
    case Stage::kSimilar: run_similar(ctx); break;
    case Stage::kImportant: run_important(ctx); break;
    case Stage::kExpand: run_expand(ctx); break;
    case Stage::kFeatures: run_features(ctx); break;
    case Stage::kAnalyze: run_analyze(ctx); break;
    case Stage::kReport: run_report(ctx); break;
  }
  return ctx.finish();
}

std::vector<StageResult> run_all(const PipelineConfig& cfg, const RunOptions& options) {
  std::vector<Stage> order = all_stages();
  if (cfg.similarity.candidates == CandidateSource::kExtractedKeywords) {
    std::swap(order[2], order[3]);  // similar reads the important sets
  }
  std::vector<StageResult> results;
  for (Stage s : order) results.push_back(run_stage(s, cfg, options));
  return results;
}

}  // namespace cpikw
