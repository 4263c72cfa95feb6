#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cpikw/corpus.hpp"
#include "cpikw/features.hpp"
#include "cpikw/keywords.hpp"
#include "cpikw/lm/model.hpp"
#include "cpikw/lm/train.hpp"
#include "cpikw/similarity.hpp"
#include "cpikw/stats.hpp"

namespace cpikw {

enum class Stage { kIngest, kTrain, kSimilar, kImportant, kExpand, kFeatures, kAnalyze, kReport };

std::string_view stage_name(Stage stage);
Stage parse_stage(std::string_view name);
const std::vector<Stage>& all_stages();

// Which predictor set the second regression uses.
enum class SecondModel { kUnion, kGeneratedOnly };

std::string_view second_model_name(SecondModel m);
SecondModel parse_second_model(std::string_view name);

struct PipelineConfig {
  struct Paths {
    // Relative paths resolve against the config file's directory.
    std::filesystem::path base_dir = ".";
    std::string corpus = "corpus.jsonl";
    std::string seeds = "builtin";
    std::string lm_corpus;  // optional extra LM training text
    std::string lexicon;    // optional segmentation lexicon
    std::string daily_index = "daily_index.csv";
    std::string target = "cpi.csv";
    std::string output_dir = "out";

    std::filesystem::path resolve(const std::string& p) const;
  } paths;

  std::size_t min_length = 300;
  std::size_t max_length = 500;
  LengthUnit length_unit = LengthUnit::kCharacters;
  bool strict = true;

  lm::ModelConfig model;  // vocab_size and rng_seed are filled in by the train stage
  lm::TrainSettings train;
  PromptTemplate prompt;
  SimilarityConfig similarity;
  RobustnessConfig robustness;

  int max_lag = 12;
  double pearson_threshold = 0.3;
  CpiTransform cpi_transform = CpiTransform::kSubtractBase;
  IndexTransform index_transform = IndexTransform::kRatio;

  int n_components = 6;
  double min_cumulative = 0.70;
  PcaBasis pca_basis = PcaBasis::kCorrelation;
  SecondModel second_model = SecondModel::kUnion;
  std::string first_label = "Seed Keywords";
  std::string second_label = "Generate Keywords";

  std::uint64_t rng_seed = 42;

  // Keys set explicitly (config file or command line), with their values as
  // given, in key order.
  std::map<std::string, std::string> overrides;

  // Every key with its effective value, as a flat JSON object.
  std::string to_json() const;
  std::filesystem::path output_dir() const { return paths.resolve(paths.output_dir); }
};

// Flat JSON object with dotted keys; nested objects are flattened. Missing
// keys keep their defaults. All violations are collected and reported in one
// ErrorCategory::kConfig error.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = ".");
PipelineConfig validate_config(const std::filesystem::path& path);

// Applies "key=value" overrides on top of an existing config (same checks).
void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& assignments);

// Documented key list with defaults, for help output.
std::vector<std::pair<std::string, std::string>> config_schema();

struct RunOptions {
  bool force = false;  // run even if upstream artifacts are stale
};

struct StageResult {
  Stage stage;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
};

// Runs one stage, reading upstream artifacts from the output directory and
// recording hashes in manifest.json.
StageResult run_stage(Stage stage, const PipelineConfig& cfg, const RunOptions& options = {});

std::vector<StageResult> run_all(const PipelineConfig& cfg, const RunOptions& options = {});

// Hash of the configuration keys a stage depends on.
std::string stage_config_hash(Stage stage, const PipelineConfig& cfg);

}  // namespace cpikw
