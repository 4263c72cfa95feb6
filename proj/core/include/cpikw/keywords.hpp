#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cpikw/corpus.hpp"
#include "cpikw/lm/generate.hpp"
#include "cpikw/lm/model.hpp"
#include "cpikw/lm/vocabulary.hpp"

namespace cpikw {

enum class KeywordTag { kSeed, kSimilar, kImportant, kGenerated };

std::string_view tag_name(KeywordTag tag);
KeywordTag parse_tag(std::string_view name);

// Named keyword set; `words` is kept unique and lexicographically sorted.
struct KeywordSet {
  std::string name;
  KeywordTag tag = KeywordTag::kSeed;
  Perspective perspective = Perspective::kMacro;
  std::vector<std::string> words;

  bool contains(std::string_view word) const;
  bool operator==(const KeywordSet&) const = default;
};

// Trims entries, drops empties and duplicates, sorts.
KeywordSet make_keyword_set(std::string name, KeywordTag tag, Perspective perspective,
                            std::vector<std::string> words);
std::string serialize_keyword_set(const KeywordSet& set);
KeywordSet parse_keyword_set(std::string_view json_text);

struct PromptTemplate {
  std::string task_label = "Keyword Extraction: ";
  std::string abstract_label = "Abstract: ";
  std::string keywords_label = "Keywords: ";
  std::string newline = "\n";

  bool operator==(const PromptTemplate&) const = default;
};

std::string serialize_template(const PromptTemplate& t);
PromptTemplate parse_template(std::string_view json_text);

// task_label + newline + abstract_label + text + newline + keywords_label.
std::string build_prompt(std::string_view baike_text, const PromptTemplate& tmpl = {});

// Language-model training text for a passage: the extraction prompt
// followed by its tags and a newline, or the bare text when untagged.
std::string render_training_text(const Document& doc, const PromptTemplate& tmpl = {});

// Reads up to the first newline; splits on ',', U+3001, ';' and whitespace
// runs; trims; drops empties and repeats (first occurrence wins).
std::vector<std::string> parse_keywords(std::string_view generated);

struct RobustnessConfig {
  int n_runs = 10;
  lm::DecodeStrategy strategy = lm::DecodeStrategy::kGreedy;
  std::size_t max_new = 48;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Generates a continuation of build_prompt(doc.text) and parses it.
// Throws ErrorCategory::kInput when the prompt does not fit the context.
std::vector<std::string> extract_keywords(const Document& doc, const lm::DecoderWeights& weights,
                                          const lm::Vocabulary& vocab, const PromptTemplate& tmpl,
                                          const lm::GenerateOptions& options);

// A = intersection of all runs, in first-run order.
std::vector<std::string> intersect_runs(const std::vector<std::vector<std::string>>& runs);

struct RobustExtraction {
  std::vector<std::vector<std::string>> runs;
  std::vector<std::string> keywords;
};

// Runs extraction n_runs times. Run i uses a seed derived from
// (cfg.seed, doc.source_id, i), so results do not depend on scheduling.
RobustExtraction robust_extract(const Document& doc, const lm::DecoderWeights& weights,
                                const lm::Vocabulary& vocab, const PromptTemplate& tmpl,
                                const RobustnessConfig& cfg);

struct DocumentExtraction {
  std::string source_id;
  std::string keyword;
  bool skipped = false;
  std::string skip_reason;
  std::vector<std::vector<std::string>> runs;
  std::vector<std::string> keywords;
};

struct ExtractionReport {
  std::vector<DocumentExtraction> documents;
  std::vector<std::string> warnings;

  std::string to_json() const;
};

// Union of robust_extract over documents, minus `excluded` words. Documents
// whose prompt exceeds the context are skipped and recorded in `report`.
KeywordSet importance_select(const Corpus& corpus, const lm::DecoderWeights& weights, const lm::Vocabulary& vocab,
                             const PromptTemplate& tmpl, const RobustnessConfig& cfg,
                             const std::vector<std::string>& excluded, std::string name, Perspective perspective,
                             ExtractionReport* report = nullptr);

// similar.words ∩ important.words. Throws on perspective mismatch; an empty
// result appends a warning.
KeywordSet expand(const KeywordSet& similar, const KeywordSet& important, std::string name = "generated",
                  std::vector<std::string>* warnings = nullptr);

}  // namespace cpikw
