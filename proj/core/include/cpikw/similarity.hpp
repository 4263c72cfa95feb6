#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cpikw/corpus.hpp"
#include "cpikw/keywords.hpp"
#include "cpikw/lm/model.hpp"
#include "cpikw/lm/vocabulary.hpp"

namespace cpikw {

enum class Pooling { kContextual, kStatic };
enum class CandidateSource { kCorpusVocabulary, kExtractedKeywords };

std::string_view pooling_name(Pooling p);
Pooling parse_pooling(std::string_view name);
std::string_view candidate_source_name(CandidateSource s);
CandidateSource parse_candidate_source(std::string_view name);

struct SimilarityConfig {
  double threshold = 0.9;
  Pooling pooling = Pooling::kContextual;
  CandidateSource candidates = CandidateSource::kCorpusVocabulary;

  // Threshold must lie in (-1, 1]; -1 itself is accepted as "keep everything".
  void validate() const;
};

class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::span<const std::string> words);
  static Lexicon parse(std::string_view file_content);

  bool empty() const { return words_.empty(); }
  std::size_t max_length() const { return max_len_; }
  bool contains(std::u32string_view w) const { return words_.count(std::u32string(w)) != 0; }

 private:
  std::unordered_set<std::u32string> words_;
  std::size_t max_len_ = 0;
};

// With a lexicon: greedy longest match left to right, falling back to a
// single character; without: split on whitespace and punctuation.
// Whitespace and punctuation never appear in the output.
std::vector<std::string> segment(std::string_view text, const Lexicon* lexicon = nullptr);

struct WordVector {
  std::string word;
  Eigen::VectorXd vector;
  std::size_t source_count = 0;
};

// Dot product over the product of norms. Throws on a zero vector or a
// length mismatch.
double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// Contextual pooling averages top-layer states at every character position
// of every occurrence across `contexts`; static pooling averages the
// token-embedding rows of the word's characters. An occurrence starts and
// ends on boundaries of segment(text, lexicon). Words never seen in any
// context are absent from the result in contextual mode.
std::map<std::string, WordVector> vectorize_all(std::span<const std::string> words, std::span<const Document> contexts,
                                                const lm::DecoderWeights& weights, const lm::Vocabulary& vocab,
                                                Pooling pooling, const Lexicon* lexicon = nullptr);
WordVector vectorize(const std::string& word, std::span<const Document> contexts, const lm::DecoderWeights& weights,
                     const lm::Vocabulary& vocab, Pooling pooling, const Lexicon* lexicon = nullptr);

struct SimilarMatch {
  std::string word;
  std::string best_seed;
  double score = 0.0;
};

struct SimilarSelection {
  KeywordSet set;
  // Descending score, then lexicographic word.
  std::vector<SimilarMatch> matches;
};

// Keeps candidates whose best cosine against any seed reaches the
// threshold. Seeds never appear in the output.
SimilarSelection similar_select(std::span<const std::string> seeds, std::span<const std::string> candidates,
                                const std::map<std::string, WordVector>& vectors, const SimilarityConfig& cfg,
                                std::string name = "similar", Perspective perspective = Perspective::kMacro);

// JSONL vector cache: {"word", "count", "vector"} per line.
std::string serialize_vectors(const std::map<std::string, WordVector>& vectors);
std::map<std::string, WordVector> parse_vectors(std::string_view content);

}  // namespace cpikw
