#include "cpikw/similarity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "cpikw/error.hpp"
#include "cpikw/text.hpp"
#include "json.hpp"

namespace cpikw {

using nlohmann::json;

std::string_view pooling_name(Pooling p) { return p == Pooling::kContextual ? "contextual" : "static"; }

Pooling parse_pooling(std::string_view name) {
  if (name == "contextual" || name == "mean-of-contextual-states") return Pooling::kContextual;
  if (name == "static" || name == "static-embedding") return Pooling::kStatic;
  fail(ErrorCategory::kConfig, "unknown pooling: " + std::string(name));
}

std::string_view candidate_source_name(CandidateSource s) {
  return s == CandidateSource::kCorpusVocabulary ? "corpus" : "extracted";
}

CandidateSource parse_candidate_source(std::string_view name) {
  if (name == "corpus") return CandidateSource::kCorpusVocabulary;
  if (name == "extracted") return CandidateSource::kExtractedKeywords;
  fail(ErrorCategory::kConfig, "unknown candidate source: " + std::string(name));
}

void SimilarityConfig::validate() const {
  if (!(threshold >= -1.0 && threshold <= 1.0)) {
    fail(ErrorCategory::kConfig, "similarity.threshold out of range (-1, 1]");
  }
}

Lexicon::Lexicon(std::span<const std::string> words) {
  for (const std::string& w : words) {
    std::u32string cps = text::decode_utf8(text::trim(w));
    if (cps.empty()) continue;
    max_len_ = std::max(max_len_, cps.size());
    words_.insert(std::move(cps));
  }
}

Lexicon Lexicon::parse(std::string_view file_content) {
  std::vector<std::string> words;
  std::size_t pos = 0;
  while (pos < file_content.size()) {
    std::size_t eol = file_content.find('\n', pos);
    if (eol == std::string_view::npos) eol = file_content.size();
    words.emplace_back(file_content.substr(pos, eol - pos));
    pos = eol + 1;
  }
  return Lexicon(words);
}

namespace {

bool is_punct(char32_t c) {
  if (c < 0x80) return c != U'\'' && c != U'-' && std::ispunct(static_cast<int>(c));
  return (c >= 0x3000 && c <= 0x303F) || (c >= 0xFF00 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) ||
         (c >= 0x2010 && c <= 0x2027);
}

bool is_separator(char32_t c) { return text::is_space(c) || is_punct(c); }

}  // namespace

namespace {

// [begin, end) code-point offsets of each segment.
std::vector<std::pair<std::size_t, std::size_t>> segment_spans(const std::u32string& cps, const Lexicon* lexicon) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const bool use_lexicon = lexicon && !lexicon->empty();
  std::size_t i = 0;
  while (i < cps.size()) {
    if (is_separator(cps[i])) {
      ++i;
      continue;
    }
    std::size_t take = 1;
    if (use_lexicon) {
      const std::size_t longest = std::min(lexicon->max_length(), cps.size() - i);
      for (std::size_t len = longest; len >= 1; --len) {
        if (lexicon->contains(std::u32string_view(cps).substr(i, len))) {
          take = len;
          break;
        }
      }
    } else {
      while (i + take < cps.size() && !is_separator(cps[i + take])) ++take;
    }
    out.emplace_back(i, i + take);
    i += take;
  }
  return out;
}

}  // namespace

std::vector<std::string> segment(std::string_view input, const Lexicon* lexicon) {
  const std::u32string cps = text::decode_utf8(input);
  std::vector<std::string> out;
  for (auto [b, e] : segment_spans(cps, lexicon)) out.push_back(text::encode_utf8(std::u32string_view(cps).substr(b, e - b)));
  return out;
}

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) fail(ErrorCategory::kInput, "cosine: length mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) fail(ErrorCategory::kInput, "cosine: zero vector");
  const double c = u.dot(v) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

std::map<std::string, WordVector> vectorize_all(std::span<const std::string> words, std::span<const Document> contexts,
                                                const lm::DecoderWeights& weights, const lm::Vocabulary& vocab,
                                                Pooling pooling, const Lexicon* lexicon) {
  const int d = weights.config.d_model;
  std::map<std::string, WordVector> out;
  if (pooling == Pooling::kStatic) {
    for (const std::string& w : words) {
      const std::u32string cps = text::decode_utf8(w);
      if (cps.empty()) continue;
      WordVector wv{w, Eigen::VectorXd::Zero(d), 1};
      for (char32_t c : cps) wv.vector += weights.token_embedding.row(vocab.id(c)).transpose();
      wv.vector /= static_cast<double>(cps.size());
      out.emplace(w, std::move(wv));
    }
    return out;
  }

  struct Accum {
    Eigen::VectorXd sum;
    std::size_t states = 0;
    std::size_t occurrences = 0;
  };
  std::vector<std::u32string> targets;
  for (const std::string& w : words) targets.push_back(text::decode_utf8(w));
  std::vector<Accum> acc(targets.size(), Accum{Eigen::VectorXd::Zero(d), 0, 0});

  const auto window = static_cast<std::size_t>(weights.config.max_seq_len);
  for (const Document& doc : contexts) {
    const std::u32string cps = text::decode_utf8(doc.text);
    // An occurrence must start and end on segment boundaries, so "in" does
    // not match inside "inflation".
    std::vector<char> starts(cps.size() + 1, 0), ends(cps.size() + 1, 0);
    for (auto [b, e] : segment_spans(cps, lexicon)) {
      starts[b] = 1;
      ends[e] = 1;
    }
    for (std::size_t start = 0; start < cps.size(); start += window) {
      const std::u32string_view chunk = std::u32string_view(cps).substr(start, window);
      lm::TokenSequence seq;
      for (char32_t c : chunk) seq.ids.push_back(vocab.id(c));
      std::optional<lm::Matrix> states;
      for (std::size_t t = 0; t < targets.size(); ++t) {
        const std::u32string& target = targets[t];
        if (target.empty() || target.size() > chunk.size()) continue;
        for (std::size_t pos = chunk.find(target); pos != std::u32string_view::npos; pos = chunk.find(target, pos + 1)) {
          if (!starts[start + pos] || !ends[start + pos + target.size()]) continue;
          if (!states) states = lm::hidden_states(seq, weights);
          for (std::size_t k = 0; k < target.size(); ++k) {
            acc[t].sum += states->row(static_cast<Eigen::Index>(pos + k)).transpose();
          }
          acc[t].states += target.size();
          ++acc[t].occurrences;
        }
      }
    }
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (acc[t].states == 0) continue;
    out.emplace(words[t], WordVector{words[t], acc[t].sum / static_cast<double>(acc[t].states), acc[t].occurrences});
  }
  return out;
}

WordVector vectorize(const std::string& word, std::span<const Document> contexts, const lm::DecoderWeights& weights,
                     const lm::Vocabulary& vocab, Pooling pooling, const Lexicon* lexicon) {
  const std::string words[] = {word};
  auto all = vectorize_all(words, contexts, weights, vocab, pooling, lexicon);
  auto it = all.find(word);
  if (it == all.end()) fail(ErrorCategory::kInput, "vectorize: word '" + word + "' absent from all contexts");
  return it->second;
}

SimilarSelection similar_select(std::span<const std::string> seeds, std::span<const std::string> candidates,
                                const std::map<std::string, WordVector>& vectors, const SimilarityConfig& cfg,
                                std::string name, Perspective perspective) {
  cfg.validate();
  auto lookup = [&](const std::string& w) -> const Eigen::VectorXd& {
    auto it = vectors.find(w);
    if (it == vectors.end()) fail(ErrorCategory::kInput, "similar_select: missing vector for '" + w + "'");
    return it->second.vector;
  };
  const std::set<std::string> seed_set(seeds.begin(), seeds.end());
  std::set<std::string> seen;
  SimilarSelection sel;
  for (const std::string& cand : candidates) {
    if (seed_set.count(cand) || !seen.insert(cand).second) continue;
    const Eigen::VectorXd& cv = lookup(cand);
    SimilarMatch best{cand, "", -2.0};
    for (const std::string& seed : seeds) {
      const double s = cosine(cv, lookup(seed));
      if (s > best.score) {
        best.score = s;
        best.best_seed = seed;
      }
    }
    if (!best.best_seed.empty() && best.score >= cfg.threshold) sel.matches.push_back(std::move(best));
  }
  std::sort(sel.matches.begin(), sel.matches.end(), [](const SimilarMatch& a, const SimilarMatch& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.word < b.word;
  });
  std::vector<std::string> words;
  for (const SimilarMatch& m : sel.matches) words.push_back(m.word);
  sel.set = make_keyword_set(std::move(name), KeywordTag::kSimilar, perspective, std::move(words));
  return sel;
}

std::string serialize_vectors(const std::map<std::string, WordVector>& vectors) {
  std::string out;
  for (const auto& [word, wv] : vectors) {
    json rec = json::object();
    rec["word"] = word;
    rec["count"] = wv.source_count;
    rec["vector"] = std::vector<double>(wv.vector.data(), wv.vector.data() + wv.vector.size());
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::map<std::string, WordVector> parse_vectors(std::string_view content) {
  std::map<std::string, WordVector> out;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    const std::string_view line = content.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      const auto values = rec.at("vector").get<std::vector<double>>();
      WordVector wv;
      wv.word = rec.at("word").get<std::string>();
      wv.source_count = rec.at("count").get<std::size_t>();
      wv.vector = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
      out.emplace(wv.word, std::move(wv));
    } catch (const json::exception& e) {
      fail(ErrorCategory::kInput, std::string("vector cache: ") + e.what());
    }
  }
  return out;
}

}  // namespace cpikw
