#include "cpikw/keywords.hpp"

#include <algorithm>
#include <set>

#include "cpikw/error.hpp"
#include "cpikw/random.hpp"
#include "cpikw/text.hpp"
#include "json.hpp"

namespace cpikw {

using nlohmann::json;

std::string_view tag_name(KeywordTag tag) {
  switch (tag) {
    case KeywordTag::kSeed: return "seed";
    case KeywordTag::kSimilar: return "similar";
    case KeywordTag::kImportant: return "important";
    case KeywordTag::kGenerated: return "generated";
  }
  return "seed";
}

KeywordTag parse_tag(std::string_view name) {
  if (name == "seed") return KeywordTag::kSeed;
  if (name == "similar") return KeywordTag::kSimilar;
  if (name == "important") return KeywordTag::kImportant;
  if (name == "generated") return KeywordTag::kGenerated;
  fail(ErrorCategory::kInput, "unknown keyword tag: " + std::string(name));
}

bool KeywordSet::contains(std::string_view word) const {
  return std::binary_search(words.begin(), words.end(), word);
}

KeywordSet make_keyword_set(std::string name, KeywordTag tag, Perspective perspective,
                            std::vector<std::string> words) {
  KeywordSet set;
  set.name = std::move(name);
  set.tag = tag;
  set.perspective = perspective;
  std::set<std::string> unique;
  for (std::string& w : words) {
    std::string t = text::trim(w);
    if (!t.empty()) unique.insert(std::move(t));
  }
  set.words.assign(unique.begin(), unique.end());
  return set;
}

std::string serialize_keyword_set(const KeywordSet& set) {
  json doc = json::object();
  doc["name"] = set.name;
  doc["tag"] = tag_name(set.tag);
  doc["perspective"] = perspective_name(set.perspective);
  doc["words"] = set.words;
  return doc.dump(2) + "\n";
}

KeywordSet parse_keyword_set(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
    return make_keyword_set(doc.at("name").get<std::string>(), parse_tag(doc.at("tag").get<std::string>()),
                            parse_perspective(doc.at("perspective").get<std::string>()),
                            doc.at("words").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    fail(ErrorCategory::kInput, std::string("keyword set file: ") + e.what());
  }
}

std::string serialize_template(const PromptTemplate& t) {
  json doc = json::object();
  doc["task_label"] = t.task_label;
  doc["abstract_label"] = t.abstract_label;
  doc["keywords_label"] = t.keywords_label;
  doc["newline"] = t.newline;
  return doc.dump();
}

PromptTemplate parse_template(std::string_view json_text) {
  PromptTemplate t;
  try {
    const json doc = json::parse(json_text);
    t.task_label = doc.value("task_label", t.task_label);
    t.abstract_label = doc.value("abstract_label", t.abstract_label);
    t.keywords_label = doc.value("keywords_label", t.keywords_label);
    t.newline = doc.value("newline", t.newline);
  } catch (const json::exception& e) {
    fail(ErrorCategory::kConfig, std::string("prompt template: ") + e.what());
  }
  return t;
}

std::string build_prompt(std::string_view baike_text, const PromptTemplate& tmpl) {
  if (baike_text.empty()) fail(ErrorCategory::kInput, "build_prompt: empty text");
  std::string out;
  out.reserve(baike_text.size() + 64);
  out += tmpl.task_label;
  out += tmpl.newline;
  out += tmpl.abstract_label;
  out += baike_text;
  out += tmpl.newline;
  out += tmpl.keywords_label;
  return out;
}

std::string render_training_text(const Document& doc, const PromptTemplate& tmpl) {
  if (doc.tags.empty()) return doc.text;
  std::string out = build_prompt(doc.text, tmpl);
  for (std::size_t i = 0; i < doc.tags.size(); ++i) {
    if (i) out += ", ";
    out += doc.tags[i];
  }
  out += tmpl.newline;
  return out;
}

std::vector<std::string> parse_keywords(std::string_view generated) {
  const std::u32string cps = text::decode_utf8(generated.substr(0, generated.find('\n')));
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::u32string current;
  auto flush = [&] {
    std::string word = text::trim(text::encode_utf8(current));
    current.clear();
    if (!word.empty() && seen.insert(word).second) out.push_back(std::move(word));
  };
  for (char32_t c : cps) {
    if (c == U',' || c == U'、' || c == U';' || text::is_space(c)) {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  return out;
}

void RobustnessConfig::validate() const {
  if (n_runs < 1) fail(ErrorCategory::kConfig, "robustness.n_runs must be at least 1");
  if (!(temperature > 0.0)) fail(ErrorCategory::kConfig, "robustness.temperature must be positive");
}

std::vector<std::string> extract_keywords(const Document& doc, const lm::DecoderWeights& weights,
                                          const lm::Vocabulary& vocab, const PromptTemplate& tmpl,
                                          const lm::GenerateOptions& options) {
  return parse_keywords(lm::generate(build_prompt(doc.text, tmpl), weights, vocab, options));
}

std::vector<std::string> intersect_runs(const std::vector<std::vector<std::string>>& runs) {
  if (runs.empty()) return {};
  std::vector<std::string> out;
  for (const std::string& w : runs.front()) {
    bool everywhere = true;
    for (std::size_t r = 1; r < runs.size() && everywhere; ++r) {
      everywhere = std::find(runs[r].begin(), runs[r].end(), w) != runs[r].end();
    }
    if (everywhere && std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
  }
  return out;
}

RobustExtraction robust_extract(const Document& doc, const lm::DecoderWeights& weights,
                                const lm::Vocabulary& vocab, const PromptTemplate& tmpl,
                                const RobustnessConfig& cfg) {
  cfg.validate();
  RobustExtraction result;
  lm::GenerateOptions options;
  options.max_new = cfg.max_new;
  options.strategy = cfg.strategy;
  options.temperature = cfg.temperature;
  for (int i = 0; i < cfg.n_runs; ++i) {
    options.seed = derive_seed(cfg.seed, doc.source_id, static_cast<std::uint64_t>(i));
    result.runs.push_back(extract_keywords(doc, weights, vocab, tmpl, options));
  }
  result.keywords = intersect_runs(result.runs);
  return result;
}

std::string ExtractionReport::to_json() const {
  json doc = json::object();
  json docs = json::array();
  for (const DocumentExtraction& d : documents) {
    json e = json::object();
    e["source_id"] = d.source_id;
    e["keyword"] = d.keyword;
    e["skipped"] = d.skipped;
    if (d.skipped) e["skip_reason"] = d.skip_reason;
    e["runs"] = d.runs;
    e["keywords"] = d.keywords;
    docs.push_back(std::move(e));
  }
  doc["documents"] = std::move(docs);
  doc["warnings"] = warnings;
  return doc.dump(2) + "\n";
}

KeywordSet importance_select(const Corpus& corpus, const lm::DecoderWeights& weights, const lm::Vocabulary& vocab,
                             const PromptTemplate& tmpl, const RobustnessConfig& cfg,
                             const std::vector<std::string>& excluded, std::string name, Perspective perspective,
                             ExtractionReport* report) {
  if (corpus.empty()) fail(ErrorCategory::kInput, "importance_select: empty corpus");
  const std::set<std::string> skip(excluded.begin(), excluded.end());
  std::vector<std::string> words;
  for (const Document& doc : corpus) {
    DocumentExtraction entry;
    entry.source_id = doc.source_id;
    entry.keyword = doc.keyword;
    try {
      RobustExtraction r = robust_extract(doc, weights, vocab, tmpl, cfg);
      entry.runs = std::move(r.runs);
      entry.keywords = std::move(r.keywords);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::kInput) throw;
      entry.skipped = true;
      entry.skip_reason = e.what();
      if (report) report->warnings.push_back("skipped " + doc.source_id + ": " + e.what());
    }
    for (const std::string& w : entry.keywords) {
      if (!skip.count(w)) words.push_back(w);
    }
    if (report) report->documents.push_back(std::move(entry));
  }
  return make_keyword_set(std::move(name), KeywordTag::kImportant, perspective, std::move(words));
}

KeywordSet expand(const KeywordSet& similar, const KeywordSet& important, std::string name,
                  std::vector<std::string>* warnings) {
  if (similar.perspective != important.perspective) {
    fail(ErrorCategory::kInput, "expand: perspective mismatch (" + std::string(perspective_name(similar.perspective)) +
                                    " vs " + std::string(perspective_name(important.perspective)) + ")");
  }
  std::vector<std::string> common;
  std::set_intersection(similar.words.begin(), similar.words.end(), important.words.begin(), important.words.end(),
                        std::back_inserter(common));
  if (common.empty() && warnings) {
    warnings->push_back("expand: similar and important sets are disjoint for " +
                        std::string(perspective_name(similar.perspective)));
  }
  return make_keyword_set(std::move(name), KeywordTag::kGenerated, similar.perspective, std::move(common));
}

}  // namespace cpikw
