#include "cpikw/corpus.hpp"

#include <algorithm>
#include <set>

#include "cpikw/digest.hpp"
#include "cpikw/error.hpp"
#include "cpikw/text.hpp"
#include "json.hpp"

namespace cpikw {

using nlohmann::json;

std::string_view perspective_name(Perspective p) {
  return p == Perspective::kMacro ? "macro" : "micro";
}

Perspective parse_perspective(std::string_view name) {
  if (name == "macro") return Perspective::kMacro;
  if (name == "micro") return Perspective::kMicro;
  fail(ErrorCategory::kInput, "unknown perspective: " + std::string(name));
}

Document make_document(std::string keyword, std::string source_id, std::string_view raw_text,
                       LengthUnit unit, std::vector<std::string> tags) {
  Document doc;
  doc.keyword = std::move(keyword);
  doc.source_id = std::move(source_id);
  doc.text = text::normalize_whitespace(raw_text);
  doc.char_count = unit == LengthUnit::kCharacters ? text::count_code_points(doc.text)
                                                   : text::count_whitespace_tokens(doc.text);
  doc.tags = std::move(tags);
  return doc;
}

void Corpus::add(Document doc) {
  index_[doc.keyword].push_back(docs_.size());
  docs_.push_back(std::move(doc));
}

std::span<const std::size_t> Corpus::positions(const std::string& keyword) const {
  auto it = index_.find(keyword);
  if (it == index_.end()) return {};
  return it->second;
}

namespace {

// Returns an error message, or empty on success.
std::string parse_record(std::string_view line, std::string_view source_name, std::size_t line_no,
                         LengthUnit unit, Document& out) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::parse_error& e) {
    return "invalid JSON (" + std::string(e.what()) + ")";
  }
  if (!rec.is_object()) return "record is not an object";
  auto kw = rec.find("keyword");
  if (kw == rec.end() || !kw->is_string() || kw->get<std::string>().empty()) {
    return "missing or empty string field 'keyword'";
  }
  auto txt = rec.find("text");
  if (txt == rec.end() || !txt->is_string()) return "missing string field 'text'";
  std::string source_id = std::string(source_name) + ":" + std::to_string(line_no);
  if (auto sid = rec.find("source_id"); sid != rec.end()) {
    if (!sid->is_string()) return "field 'source_id' is not a string";
    source_id = sid->get<std::string>();
  }
  std::vector<std::string> tags;
  if (auto tg = rec.find("tags"); tg != rec.end()) {
    if (!tg->is_array()) return "field 'tags' is not an array";
    for (const auto& t : *tg) {
      if (!t.is_string()) return "field 'tags' holds a non-string entry";
      tags.push_back(t.get<std::string>());
    }
  }
  out = make_document(kw->get<std::string>(), std::move(source_id), txt->get<std::string>(), unit,
                      std::move(tags));
  if (out.text.empty()) return "field 'text' is empty after whitespace normalization";
  return {};
}

}  // namespace

Corpus parse_corpus(std::string_view content, std::string_view source_name,
                    const LoadOptions& options, std::vector<std::string>* warnings) {
  Corpus corpus;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    std::string_view line = content.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    Document doc;
    std::string err = parse_record(line, source_name, line_no, options.unit, doc);
    if (!err.empty()) {
      std::string msg = std::string(source_name) + ":" + std::to_string(line_no) +
                        ": malformed record: " + err;
      if (options.strict) fail(ErrorCategory::kInput, msg);
      if (warnings) warnings->push_back(msg);
      continue;
    }
    corpus.add(std::move(doc));
  }
  if (corpus.empty()) fail(ErrorCategory::kInput, "empty corpus: " + std::string(source_name));
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options,
                   std::vector<std::string>* warnings) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorCategory::kInput, "corpus file not found: " + path.string());
  }
  return parse_corpus(read_file(path), path.string(), options, warnings);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const Document& doc : corpus) {
    json rec = json::object();
    rec["keyword"] = doc.keyword;
    rec["source_id"] = doc.source_id;
    rec["text"] = doc.text;
    if (!doc.tags.empty()) rec["tags"] = doc.tags;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

Corpus filter_length(const Corpus& corpus, std::size_t min_len, std::size_t max_len) {
  if (min_len == 0 || min_len > max_len) {
    fail(ErrorCategory::kConfig, "invalid length bounds: require 0 < min_len <= max_len, got [" +
                                     std::to_string(min_len) + ", " + std::to_string(max_len) + "]");
  }
  Corpus out;
  for (const Document& doc : corpus) {
    if (doc.char_count >= min_len && doc.char_count <= max_len) out.add(doc);
  }
  return out;
}

bool SeedKeywords::contains(std::string_view word) const {
  return std::find(macro.begin(), macro.end(), word) != macro.end() ||
         std::find(micro.begin(), micro.end(), word) != micro.end();
}

SeedKeywords builtin_seed_keywords() {
  SeedKeywords seeds;
  seeds.macro = {"CPI",         "GDP",        "price",     "product price", "price increase",
                 "price decrease", "deposit rate", "economy", "currency",   "capital",
                 "inflation",   "deflation",  "finance",   "market",        "commodity",
                 "tax",         "trade",      "population"};
  seeds.micro = {"rice",         "wheat",          "pork",           "beef",
                 "fish",         "vegetables",     "fruits",         "edible oil",
                 "steamed bread", "bread",         "beverages",      "liquor",
                 "tobacco",      "men's clothing", "women's clothing", "children's clothing",
                 "rent",         "transportation", "education",      "medical care",
                 "health care",  "automobiles",    "gasoline"};
  return seeds;
}

namespace {

std::vector<std::string> read_seed_list(const json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end() || !it->is_array()) {
    fail(ErrorCategory::kInput, std::string("seed file: missing string-array field '") + field + "'");
  }
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& v : *it) {
    if (!v.is_string()) fail(ErrorCategory::kInput, std::string("seed file: non-string entry in '") + field + "'");
    std::string word = text::normalize_whitespace(v.get<std::string>());
    if (word.empty()) fail(ErrorCategory::kInput, std::string("seed file: empty keyword in '") + field + "'");
    if (!seen.insert(word).second) {
      fail(ErrorCategory::kInput, std::string("seed file: duplicate keyword '") + word + "' in '" + field + "'");
    }
    out.push_back(std::move(word));
  }
  if (out.empty()) fail(ErrorCategory::kInput, std::string("seed file: empty list '") + field + "'");
  return out;
}

}  // namespace

SeedKeywords parse_seed_keywords(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCategory::kInput, std::string("seed file: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCategory::kInput, "seed file: expected an object with 'macro' and 'micro'");
  SeedKeywords seeds;
  seeds.macro = read_seed_list(doc, "macro");
  seeds.micro = read_seed_list(doc, "micro");
  return seeds;
}

SeedKeywords load_seed_keywords(const std::string& path_or_builtin) {
  if (path_or_builtin.empty() || path_or_builtin == "builtin") return builtin_seed_keywords();
  if (!std::filesystem::exists(path_or_builtin)) {
    fail(ErrorCategory::kInput, "seed file not found: " + path_or_builtin);
  }
  return parse_seed_keywords(read_file(path_or_builtin));
}

std::string serialize_seed_keywords(const SeedKeywords& seeds) {
  json doc = json::object();
  doc["macro"] = seeds.macro;
  doc["micro"] = seeds.micro;
  return doc.dump(2) + "\n";
}

FileFetcher::FileFetcher(std::filesystem::path root, LoadOptions options)
    : root_(std::move(root)), options_(options) {
  if (!std::filesystem::exists(root_)) {
    fail(ErrorCategory::kInput, "fetcher backend unavailable: " + root_.string());
  }
  if (std::filesystem::is_regular_file(root_)) {
    single_file_ = std::make_shared<const Corpus>(load_corpus(root_, options_));
  }
}

std::vector<Document> FileFetcher::fetch(const std::string& keyword) {
  std::vector<Document> out;
  if (single_file_) {
    for (std::size_t i : single_file_->positions(keyword)) out.push_back((*single_file_)[i]);
    return out;
  }
  if (!std::filesystem::is_directory(root_)) {
    fail(ErrorCategory::kInput, "fetcher backend unavailable: " + root_.string());
  }
  const std::filesystem::path file = root_ / (keyword + ".jsonl");
  if (!std::filesystem::exists(file)) return out;
  const std::string content = read_file(file);
  if (content.find_first_not_of(" \t\r\n") == std::string::npos) return out;
  Corpus c = parse_corpus(content, file.string(), options_);
  for (const Document& doc : c) {
    Document d = doc;
    d.keyword = keyword;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace cpikw
