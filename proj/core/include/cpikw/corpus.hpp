#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cpikw {

enum class LengthUnit { kCharacters, kWhitespaceTokens };

enum class Perspective { kMacro, kMicro };

std::string_view perspective_name(Perspective p);
Perspective parse_perspective(std::string_view name);

// One keyword-tagged passage. `text` is stored whitespace-normalized and
// `char_count` is its length in the unit chosen at ingestion.
struct Document {
  std::string keyword;
  std::string source_id;
  std::string text;
  std::size_t char_count = 0;
  // Optional entry tags; rendered as the answer line when the passage is
  // used as language-model training text.
  std::vector<std::string> tags;

  bool operator==(const Document&) const = default;
};

Document make_document(std::string keyword, std::string source_id, std::string_view raw_text,
                       LengthUnit unit = LengthUnit::kCharacters, std::vector<std::string> tags = {});

class Corpus {
 public:
  Corpus() = default;

  void add(Document doc);

  const std::vector<Document>& documents() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  const Document& operator[](std::size_t i) const { return docs_[i]; }
  auto begin() const { return docs_.begin(); }
  auto end() const { return docs_.end(); }

  // Positions of documents fetched for `keyword`, in ingestion order.
  std::span<const std::size_t> positions(const std::string& keyword) const;
  const std::map<std::string, std::vector<std::size_t>>& keyword_index() const { return index_; }

 private:
  std::vector<Document> docs_;
  std::map<std::string, std::vector<std::size_t>> index_;
};

struct LoadOptions {
  bool strict = true;
  LengthUnit unit = LengthUnit::kCharacters;
};

// Parses line-delimited JSON records {keyword, text, source_id?, tags?}.
// Strict mode throws on the first malformed record; lenient mode skips it
// and appends a warning naming the line.
Corpus parse_corpus(std::string_view content, std::string_view source_name,
                    const LoadOptions& options = {}, std::vector<std::string>* warnings = nullptr);
Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options = {},
                   std::vector<std::string>* warnings = nullptr);

// Inverse of parse_corpus; stable byte output.
std::string serialize_corpus(const Corpus& corpus);

// Keeps documents with min_len <= char_count <= max_len.
Corpus filter_length(const Corpus& corpus, std::size_t min_len = 300, std::size_t max_len = 500);

struct SeedKeywords {
  std::vector<std::string> macro;
  std::vector<std::string> micro;

  const std::vector<std::string>& of(Perspective p) const {
    return p == Perspective::kMacro ? macro : micro;
  }
  bool contains(std::string_view word) const;
};

// English glosses of the macro/micro seed lists used by default.
SeedKeywords builtin_seed_keywords();
SeedKeywords parse_seed_keywords(std::string_view json_text);
// "builtin" selects the bundled lists.
SeedKeywords load_seed_keywords(const std::string& path_or_builtin);
std::string serialize_seed_keywords(const SeedKeywords& seeds);

class Fetcher {
 public:
  virtual ~Fetcher() = default;
  // Documents for `keyword`; an unknown keyword yields an empty list.
  virtual std::vector<Document> fetch(const std::string& keyword) = 0;
};

// Deterministic file-backed fetcher. `root` is either a directory holding
// `<keyword>.jsonl` files or a single corpus file filtered by keyword.
// Safe for concurrent callers: state is immutable after construction.
class FileFetcher final : public Fetcher {
 public:
  explicit FileFetcher(std::filesystem::path root, LoadOptions options = {});

  std::vector<Document> fetch(const std::string& keyword) override;

 private:
  std::filesystem::path root_;
  LoadOptions options_;
  std::shared_ptr<const Corpus> single_file_;
};

}  // namespace cpikw
