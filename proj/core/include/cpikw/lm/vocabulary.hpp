#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cpikw::lm {

using TokenId = std::int32_t;

// Character-level vocabulary. Ids 0..3 are reserved markers; every other
// unit is a single Unicode code point, ordered by code point value.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kNewline = 3;
  static constexpr std::size_t kReserved = 4;

  Vocabulary();

  static Vocabulary build(std::span<const std::string> texts);
  static Vocabulary from_units(const std::vector<std::string>& units);
  static Vocabulary parse(std::string_view file_content);

  std::size_t size() const { return units_.size(); }
  const std::string& unit(TokenId id) const { return units_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& units() const { return units_; }
  TokenId id(char32_t c) const;
  bool contains(char32_t c) const { return c == U'\n' || lookup_.count(c) != 0; }

  // One unit per line; reserved markers spelled <pad>, <unk>, <eos>, <nl>.
  std::string serialize() const;

  bool operator==(const Vocabulary& other) const { return units_ == other.units_; }

 private:
  void add_code_point(char32_t c);

  std::vector<std::string> units_;
  std::unordered_map<char32_t, TokenId> lookup_;
};

struct TokenSequence {
  std::vector<TokenId> ids;

  std::size_t size() const { return ids.size(); }
  bool operator==(const TokenSequence&) const = default;
};

// Maps each code point to its id; unknown characters map to kUnk. Longer
// than max_seq_len: strict mode throws, otherwise truncates and warns.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_seq_len,
                       bool strict = true, std::vector<std::string>* warnings = nullptr);
std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

}  // namespace cpikw::lm
