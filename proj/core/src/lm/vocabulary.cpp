#include "cpikw/lm/vocabulary.hpp"

#include <set>

#include "cpikw/error.hpp"
#include "cpikw/text.hpp"

namespace cpikw::lm {

namespace {
constexpr const char* kReservedNames[] = {"<pad>", "<unk>", "<eos>", "<nl>"};
}

Vocabulary::Vocabulary() {
  for (const char* name : kReservedNames) units_.emplace_back(name);
}

void Vocabulary::add_code_point(char32_t c) {
  if (c == U'\n' || lookup_.count(c)) return;
  lookup_.emplace(c, static_cast<TokenId>(units_.size()));
  units_.push_back(text::encode_utf8(c));
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
  std::set<char32_t> chars;
  for (const std::string& t : texts) {
    for (char32_t c : text::decode_utf8(t)) chars.insert(c);
  }
  Vocabulary vocab;
  for (char32_t c : chars) vocab.add_code_point(c);
  return vocab;
}

Vocabulary Vocabulary::from_units(const std::vector<std::string>& units) {
  if (units.size() < kReserved) fail(ErrorCategory::kInput, "vocabulary: missing reserved markers");
  for (std::size_t i = 0; i < kReserved; ++i) {
    if (units[i] != kReservedNames[i]) {
      fail(ErrorCategory::kInput, "vocabulary: expected reserved marker " +
                                      std::string(kReservedNames[i]) + " at line " + std::to_string(i + 1));
    }
  }
  Vocabulary vocab;
  for (std::size_t i = kReserved; i < units.size(); ++i) {
    const std::u32string cps = text::decode_utf8(units[i]);
    if (cps.size() != 1 || cps[0] == U'\n') {
      fail(ErrorCategory::kInput, "vocabulary: line " + std::to_string(i + 1) + " is not a single character");
    }
    if (vocab.lookup_.count(cps[0])) {
      fail(ErrorCategory::kInput, "vocabulary: duplicate unit at line " + std::to_string(i + 1));
    }
    vocab.add_code_point(cps[0]);
  }
  return vocab;
}

Vocabulary Vocabulary::parse(std::string_view file_content) {
  std::vector<std::string> units;
  std::size_t pos = 0;
  while (pos < file_content.size()) {
    std::size_t eol = file_content.find('\n', pos);
    if (eol == std::string_view::npos) eol = file_content.size();
    units.emplace_back(file_content.substr(pos, eol - pos));
    pos = eol + 1;
  }
  return from_units(units);
}

TokenId Vocabulary::id(char32_t c) const {
  if (c == U'\n') return kNewline;
  auto it = lookup_.find(c);
  return it == lookup_.end() ? kUnk : it->second;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const std::string& u : units_) {
    out += u;
    out += '\n';
  }
  return out;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_seq_len,
                       bool strict, std::vector<std::string>* warnings) {
  if (text.empty()) fail(ErrorCategory::kInput, "tokenize: empty text");
  TokenSequence seq;
  for (char32_t c : text::decode_utf8(text)) seq.ids.push_back(vocab.id(c));
  if (seq.ids.size() > max_seq_len) {
    if (strict) {
      fail(ErrorCategory::kInput, "tokenize: sequence of " + std::to_string(seq.ids.size()) +
                                      " tokens exceeds max_seq_len " + std::to_string(max_seq_len));
    }
    if (warnings) {
      warnings->push_back("tokenize: truncated " + std::to_string(seq.ids.size()) + " tokens to " +
                          std::to_string(max_seq_len));
    }
    seq.ids.resize(max_seq_len);
  }
  return seq;
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : ids) {
    switch (id) {
      case Vocabulary::kPad:
      case Vocabulary::kEos:
        break;
      case Vocabulary::kNewline:
        out += '\n';
        break;
      case Vocabulary::kUnk:
        out += text::encode_utf8(char32_t{0xFFFD});
        break;
      default:
        out += vocab.unit(id);
    }
  }
  return out;
}

}  // namespace cpikw::lm
