#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cpikw/lm/model.hpp"
#include "cpikw/lm/vocabulary.hpp"

namespace cpikw::lm {

enum class DecodeStrategy { kGreedy, kSample };

std::string_view strategy_name(DecodeStrategy s);
DecodeStrategy parse_strategy(std::string_view name);

struct GenerateOptions {
  std::size_t max_new = 32;
  DecodeStrategy strategy = DecodeStrategy::kGreedy;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  std::vector<TokenId> stop_ids = {Vocabulary::kEos, Vocabulary::kNewline};
};

// Argmax with ties broken toward the lowest id.
TokenId greedy_pick(const RowVector& logits);

// Appends up to max_new tokens to the prompt and returns only the
// continuation. A stop token ends generation and is not included.
std::vector<TokenId> generate_ids(const TokenSequence& prompt, const DecoderWeights& weights,
                                  const GenerateOptions& options);
std::string generate(std::string_view prompt, const DecoderWeights& weights, const Vocabulary& vocab,
                     const GenerateOptions& options);

}  // namespace cpikw::lm
