#include "cpikw/lm/generate.hpp"

#include <algorithm>
#include <cmath>

#include "cpikw/error.hpp"
#include "cpikw/random.hpp"

namespace cpikw::lm {

std::string_view strategy_name(DecodeStrategy s) { return s == DecodeStrategy::kGreedy ? "greedy" : "sample"; }

DecodeStrategy parse_strategy(std::string_view name) {
  if (name == "greedy") return DecodeStrategy::kGreedy;
  if (name == "sample" || name == "seeded-sample") return DecodeStrategy::kSample;
  fail(ErrorCategory::kConfig, "unknown decode strategy: " + std::string(name));
}

TokenId greedy_pick(const RowVector& logits) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i) {
    if (logits(i) > logits(best)) best = i;
  }
  return static_cast<TokenId>(best);
}

namespace {

TokenId sample_pick(const RowVector& logits, double temperature, Rng& rng) {
  const RowVector scaled = logits / temperature;
  RowVector p = (scaled.array() - scaled.maxCoeff()).exp();
  const double total = p.sum();
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (u < acc) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(p.size() - 1);
}

}  // namespace

std::vector<TokenId> generate_ids(const TokenSequence& prompt, const DecoderWeights& weights,
                                  const GenerateOptions& options) {
  const auto max_len = static_cast<std::size_t>(weights.config.max_seq_len);
  if (prompt.size() == 0) fail(ErrorCategory::kInput, "generate: empty prompt");
  if (prompt.size() + options.max_new > max_len) {
    fail(ErrorCategory::kInput, "generate: prompt of " + std::to_string(prompt.size()) + " tokens plus " +
                                    std::to_string(options.max_new) + " new tokens exceeds max_seq_len " +
                                    std::to_string(max_len));
  }
  if (options.strategy == DecodeStrategy::kSample && !(options.temperature > 0.0)) {
    fail(ErrorCategory::kConfig, "generate: temperature must be positive");
  }
  Rng rng(options.seed);
  TokenSequence seq = prompt;
  std::vector<TokenId> out;
  for (std::size_t step = 0; step < options.max_new; ++step) {
    const Matrix top = hidden_states(seq, weights);
    const RowVector logits = query_layer(top, weights, static_cast<int>(seq.size()) - 1);
    const TokenId next = options.strategy == DecodeStrategy::kGreedy
                             ? greedy_pick(logits)
                             : sample_pick(logits, options.temperature, rng);
    if (std::find(options.stop_ids.begin(), options.stop_ids.end(), next) != options.stop_ids.end()) break;
    out.push_back(next);
    seq.ids.push_back(next);
  }
  return out;
}

std::string generate(std::string_view prompt, const DecoderWeights& weights, const Vocabulary& vocab,
                     const GenerateOptions& options) {
  const TokenSequence seq = tokenize(prompt, vocab, static_cast<std::size_t>(weights.config.max_seq_len));
  return detokenize(generate_ids(seq, weights, options), vocab);
}

}  // namespace cpikw::lm
