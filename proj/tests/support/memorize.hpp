#pragma once

// Tagged fixtures for the memorization round trip: a tiny LM overfit on
// "prompt + planted keywords" must reproduce the planted lists.

#include <set>
#include <string>
#include <vector>

#include "cpikw/keywords.hpp"
#include "cpikw/lm/train.hpp"
#include "cpikw/random.hpp"

namespace testing_support {

struct MemorizedModel {
  std::vector<cpikw::Document> fixtures;
  cpikw::lm::Vocabulary vocab;
  cpikw::lm::TrainState state;
};

// Each fixture mentions two distinct words from a fixed pool and is tagged
// with them.
inline std::vector<cpikw::Document> memorization_fixtures(int count, std::uint64_t seed) {
  static const char* pool[] = {"pork", "rice", "tax", "trade", "fuel", "rent", "wage", "bread", "fish", "milk",
                               "corn", "salt", "coal", "steel", "gold", "oil", "beef", "tea", "wine", "fruit"};
  cpikw::Rng rng(seed);
  std::vector<cpikw::Document> out;
  for (int i = 0; i < count; ++i) {
    const std::string a = pool[rng.below(20)];
    std::string b = a;
    while (b == a) b = pool[rng.below(20)];
    const std::string text = "the " + a + " index moved with " + b + " in year " + std::to_string(2000 + i);
    out.push_back(cpikw::make_document("k", "fx" + std::to_string(i), text, cpikw::LengthUnit::kCharacters, {a, b}));
  }
  return out;
}

inline MemorizedModel memorize(int count, int steps, std::uint64_t seed = 5) {
  MemorizedModel m;
  m.fixtures = memorization_fixtures(count, seed);
  std::vector<std::string> texts;
  for (const auto& d : m.fixtures) texts.push_back(cpikw::render_training_text(d));
  m.vocab = cpikw::lm::Vocabulary::build(texts);
  cpikw::lm::ModelConfig c;
  c.n_layers = 2;
  c.d_model = 32;
  c.n_heads = 4;
  c.d_ff = 64;
  c.max_seq_len = 128;
  c.rng_seed = seed;
  cpikw::lm::TrainSettings s;
  s.steps = steps;
  s.learning_rate = 0.3;
  m.state = cpikw::lm::train(texts, m.vocab, c, s);
  return m;
}

}  // namespace testing_support
