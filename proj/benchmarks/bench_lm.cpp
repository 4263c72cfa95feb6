#include <benchmark/benchmark.h>

#include "cpikw/lm/model.hpp"
#include "cpikw/random.hpp"

using namespace cpikw;

namespace {

lm::ModelConfig bench_config() {
  lm::ModelConfig c;
  c.vocab_size = 64;
  c.max_seq_len = 256;
  return c;
}

lm::TokenSequence random_tokens(std::size_t n, int vocab) {
  Rng rng(11);
  lm::TokenSequence t;
  for (std::size_t i = 0; i < n; ++i) t.ids.push_back(static_cast<lm::TokenId>(rng.below(vocab)));
  return t;
}

void BM_Forward(benchmark::State& state) {
  const lm::ModelConfig c = bench_config();
  const lm::DecoderWeights w = lm::init_weights(c);
  const auto tokens = random_tokens(static_cast<std::size_t>(state.range(0)), c.vocab_size);
  for (auto _ : state) benchmark::DoNotOptimize(lm::forward(tokens, w));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(128)->Arg(256);

// Forward plus backward, accumulating into a gradient buffer.
void BM_Gradient(benchmark::State& state) {
  const lm::ModelConfig c = bench_config();
  const lm::DecoderWeights w = lm::init_weights(c);
  lm::DecoderWeights grad = lm::DecoderWeights::zeros(c);
  const auto tokens = random_tokens(static_cast<std::size_t>(state.range(0)), c.vocab_size);
  for (auto _ : state) benchmark::DoNotOptimize(lm::accumulate_gradient(tokens, w, grad));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Gradient)->Arg(32)->Arg(128)->Arg(256);

}  // namespace
