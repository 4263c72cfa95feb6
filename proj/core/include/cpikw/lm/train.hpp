#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpikw/corpus.hpp"
#include "cpikw/lm/model.hpp"
#include "cpikw/lm/vocabulary.hpp"

namespace cpikw::lm {

enum class OptimizerKind { kSgdMomentum, kAdam };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainSettings {
  int steps = 1000;
  int batch_size = 8;
  double learning_rate = 0.05;
  OptimizerKind optimizer = OptimizerKind::kSgdMomentum;
  double momentum = 0.9;  // SGD momentum, or Adam beta1
  double beta2 = 0.999;   // Adam only
  double adam_epsilon = 1e-8;
  // Global gradient-norm clip; 0 disables.
  double grad_clip = 1.0;
  double init_scale = 0.02;

  void validate() const;
};

struct TrainState {
  DecoderWeights weights;
  DecoderWeights moment1;
  DecoderWeights moment2;
  std::int64_t step = 0;
  std::vector<std::pair<std::int64_t, double>> loss_history;
};

// Tokenized training texts. Texts longer than max_seq_len are sampled as
// random windows; texts shorter than 2 tokens are dropped.
struct TrainingData {
  std::vector<TokenSequence> sequences;

  static TrainingData from_texts(std::span<const std::string> texts, const Vocabulary& vocab);
};

TrainState init_train_state(const ModelConfig& config, const TrainSettings& settings);

// Runs `settings.steps` optimizer steps on `state`. The batch sampler is
// seeded from (config.rng_seed, state.step), so a run is reproducible
// bit-for-bit. Throws ErrorCategory::kNumeric if the loss diverges.
void train_steps(TrainState& state, const TrainingData& data, const TrainSettings& settings);

TrainState train(std::span<const std::string> texts, const Vocabulary& vocab, const ModelConfig& config,
                 const TrainSettings& settings);
// Trains on the document bodies of `corpus`.
TrainState train(const Corpus& corpus, const Vocabulary& vocab, const ModelConfig& config,
                 const TrainSettings& settings);

// Mean NLL over all next-token predictions of every sequence (windows of
// max_seq_len for long texts), weighted by prediction count.
double mean_nll(const TrainingData& data, const DecoderWeights& weights);

}  // namespace cpikw::lm
