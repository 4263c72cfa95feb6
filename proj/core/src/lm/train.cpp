#include "cpikw/lm/train.hpp"

#include <cmath>

#include "cpikw/error.hpp"
#include "cpikw/random.hpp"
#include "cpikw/text.hpp"

namespace cpikw::lm {

std::string_view optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd_momentum";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd_momentum" || name == "sgd") return OptimizerKind::kSgdMomentum;
  fail(ErrorCategory::kConfig, "unknown optimizer: " + std::string(name));
}

void TrainSettings::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorCategory::kConfig, "train settings: " + msg);
  };
  require(steps >= 0, "steps must be non-negative");
  require(batch_size >= 1, "batch_size must be positive");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must be in [0, 1)");
  require(grad_clip >= 0.0, "grad_clip must be non-negative");
  require(init_scale > 0.0, "init_scale must be positive");
}

TrainingData TrainingData::from_texts(std::span<const std::string> texts, const Vocabulary& vocab) {
  TrainingData data;
  for (const std::string& t : texts) {
    if (t.empty()) continue;
    TokenSequence seq;
    for (char32_t c : text::decode_utf8(t)) seq.ids.push_back(vocab.id(c));
    if (seq.size() >= 2) data.sequences.push_back(std::move(seq));
  }
  return data;
}

TrainState init_train_state(const ModelConfig& config, const TrainSettings& settings) {
  settings.validate();
  TrainState state;
  state.weights = init_weights(config, settings.init_scale);
  state.moment1 = DecoderWeights::zeros(config);
  state.moment2 = DecoderWeights::zeros(config);
  return state;
}

namespace {

TokenSequence sample_window(const TokenSequence& seq, std::size_t max_len, Rng& rng) {
  if (seq.size() <= max_len) return seq;
  const std::size_t start = rng.below(seq.size() - max_len + 1);
  TokenSequence out;
  out.ids.assign(seq.ids.begin() + static_cast<std::ptrdiff_t>(start),
                 seq.ids.begin() + static_cast<std::ptrdiff_t>(start + max_len));
  return out;
}

}  // namespace

void train_steps(TrainState& state, const TrainingData& data, const TrainSettings& settings) {
  settings.validate();
  if (data.sequences.empty()) fail(ErrorCategory::kInput, "train: no training sequences");
  const ModelConfig& config = state.weights.config;
  const auto max_len = static_cast<std::size_t>(config.max_seq_len);
  DecoderWeights grad = DecoderWeights::zeros(config);
  auto params = tensors(state.weights);
  auto grads = tensors(grad);
  auto m1 = tensors(state.moment1);
  auto m2 = tensors(state.moment2);

  for (int s = 0; s < settings.steps; ++s) {
    Rng rng(derive_seed(config.rng_seed, "batch", static_cast<std::uint64_t>(state.step)));
    grad.set_zero();
    double loss = 0.0;
    for (int b = 0; b < settings.batch_size; ++b) {
      const TokenSequence& seq = data.sequences[rng.below(data.sequences.size())];
      loss += accumulate_gradient(sample_window(seq, max_len, rng), state.weights, grad);
    }
    const double inv_batch = 1.0 / settings.batch_size;
    loss *= inv_batch;
    if (!std::isfinite(loss)) {
      fail(ErrorCategory::kNumeric, "train: loss diverged (non-finite) at step " + std::to_string(state.step));
    }
    double norm_sq = 0.0;
    for (auto& g : grads) {
      *g.tensor *= inv_batch;
      norm_sq += g.tensor->squaredNorm();
    }
    const double norm = std::sqrt(norm_sq);
    if (!std::isfinite(norm)) {
      fail(ErrorCategory::kNumeric, "train: gradient diverged (non-finite) at step " + std::to_string(state.step));
    }
    const double clip = (settings.grad_clip > 0.0 && norm > settings.grad_clip) ? settings.grad_clip / norm : 1.0;

    ++state.step;
    const double lr = settings.learning_rate;
    if (settings.optimizer == OptimizerKind::kSgdMomentum) {
      for (std::size_t t = 0; t < params.size(); ++t) {
        Matrix& v = *m1[t].tensor;
        v = settings.momentum * v + clip * *grads[t].tensor;
        *params[t].tensor -= lr * v;
      }
    } else {
      const double b1 = settings.momentum;
      const double b2 = settings.beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
      for (std::size_t t = 0; t < params.size(); ++t) {
        Matrix& m = *m1[t].tensor;
        Matrix& v = *m2[t].tensor;
        const Matrix g = clip * *grads[t].tensor;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        params[t].tensor->array() -=
            lr * (m.array() / c1) / ((v.array() / c2).sqrt() + settings.adam_epsilon);
      }
    }
    state.loss_history.emplace_back(state.step, loss);
  }
}

TrainState train(std::span<const std::string> texts, const Vocabulary& vocab, const ModelConfig& config,
                 const TrainSettings& settings) {
  ModelConfig cfg = config;
  cfg.vocab_size = static_cast<int>(vocab.size());
  TrainState state = init_train_state(cfg, settings);
  train_steps(state, TrainingData::from_texts(texts, vocab), settings);
  return state;
}

TrainState train(const Corpus& corpus, const Vocabulary& vocab, const ModelConfig& config,
                 const TrainSettings& settings) {
  if (corpus.empty()) fail(ErrorCategory::kInput, "train: empty corpus");
  std::vector<std::string> texts;
  for (const Document& doc : corpus) texts.push_back(doc.text);
  return train(texts, vocab, config, settings);
}

double mean_nll(const TrainingData& data, const DecoderWeights& weights) {
  const auto max_len = static_cast<std::size_t>(weights.config.max_seq_len);
  double total = 0.0;
  std::size_t count = 0;
  for (const TokenSequence& seq : data.sequences) {
    for (std::size_t start = 0; start + 1 < seq.size(); start += max_len - 1) {
      const std::size_t end = std::min(seq.size(), start + max_len);
      if (end - start < 2) break;
      TokenSequence window;
      window.ids.assign(seq.ids.begin() + static_cast<std::ptrdiff_t>(start),
                        seq.ids.begin() + static_cast<std::ptrdiff_t>(end));
      const std::size_t preds = window.size() - 1;
      total += nll_loss(window, weights) * static_cast<double>(preds);
      count += preds;
      if (end == seq.size()) break;
    }
  }
  if (count == 0) fail(ErrorCategory::kInput, "mean_nll: no predictions");
  return total / static_cast<double>(count);
}

}  // namespace cpikw::lm
