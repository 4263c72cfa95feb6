#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cpikw/lm/vocabulary.hpp"

namespace cpikw::lm {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct ModelConfig {
  int n_layers = 2;
  int d_model = 32;
  int n_heads = 4;
  int d_ff = 128;
  int vocab_size = 0;
  int max_seq_len = 256;
  std::uint64_t rng_seed = 42;

  int d_head() const { return d_model / n_heads; }
  // Throws on inconsistent hyperparameters.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Parameters of one pre-LN transformer block. The query layer reuses the
// same shape; its queries come from the positional query table instead of
// the block input.
struct LayerWeights {
  Matrix ln1_gain, ln1_bias;  // 1 x d
  Matrix w_query, w_key, w_value;  // d x d, column block h belongs to head h
  Matrix w_out;  // d x d, row block h is head h's output projection
  Matrix ln2_gain, ln2_bias;
  Matrix ffn_in, ffn_in_bias;  // d x f, 1 x f
  Matrix ffn_out, ffn_out_bias;  // f x d, 1 x d
};

struct DecoderWeights {
  ModelConfig config;
  Matrix token_embedding;     // vocab x d
  Matrix position_embedding;  // max_seq_len x d
  std::vector<LayerWeights> layers;
  Matrix query_position_embedding;  // max_seq_len x d
  LayerWeights query_layer;
  Matrix final_ln_gain, final_ln_bias;  // 1 x d
  Matrix output_weight;  // d x vocab
  Matrix output_bias;    // 1 x vocab

  // Correctly shaped, all entries zero (gains included).
  static DecoderWeights zeros(const ModelConfig& config);
  void set_zero();
  std::size_t parameter_count() const;
  bool all_finite() const;
};

// Seeded Gaussian init (std = init_scale), zero biases, unit LayerNorm gains.
DecoderWeights init_weights(const ModelConfig& config, double init_scale = 0.02);

struct NamedTensor {
  std::string name;
  Matrix* tensor;
};
struct ConstNamedTensor {
  std::string name;
  const Matrix* tensor;
};

// Every parameter tensor in a fixed canonical order.
std::vector<NamedTensor> tensors(DecoderWeights& w);
std::vector<ConstNamedTensor> tensors(const DecoderWeights& w);

inline constexpr double kLayerNormEps = 1e-6;

// Per-row (x - mean) / sqrt(var + eps), population variance.
Matrix layer_norm_normalized(const Matrix& x);
Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias);
double gelu(double x);

struct AttentionOutput {
  Matrix output;                // n x d, heads concatenated
  std::vector<Matrix> weights;  // per head, n x n; zero above the diagonal when causal
};

// Scaled dot-product attention over all heads. Queries are projected from
// `query_input`, keys/values from `kv_input`; scale is 1/sqrt(d_head).
AttentionOutput attention(const Matrix& query_input, const Matrix& kv_input, const LayerWeights& w,
                          int n_heads, bool causal);
// Causal self-attention summed over heads through each head's output projection.
Matrix multi_head_attention(const Matrix& x, const LayerWeights& w, int n_heads);
Matrix feed_forward(const Matrix& x, const LayerWeights& w);

// X_0 = token rows + first n position rows.
Matrix embed(const TokenSequence& tokens, const DecoderWeights& w);
// X + MHA(LN(X)), then + FFN(LN(.)).
Matrix decoder_layer(const Matrix& x, const LayerWeights& w, int n_heads);
// Top-layer states X_L after all decoder layers.
Matrix hidden_states(const TokenSequence& tokens, const DecoderWeights& w);
// Logits for the slot after row `next_position` of x_top. The query is row
// `next_position` of the positional query table; keys and values are rows
// 0..next_position of x_top.
RowVector query_layer(const Matrix& x_top, const DecoderWeights& w, int next_position);
// n x vocab logits; row i scores token i+1 and depends only on tokens 0..i.
Matrix forward(const TokenSequence& tokens, const DecoderWeights& w);

// Mean over positions 2..n of -log p(t_i | t_<i).
double nll_loss(const TokenSequence& tokens, const DecoderWeights& w);
// Returns nll_loss and adds its gradient into `grad`.
double accumulate_gradient(const TokenSequence& tokens, const DecoderWeights& w, DecoderWeights& grad);

}  // namespace cpikw::lm
