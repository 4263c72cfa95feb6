#include "cpikw/lm/model.hpp"

#include <cmath>
#include <numbers>

#include "cpikw/error.hpp"
#include "cpikw/random.hpp"

namespace cpikw::lm {

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorCategory::kConfig, "model config: " + msg);
  };
  require(n_layers >= 1, "n_layers must be positive");
  require(d_model >= 1, "d_model must be positive");
  require(n_heads >= 1, "n_heads must be positive");
  require(d_model % n_heads == 0, "d_model must be divisible by n_heads");
  require(d_ff >= 1, "d_ff must be positive");
  require(vocab_size >= 1, "vocab_size must be positive");
  require(max_seq_len >= 2, "max_seq_len must be at least 2");
}

namespace {

LayerWeights zero_layer(const ModelConfig& c) {
  const int d = c.d_model;
  const int f = c.d_ff;
  LayerWeights l;
  l.ln1_gain = Matrix::Zero(1, d);
  l.ln1_bias = Matrix::Zero(1, d);
  l.w_query = Matrix::Zero(d, d);
  l.w_key = Matrix::Zero(d, d);
  l.w_value = Matrix::Zero(d, d);
  l.w_out = Matrix::Zero(d, d);
  l.ln2_gain = Matrix::Zero(1, d);
  l.ln2_bias = Matrix::Zero(1, d);
  l.ffn_in = Matrix::Zero(d, f);
  l.ffn_in_bias = Matrix::Zero(1, f);
  l.ffn_out = Matrix::Zero(f, d);
  l.ffn_out_bias = Matrix::Zero(1, d);
  return l;
}

void append_layer(std::vector<NamedTensor>& out, LayerWeights& l, const std::string& prefix) {
  out.push_back({prefix + "ln1_gain", &l.ln1_gain});
  out.push_back({prefix + "ln1_bias", &l.ln1_bias});
  out.push_back({prefix + "w_query", &l.w_query});
  out.push_back({prefix + "w_key", &l.w_key});
  out.push_back({prefix + "w_value", &l.w_value});
  out.push_back({prefix + "w_out", &l.w_out});
  out.push_back({prefix + "ln2_gain", &l.ln2_gain});
  out.push_back({prefix + "ln2_bias", &l.ln2_bias});
  out.push_back({prefix + "ffn_in", &l.ffn_in});
  out.push_back({prefix + "ffn_in_bias", &l.ffn_in_bias});
  out.push_back({prefix + "ffn_out", &l.ffn_out});
  out.push_back({prefix + "ffn_out_bias", &l.ffn_out_bias});
}

}  // namespace

DecoderWeights DecoderWeights::zeros(const ModelConfig& c) {
  c.validate();
  DecoderWeights w;
  w.config = c;
  w.token_embedding = Matrix::Zero(c.vocab_size, c.d_model);
  w.position_embedding = Matrix::Zero(c.max_seq_len, c.d_model);
  for (int l = 0; l < c.n_layers; ++l) w.layers.push_back(zero_layer(c));
  w.query_position_embedding = Matrix::Zero(c.max_seq_len, c.d_model);
  w.query_layer = zero_layer(c);
  w.final_ln_gain = Matrix::Zero(1, c.d_model);
  w.final_ln_bias = Matrix::Zero(1, c.d_model);
  w.output_weight = Matrix::Zero(c.d_model, c.vocab_size);
  w.output_bias = Matrix::Zero(1, c.vocab_size);
  return w;
}

void DecoderWeights::set_zero() {
  for (auto& t : tensors(*this)) t.tensor->setZero();
}

std::size_t DecoderWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors(*this)) n += static_cast<std::size_t>(t.tensor->size());
  return n;
}

bool DecoderWeights::all_finite() const {
  for (const auto& t : tensors(*this)) {
    if (!t.tensor->allFinite()) return false;
  }
  return true;
}

std::vector<NamedTensor> tensors(DecoderWeights& w) {
  std::vector<NamedTensor> out;
  out.push_back({"token_embedding", &w.token_embedding});
  out.push_back({"position_embedding", &w.position_embedding});
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    append_layer(out, w.layers[l], "layers." + std::to_string(l) + ".");
  }
  out.push_back({"query_position_embedding", &w.query_position_embedding});
  append_layer(out, w.query_layer, "query_layer.");
  out.push_back({"final_ln_gain", &w.final_ln_gain});
  out.push_back({"final_ln_bias", &w.final_ln_bias});
  out.push_back({"output_weight", &w.output_weight});
  out.push_back({"output_bias", &w.output_bias});
  return out;
}

std::vector<ConstNamedTensor> tensors(const DecoderWeights& w) {
  std::vector<ConstNamedTensor> out;
  for (auto& t : tensors(const_cast<DecoderWeights&>(w))) out.push_back({std::move(t.name), t.tensor});
  return out;
}

DecoderWeights init_weights(const ModelConfig& config, double init_scale) {
  DecoderWeights w = DecoderWeights::zeros(config);
  Rng rng(derive_seed(config.rng_seed, "init"));
  for (auto& t : tensors(w)) {
    const std::string& name = t.name;
    const bool is_gain = name.ends_with("_gain");
    const bool is_bias = name.ends_with("_bias");
    if (is_gain) {
      t.tensor->setOnes();
    } else if (!is_bias) {
      for (Eigen::Index i = 0; i < t.tensor->size(); ++i) t.tensor->data()[i] = init_scale * rng.gaussian();
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Forward building blocks

namespace {

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd rstd;
};

Matrix layer_norm_cached(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache* cache) {
  const Eigen::Index n = x.rows();
  const double d = static_cast<double>(x.cols());
  Matrix xhat(n, x.cols());
  Eigen::VectorXd rstd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).sum() / d;
    const RowVector centered = x.row(i).array() - mean;
    const double var = centered.squaredNorm() / d;
    rstd(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = centered * rstd(i);
  }
  Matrix y = (xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

// Given dy, returns dx and accumulates gain/bias gradients.
Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& gain, Matrix& dgain,
                           Matrix& dbias) {
  dgain.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const double d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_dxhat = dxhat.row(i).sum() / d;
    const double mean_dxhat_xhat = dxhat.row(i).dot(cache.xhat.row(i)) / d;
    dx.row(i) = cache.rstd(i) *
                (dxhat.row(i).array() - mean_dxhat - cache.xhat.row(i).array() * mean_dxhat_xhat).matrix();
  }
  return dx;
}

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// Attention core over already-projected Q (rows are positions first_row..),
// K and V (all positions). Writes concatenated head outputs.
void attend(const Matrix& q, const Matrix& k, const Matrix& v, int n_heads, bool causal, Eigen::Index first_row,
            Matrix& out, std::vector<Matrix>* probs) {
  const Eigen::Index n = k.rows();
  const Eigen::Index m = q.rows();
  const Eigen::Index dh = k.cols() / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  out.setZero(m, k.cols());
  if (probs) probs->assign(n_heads, Matrix::Zero(m, n));
  for (int h = 0; h < n_heads; ++h) {
    const Eigen::Index off = h * dh;
    for (Eigen::Index r = 0; r < m; ++r) {
      const Eigen::Index pos = first_row + r;
      const Eigen::Index len = causal ? pos + 1 : n;
      Eigen::VectorXd s = (k.block(0, off, len, dh) * q.row(r).segment(off, dh).transpose()) * scale;
      s.array() -= s.maxCoeff();
      s = s.array().exp();
      s /= s.sum();
      out.row(r).segment(off, dh) = s.transpose() * v.block(0, off, len, dh);
      if (probs) (*probs)[h].row(r).head(len) = s.transpose();
    }
  }
}

// Gradients of `attend` (first_row = 0, m = n).
void attend_backward(const Matrix& dout, const Matrix& q, const Matrix& k, const Matrix& v,
                     const std::vector<Matrix>& probs, int n_heads, bool causal, Matrix& dq, Matrix& dk,
                     Matrix& dv) {
  const Eigen::Index n = k.rows();
  const Eigen::Index dh = k.cols() / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  dq.setZero(q.rows(), q.cols());
  dk.setZero(k.rows(), k.cols());
  dv.setZero(v.rows(), v.cols());
  for (int h = 0; h < n_heads; ++h) {
    const Eigen::Index off = h * dh;
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const Eigen::Index len = causal ? i + 1 : n;
      const Eigen::VectorXd p = probs[h].row(i).head(len).transpose();
      const RowVector dout_i = dout.row(i).segment(off, dh);
      const Eigen::VectorXd dp = v.block(0, off, len, dh) * dout_i.transpose();
      dv.block(0, off, len, dh) += p * dout_i;
      const double dot = p.dot(dp);
      const Eigen::VectorXd ds = (p.array() * (dp.array() - dot)).matrix() * scale;
      dq.row(i).segment(off, dh) += ds.transpose() * k.block(0, off, len, dh);
      dk.block(0, off, len, dh) += ds * q.row(i).segment(off, dh);
    }
  }
}

struct BlockCache {
  Matrix x_in;
  LayerNormCache ln1;
  Matrix a;        // LN1 output (keys/values source)
  Matrix q_in;     // query source rows
  Matrix q, k, v;
  std::vector<Matrix> probs;
  Matrix attn;     // concatenated heads
  Matrix x_mha;
  LayerNormCache ln2;
  Matrix b;
  Matrix u;        // pre-activation
  Matrix g;        // GeLU(u)
};

// One residual block. When `query_rows` is non-null the block acts as the
// query layer: queries come from those rows and keys/values from LN1(x).
Matrix block_forward(const Matrix& x, const LayerWeights& w, int n_heads, const Matrix* query_rows,
                     BlockCache* cache) {
  LayerNormCache ln1;
  Matrix a = layer_norm_cached(x, w.ln1_gain, w.ln1_bias, cache ? &ln1 : nullptr);
  const Matrix& q_in = query_rows ? *query_rows : a;
  Matrix q = q_in * w.w_query;
  Matrix k = a * w.w_key;
  Matrix v = a * w.w_value;
  Matrix attn;
  std::vector<Matrix> probs;
  attend(q, k, v, n_heads, true, 0, attn, cache ? &probs : nullptr);
  Matrix x_mha = x + attn * w.w_out;
  LayerNormCache ln2;
  Matrix b = layer_norm_cached(x_mha, w.ln2_gain, w.ln2_bias, cache ? &ln2 : nullptr);
  Matrix u = (b * w.ffn_in).rowwise() + w.ffn_in_bias.row(0);
  Matrix g = u.unaryExpr([](double t) { return gelu(t); });
  Matrix y = x_mha + ((g * w.ffn_out).rowwise() + w.ffn_out_bias.row(0));
  if (cache) {
    cache->x_in = x;
    cache->ln1 = std::move(ln1);
    cache->a = std::move(a);
    if (query_rows) cache->q_in = *query_rows;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->attn = std::move(attn);
    cache->x_mha = std::move(x_mha);
    cache->ln2 = std::move(ln2);
    cache->b = std::move(b);
    cache->u = std::move(u);
    cache->g = std::move(g);
  }
  return y;
}

// Backward of block_forward. Returns dx; dquery_rows receives the gradient
// wrt the query source when the block is the query layer.
Matrix block_backward(const Matrix& dy, const LayerWeights& w, int n_heads, const BlockCache& c, bool is_query,
                      LayerWeights& gw, Matrix* dquery_rows) {
  // FFN sublayer
  gw.ffn_out_bias.row(0) += dy.colwise().sum();
  gw.ffn_out.noalias() += c.g.transpose() * dy;
  Matrix du = dy * w.ffn_out.transpose();
  for (Eigen::Index i = 0; i < du.size(); ++i) du.data()[i] *= gelu_grad(c.u.data()[i]);
  gw.ffn_in_bias.row(0) += du.colwise().sum();
  gw.ffn_in.noalias() += c.b.transpose() * du;
  const Matrix db = du * w.ffn_in.transpose();
  Matrix dx_mha = dy + layer_norm_backward(db, c.ln2, w.ln2_gain, gw.ln2_gain, gw.ln2_bias);

  // Attention sublayer
  gw.w_out.noalias() += c.attn.transpose() * dx_mha;
  const Matrix dattn = dx_mha * w.w_out.transpose();
  Matrix dq, dk, dv;
  attend_backward(dattn, c.q, c.k, c.v, c.probs, n_heads, true, dq, dk, dv);
  const Matrix& q_src = is_query ? c.q_in : c.a;
  gw.w_query.noalias() += q_src.transpose() * dq;
  gw.w_key.noalias() += c.a.transpose() * dk;
  gw.w_value.noalias() += c.a.transpose() * dv;
  Matrix da = dk * w.w_key.transpose() + dv * w.w_value.transpose();
  if (is_query) {
    if (dquery_rows) *dquery_rows = dq * w.w_query.transpose();
  } else {
    da.noalias() += dq * w.w_query.transpose();
  }
  return dx_mha + layer_norm_backward(da, c.ln1, w.ln1_gain, gw.ln1_gain, gw.ln1_bias);
}

void check_tokens(const TokenSequence& tokens, const DecoderWeights& w) {
  const auto n = tokens.size();
  if (n == 0 || n > static_cast<std::size_t>(w.config.max_seq_len)) {
    fail(ErrorCategory::kInput, "sequence length " + std::to_string(n) + " outside [1, max_seq_len=" +
                                    std::to_string(w.config.max_seq_len) + "]");
  }
  for (TokenId id : tokens.ids) {
    if (id < 0 || id >= w.config.vocab_size) {
      fail(ErrorCategory::kInput, "token id " + std::to_string(id) + " outside vocabulary");
    }
  }
}

void check_finite(const Matrix& x, const char* what) {
  if (!x.allFinite()) fail(ErrorCategory::kNumeric, std::string(what) + ": non-finite input");
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

Matrix layer_norm_normalized(const Matrix& x) {
  const Matrix ones = Matrix::Ones(1, x.cols());
  const Matrix zeros = Matrix::Zero(1, x.cols());
  return layer_norm_cached(x, ones, zeros, nullptr);
}

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias) {
  return layer_norm_cached(x, gain, bias, nullptr);
}

AttentionOutput attention(const Matrix& query_input, const Matrix& kv_input, const LayerWeights& w, int n_heads,
                          bool causal) {
  check_finite(query_input, "attention");
  check_finite(kv_input, "attention");
  if (query_input.rows() != kv_input.rows() || w.w_query.rows() != query_input.cols() ||
      w.w_key.rows() != kv_input.cols() || w.w_query.cols() % n_heads != 0) {
    fail(ErrorCategory::kInput, "attention: inconsistent shapes");
  }
  AttentionOutput out;
  attend(query_input * w.w_query, kv_input * w.w_key, kv_input * w.w_value, n_heads, causal, 0, out.output,
         &out.weights);
  return out;
}

Matrix multi_head_attention(const Matrix& x, const LayerWeights& w, int n_heads) {
  return attention(x, x, w, n_heads, true).output * w.w_out;
}

Matrix feed_forward(const Matrix& x, const LayerWeights& w) {
  Matrix u = (x * w.ffn_in).rowwise() + w.ffn_in_bias.row(0);
  return (u.unaryExpr([](double t) { return gelu(t); }) * w.ffn_out).rowwise() + w.ffn_out_bias.row(0);
}

Matrix embed(const TokenSequence& tokens, const DecoderWeights& w) {
  check_tokens(tokens, w);
  const auto n = static_cast<Eigen::Index>(tokens.size());
  Matrix x(n, w.config.d_model);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = w.token_embedding.row(tokens.ids[static_cast<std::size_t>(i)]) + w.position_embedding.row(i);
  }
  return x;
}

Matrix decoder_layer(const Matrix& x, const LayerWeights& w, int n_heads) {
  return block_forward(x, w, n_heads, nullptr, nullptr);
}

Matrix hidden_states(const TokenSequence& tokens, const DecoderWeights& w) {
  Matrix x = embed(tokens, w);
  for (const LayerWeights& layer : w.layers) x = decoder_layer(x, layer, w.config.n_heads);
  return x;
}

RowVector query_layer(const Matrix& x_top, const DecoderWeights& w, int next_position) {
  if (next_position < 0 || next_position >= w.config.max_seq_len || next_position >= x_top.rows()) {
    fail(ErrorCategory::kInput, "query_layer: position " + std::to_string(next_position) + " out of range");
  }
  const auto rows = static_cast<Eigen::Index>(next_position) + 1;
  const Matrix x = x_top.topRows(rows);
  const Matrix queries = w.query_position_embedding.topRows(rows);
  const Matrix y = block_forward(x, w.query_layer, w.config.n_heads, &queries, nullptr);
  const Matrix last = layer_norm(y.bottomRows(1), w.final_ln_gain, w.final_ln_bias);
  return last * w.output_weight + w.output_bias;
}

Matrix forward(const TokenSequence& tokens, const DecoderWeights& w) {
  const Matrix x = hidden_states(tokens, w);
  const Matrix queries = w.query_position_embedding.topRows(x.rows());
  const Matrix y = block_forward(x, w.query_layer, w.config.n_heads, &queries, nullptr);
  return (layer_norm(y, w.final_ln_gain, w.final_ln_bias) * w.output_weight).rowwise() + w.output_bias.row(0);
}

namespace {

// -log softmax(logits_i)[target], numerically stable.
double token_nll(const RowVector& logits, TokenId target) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits(target);
}

}  // namespace

double nll_loss(const TokenSequence& tokens, const DecoderWeights& w) {
  if (tokens.size() < 2) fail(ErrorCategory::kInput, "nll_loss: need at least 2 tokens");
  const Matrix logits = forward(tokens, w);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    total += token_nll(logits.row(static_cast<Eigen::Index>(i)), tokens.ids[i + 1]);
  }
  return total / static_cast<double>(tokens.size() - 1);
}

double accumulate_gradient(const TokenSequence& tokens, const DecoderWeights& w, DecoderWeights& grad) {
  if (tokens.size() < 2) fail(ErrorCategory::kInput, "accumulate_gradient: need at least 2 tokens");
  const int heads = w.config.n_heads;
  const auto n = static_cast<Eigen::Index>(tokens.size());

  // Forward with caches.
  Matrix x = embed(tokens, w);
  std::vector<BlockCache> caches(w.layers.size());
  for (std::size_t l = 0; l < w.layers.size(); ++l) x = block_forward(x, w.layers[l], heads, nullptr, &caches[l]);
  const Matrix queries = w.query_position_embedding.topRows(n);
  BlockCache qcache;
  const Matrix y = block_forward(x, w.query_layer, heads, &queries, &qcache);
  LayerNormCache fcache;
  const Matrix yf = layer_norm_cached(y, w.final_ln_gain, w.final_ln_bias, &fcache);
  const Matrix logits = (yf * w.output_weight).rowwise() + w.output_bias.row(0);

  // Loss and dlogits.
  const double inv = 1.0 / static_cast<double>(n - 1);
  Matrix dlogits = Matrix::Zero(n, logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const TokenId target = tokens.ids[static_cast<std::size_t>(i + 1)];
    const RowVector row = logits.row(i);
    total += token_nll(row, target);
    RowVector p = (row.array() - row.maxCoeff()).exp();
    p /= p.sum();
    p(target) -= 1.0;
    dlogits.row(i) = p * inv;
  }

  // Backward.
  grad.output_bias.row(0) += dlogits.colwise().sum();
  grad.output_weight.noalias() += yf.transpose() * dlogits;
  const Matrix dyf = dlogits * w.output_weight.transpose();
  const Matrix dy = layer_norm_backward(dyf, fcache, w.final_ln_gain, grad.final_ln_gain, grad.final_ln_bias);
  Matrix dqueries;
  Matrix dx = block_backward(dy, w.query_layer, heads, qcache, true, grad.query_layer, &dqueries);
  grad.query_position_embedding.topRows(n) += dqueries;
  for (std::size_t l = w.layers.size(); l-- > 0;) {
    dx = block_backward(dx, w.layers[l], heads, caches[l], false, grad.layers[l], nullptr);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    grad.token_embedding.row(tokens.ids[static_cast<std::size_t>(i)]) += dx.row(i);
    grad.position_embedding.row(i) += dx.row(i);
  }
  return total * inv;
}

}  // namespace cpikw::lm
