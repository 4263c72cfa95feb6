#pragma once

// Loop-by-loop reference implementation of the decoder forward pass. It
// reads weights element by element and shares no code with the library's
// Eigen kernels, so it can serve as an independent oracle.

#include <cmath>
#include <vector>

#include "cpikw/lm/model.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid from(const cpikw::lm::Matrix& m) {
  Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g[i].size(); ++j) g[i][j] = m(static_cast<long>(i), static_cast<long>(j));
  return g;
}

inline Grid matmul(const Grid& a, const cpikw::lm::Matrix& b) {
  Grid out(a.size(), std::vector<double>(static_cast<std::size_t>(b.cols()), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (long j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a[i].size(); ++k) s += a[i][k] * b(static_cast<long>(k), j);
      out[i][static_cast<std::size_t>(j)] = s;
    }
  return out;
}

inline Grid add(const Grid& a, const Grid& b) {
  Grid out = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) out[i][j] += b[i][j];
  return out;
}

inline Grid add_row(const Grid& a, const cpikw::lm::Matrix& row) {
  Grid out = a;
  for (auto& r : out)
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += row(0, static_cast<long>(j));
  return out;
}

inline Grid layer_norm(const Grid& x, const cpikw::lm::Matrix& gain, const cpikw::lm::Matrix& bias,
                       double eps = cpikw::lm::kLayerNormEps) {
  Grid out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double mean = 0.0;
    for (double v : x[i]) mean += v;
    mean /= static_cast<double>(x[i].size());
    double var = 0.0;
    for (double v : x[i]) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x[i].size());
    for (std::size_t j = 0; j < x[i].size(); ++j)
      out[i][j] = (x[i][j] - mean) / std::sqrt(var + eps) * gain(0, static_cast<long>(j)) + bias(0, static_cast<long>(j));
  }
  return out;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

// Per-head causal attention with explicit score/softmax/mix loops; returns
// the concatenated head outputs.
inline Grid attention(const Grid& q, const Grid& k, const Grid& v, int heads, bool causal) {
  const std::size_t n = k.size();
  const std::size_t d = k[0].size();
  const std::size_t dh = d / static_cast<std::size_t>(heads);
  Grid out(q.size(), std::vector<double>(d, 0.0));
  for (int h = 0; h < heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * dh;
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::vector<double> s(n, -INFINITY);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < n; ++j) {
        if (causal && j > i) continue;
        double dot = 0.0;
        for (std::size_t c = 0; c < dh; ++c) dot += q[i][off + c] * k[j][off + c];
        s[j] = dot / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, s[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        s[j] = (causal && j > i) ? 0.0 : std::exp(s[j] - mx);
        z += s[j];
      }
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < dh; ++c) out[i][off + c] += s[j] / z * v[j][off + c];
    }
  }
  return out;
}

inline Grid block(const Grid& x, const cpikw::lm::LayerWeights& w, int heads, const Grid* query_rows) {
  const Grid a = layer_norm(x, w.ln1_gain, w.ln1_bias);
  const Grid q = matmul(query_rows ? *query_rows : a, w.w_query);
  const Grid att = attention(q, matmul(a, w.w_key), matmul(a, w.w_value), heads, true);
  const Grid xm = add(x, matmul(att, w.w_out));
  Grid u = add_row(matmul(layer_norm(xm, w.ln2_gain, w.ln2_bias), w.ffn_in), w.ffn_in_bias);
  for (auto& r : u)
    for (double& v : r) v = gelu(v);
  return add(xm, add_row(matmul(u, w.ffn_out), w.ffn_out_bias));
}

inline Grid embed(const std::vector<int>& ids, const cpikw::lm::DecoderWeights& w) {
  Grid x(ids.size(), std::vector<double>(static_cast<std::size_t>(w.config.d_model)));
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < x[i].size(); ++j)
      x[i][j] = w.token_embedding(ids[i], static_cast<long>(j)) + w.position_embedding(static_cast<long>(i), static_cast<long>(j));
  return x;
}

inline Grid hidden(const std::vector<int>& ids, const cpikw::lm::DecoderWeights& w) {
  Grid x = embed(ids, w);
  for (const auto& layer : w.layers) x = block(x, layer, w.config.n_heads, nullptr);
  return x;
}

inline Grid forward(const std::vector<int>& ids, const cpikw::lm::DecoderWeights& w) {
  const Grid x = hidden(ids, w);
  Grid queries(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) queries[i] = from(w.query_position_embedding.row(static_cast<long>(i)))[0];
  const Grid y = block(x, w.query_layer, w.config.n_heads, &queries);
  return add_row(matmul(layer_norm(y, w.final_ln_gain, w.final_ln_bias), w.output_weight), w.output_bias);
}

inline double nll(const std::vector<int>& ids, const cpikw::lm::DecoderWeights& w) {
  const Grid logits = forward(ids, w);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
    double z = 0.0;
    for (double v : logits[i]) z += std::exp(v);
    total += -std::log(std::exp(logits[i][static_cast<std::size_t>(ids[i + 1])]) / z);
  }
  return total / static_cast<double>(ids.size() - 1);
}

}  // namespace oracle
