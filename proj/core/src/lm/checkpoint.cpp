#include "cpikw/lm/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "cpikw/digest.hpp"
#include "cpikw/error.hpp"

namespace cpikw::lm {

namespace {

constexpr char kMagic[8] = {'C', 'P', 'I', 'K', 'W', 'L', 'M', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian host");

template <class T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string_view take(std::size_t n) {
    need(n);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) fail(ErrorCategory::kInput, "checkpoint: truncated file");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_weights(const DecoderWeights& weights) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const ModelConfig& c = weights.config;
  for (int v : {c.n_layers, c.d_model, c.n_heads, c.d_ff, c.vocab_size, c.max_seq_len}) put<std::int64_t>(out, v);
  put<std::uint64_t>(out, c.rng_seed);
  const auto list = tensors(weights);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(list.size()));
  for (const auto& t : list) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.tensor->rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.tensor->cols()));
    out.append(reinterpret_cast<const char*>(t.tensor->data()),
               static_cast<std::size_t>(t.tensor->size()) * sizeof(double));
  }
  return out;
}

DecoderWeights parse_weights(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    fail(ErrorCategory::kInput, "checkpoint: bad magic");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) fail(ErrorCategory::kInput, "checkpoint: unsupported version " + std::to_string(version));
  ModelConfig c;
  for (int* field : {&c.n_layers, &c.d_model, &c.n_heads, &c.d_ff, &c.vocab_size, &c.max_seq_len}) {
    *field = static_cast<int>(in.get<std::int64_t>());
  }
  c.rng_seed = in.get<std::uint64_t>();
  DecoderWeights w = DecoderWeights::zeros(c);
  auto list = tensors(w);
  if (in.get<std::uint32_t>() != list.size()) fail(ErrorCategory::kInput, "checkpoint: tensor count mismatch");
  for (auto& t : list) {
    const auto name_len = in.get<std::uint32_t>();
    if (in.take(name_len) != t.name) fail(ErrorCategory::kInput, "checkpoint: expected tensor " + t.name);
    const auto rows = in.get<std::uint64_t>();
    const auto cols = in.get<std::uint64_t>();
    if (rows != static_cast<std::uint64_t>(t.tensor->rows()) || cols != static_cast<std::uint64_t>(t.tensor->cols())) {
      fail(ErrorCategory::kInput, "checkpoint: shape mismatch for " + t.name);
    }
    const std::string_view raw = in.take(static_cast<std::size_t>(rows * cols) * sizeof(double));
    std::memcpy(t.tensor->data(), raw.data(), raw.size());
  }
  if (!in.done()) fail(ErrorCategory::kInput, "checkpoint: trailing bytes");
  if (!w.all_finite()) fail(ErrorCategory::kNumeric, "checkpoint: non-finite weights");
  return w;
}

void save_checkpoint(const std::filesystem::path& path, const DecoderWeights& weights) {
  write_file(path, serialize_weights(weights));
}

DecoderWeights load_checkpoint(const std::filesystem::path& path) { return parse_weights(read_file(path)); }

}  // namespace cpikw::lm
