#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "cpikw/lm/model.hpp"

namespace cpikw::lm {

// Binary checkpoint: magic, format version, ModelConfig, then every tensor
// in canonical order as (name, rows, cols, little-endian doubles).
// Round trips are bit-exact.
std::string serialize_weights(const DecoderWeights& weights);
DecoderWeights parse_weights(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const DecoderWeights& weights);
DecoderWeights load_checkpoint(const std::filesystem::path& path);

}  // namespace cpikw::lm
