#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cpikw {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary file and renames, so readers never see a partial artifact.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace cpikw
