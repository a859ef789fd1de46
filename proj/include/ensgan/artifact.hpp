#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace ensgan {

// Versioned binary container:
//   8-byte magic | u32 version | u64 payload length | CBOR payload | u64 FNV-1a
// All integers little-endian. Any truncation, checksum or version mismatch
// raises ArtifactError.
void write_container(const std::filesystem::path& path, std::string_view magic,
                     std::uint32_t version, const nlohmann::json& payload);
nlohmann::json read_container(const std::filesystem::path& path,
                              std::string_view magic,
                              std::uint32_t expected_version);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace ensgan
