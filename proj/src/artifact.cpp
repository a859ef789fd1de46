#include "ensgan/artifact.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <sstream>
#include <vector>

#include "ensgan/common.hpp"

namespace ensgan {
namespace {

constexpr std::size_t kMagicSize = 8;

std::string padded_magic(std::string_view magic) {
  std::string m(magic.substr(0, kMagicSize));
  m.resize(kMagicSize, '\0');
  return m;
}

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(std::string_view in, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

void write_container(const std::filesystem::path& path, std::string_view magic,
                     std::uint32_t version, const nlohmann::json& payload) {
  const std::vector<std::uint8_t> cbor = nlohmann::json::to_cbor(payload);
  const std::string_view body(reinterpret_cast<const char*>(cbor.data()), cbor.size());
  std::string out = padded_magic(magic);
  put_le<std::uint32_t>(out, version);
  put_le<std::uint64_t>(out, cbor.size());
  out.append(body);
  put_le<std::uint64_t>(out, fnv1a64(body));
  write_text_file(path, out);
}

nlohmann::json read_container(const std::filesystem::path& path,
                              std::string_view magic,
                              std::uint32_t expected_version) {
  std::string bytes;
  try {
    bytes = read_text_file(path);
  } catch (const Error& e) {
    throw ArtifactError(e.what());
  }
  const std::size_t header = kMagicSize + 4 + 8;
  if (bytes.size() < header + 8) {
    throw ArtifactError(path.string() + ": truncated header");
  }
  if (bytes.compare(0, kMagicSize, padded_magic(magic)) != 0) {
    throw ArtifactError(path.string() + ": wrong file type");
  }
  const auto version = get_le<std::uint32_t>(bytes, kMagicSize);
  if (version != expected_version) {
    throw ArtifactError(path.string() + ": version " + std::to_string(version) +
                        ", expected " + std::to_string(expected_version));
  }
  const auto length = get_le<std::uint64_t>(bytes, kMagicSize + 4);
  if (length > bytes.size() || bytes.size() != header + length + 8) {
    throw ArtifactError(path.string() + ": truncated or oversized payload");
  }
  const std::string_view body(bytes.data() + header, length);
  if (fnv1a64(body) != get_le<std::uint64_t>(bytes, header + length)) {
    throw ArtifactError(path.string() + ": checksum mismatch");
  }
  try {
    return nlohmann::json::from_cbor(body);
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(path.string() + ": corrupt payload: " + e.what());
  }
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xf]);
  }
  return hex;
}

std::string sha256_file(const std::filesystem::path& path) {
  return sha256_hex(read_text_file(path));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("write failed for " + path.string());
}

}  // namespace ensgan
