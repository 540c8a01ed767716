#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace rforge {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::filesystem::path& path);

// Cheap non-cryptographic hash used where only spreading matters
// (mock providers, per-item seed derivation).
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0);

}  // namespace rforge
