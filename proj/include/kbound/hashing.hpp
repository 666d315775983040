#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kbound {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);

/// 64-bit seed derived from a base seed and a label, stable across runs and platforms.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

}  // namespace kbound
