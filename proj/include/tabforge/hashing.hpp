#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace tabforge {

/// Lowercase hex SHA-256 of the bytes in `data`.
std::string sha256_hex(std::string_view data);

/// First 8 bytes of SHA-256 as an integer.
std::uint64_t hash64(std::string_view data);

/// Seed for one job, derived from the master seed and a key path. Stable
/// across runs and independent of scheduling order.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::string_view> parts);

}  // namespace tabforge
