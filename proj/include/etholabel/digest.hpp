#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace etholabel {

// SHA-256 (FIPS 180-4). Self-contained; used for config and request digests
// and as the content-addressed cache key.
std::array<std::uint8_t, 32> sha256(std::string_view data);

std::string sha256_hex(std::string_view data);

// First 16 hex chars of sha256; compact ids for directories and reports.
std::string sha256_hex_short(std::string_view data);

}  // namespace etholabel
