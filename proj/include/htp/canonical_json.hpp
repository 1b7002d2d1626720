#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace htp {

using Json = nlohmann::json;

// Canonical JSON layout shared by every persisted artifact: object keys sorted
// (nlohmann::json keeps std::map order), floating point numbers printed fixed
// with 6 decimal digits, integers verbatim. Compact output is used for
// fingerprints; indented output for files on disk. Ordered content (report
// sections, transcripts) is always carried in arrays, never in key order.
std::string canonical_dump(const Json& value, bool pretty = false);

/// Lowercase hex SHA-256 of a byte range.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);

/// Rounds to the given number of decimal digits (half away from zero).
double round_to(double value, int digits);

}  // namespace htp
