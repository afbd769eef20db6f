#pragma once
// Minimal SHA-256 (FIPS 180-4) used for layer-file digests in the manifest.

#include <cstdint>
#include <string>
#include <string_view>

namespace polyrag::detail {

// Hex-encoded SHA-256 of the given bytes.
std::string sha256_hex(std::string_view data);

}  // namespace polyrag::detail
