// Minimal SHA-256, used for content-addressing vocab files in trace headers.
#pragma once

#include <cstdint>
#include <string>

namespace spellm {

// Lowercase hex digest of the input bytes.
std::string sha256_hex(const std::string& data);

}  // namespace spellm
