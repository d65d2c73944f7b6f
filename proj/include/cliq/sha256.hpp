#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace cliq {

// Lowercase hex SHA-256 digest of a byte buffer.
std::string sha256_hex(const std::uint8_t* data, std::size_t len);

}  // namespace cliq
