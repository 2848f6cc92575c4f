#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace copycat {

// Hex SHA-256 of a byte buffer (OpenSSL-backed).
std::string sha256_hex(std::span<const uint8_t> bytes);
std::string sha256_hex(const std::string& bytes);

}  // namespace copycat
