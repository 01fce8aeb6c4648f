#pragma once

#include <string>
#include <string_view>

namespace bicmix::io {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);
// Raw 32-byte digest.
std::string sha256_raw(std::string_view bytes);

}  // namespace bicmix::io
