#pragma once

#include <string>
#include <string_view>

namespace cpmi {

// Lowercase hex SHA-256 of bytes.
std::string sha256_hex(std::string_view bytes);

// SHA-256 of a file's contents. Throws IoError when unreadable.
std::string sha256_file(const std::string& path);

}  // namespace cpmi
