#pragma once

#include <string>
#include <string_view>

namespace mmgr {

/// Lowercase hex SHA-256 of `data` (64 characters).
std::string sha256_hex(std::string_view data);

bool is_sha256_hex(std::string_view s);

}  // namespace mmgr
