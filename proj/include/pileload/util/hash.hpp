#pragma once

#include <string>
#include <string_view>

namespace pileload::util {

/// Hex SHA-1 of "blob <size>\0" followed by the bytes (git's object id).
std::string git_blob_sha1(std::string_view bytes);

}  // namespace pileload::util
