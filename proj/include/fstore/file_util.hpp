#pragma once

#include <filesystem>
#include <string>

namespace fstore {

/// Writes to a sibling temp file then renames over `path`, so readers see old or new bytes only.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace fstore
