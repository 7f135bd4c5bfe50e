#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace patchstart {

// Writes to a sibling temp file and renames it over `path`, so readers never
// observe a partially written file. Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace patchstart
