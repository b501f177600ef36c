#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace clincascade::io {

/// Whole-file read; failures raise ErrorKind::io tagged with the caller.
std::string read_file(const std::filesystem::path& path, std::string_view module, std::string_view operation);

/// Writes atomically enough for our purposes: parent directories are created
/// and the file is truncated first.
void write_file(const std::filesystem::path& path, std::string_view content, std::string_view module,
                std::string_view operation);

}  // namespace clincascade::io
