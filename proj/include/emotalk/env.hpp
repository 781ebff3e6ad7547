#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace emotalk {

std::optional<std::string> env(const char* name);
std::string env_or(const char* name, const std::string& fallback);
long env_int_or(const char* name, long fallback);

/// Directory holding the shipped data files (lexicons, templates,
/// migrations). ET_DATA_DIR overrides the build-time location.
std::filesystem::path data_dir();

std::string read_file(const std::filesystem::path& path);

}  // namespace emotalk
