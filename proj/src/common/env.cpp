#include "emotalk/env.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "emotalk/error.hpp"

#ifndef EMOTALK_DATA_DIR
#define EMOTALK_DATA_DIR "data"
#endif

namespace emotalk {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

std::string env_or(const char* name, const std::string& fallback) {
  return env(name).value_or(fallback);
}

long env_int_or(const char* name, long fallback) {
  const auto v = env(name);
  if (!v) return fallback;
  try {
    return std::stol(*v);
  } catch (const std::exception&) {
    throw Error(Errc::InvalidConfig, std::string(name) + " is not an integer: " + *v);
  }
}

std::filesystem::path data_dir() {
  return env_or("ET_DATA_DIR", EMOTALK_DATA_DIR);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidConfig, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace emotalk
