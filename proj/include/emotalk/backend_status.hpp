#pragma once

#include <string_view>

namespace emotalk {

enum class BackendStatus { up, down, stub };

constexpr std::string_view to_string(BackendStatus s) {
  switch (s) {
    case BackendStatus::up: return "up";
    case BackendStatus::down: return "down";
    case BackendStatus::stub: return "stub";
  }
  return "down";
}

}  // namespace emotalk
