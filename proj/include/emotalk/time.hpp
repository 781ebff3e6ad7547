#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace emotalk {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Clock = std::function<Timestamp()>;

Timestamp now_utc();

/// "2026-10-14T09:38:00.000Z"
std::string format_iso8601(Timestamp ts);
std::optional<Timestamp> parse_iso8601(std::string_view text);

/// RFC 5322 date, e.g. "Wed, 14 Oct 2026 09:38:00 +0000".
std::string format_rfc5322(Timestamp ts);

}  // namespace emotalk
