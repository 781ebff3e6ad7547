#include "emotalk/time.hpp"

#include <cstdio>
#include <ctime>

namespace emotalk {

namespace {

std::tm to_tm(Timestamp ts) {
  const std::time_t secs = std::chrono::system_clock::to_time_t(
      std::chrono::time_point_cast<std::chrono::seconds>(ts));
  std::tm out{};
  gmtime_r(&secs, &out);
  return out;
}

}  // namespace

Timestamp now_utc() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
}

std::string format_iso8601(Timestamp ts) {
  const std::tm tm = to_tm(ts);
  auto ms = ts.time_since_epoch().count() % 1000;
  if (ms < 0) ms += 1000;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  int y, mo, d, h, mi, s, ms = 0;
  const std::string owned(text);
  int consumed = 0;
  if (std::sscanf(owned.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h,
                  &mi, &s, &consumed) != 6) {
    return std::nullopt;
  }
  std::string_view rest = text.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest.front() == '.') {
    if (rest.size() < 4 || std::sscanf(owned.c_str() + consumed + 1, "%3d", &ms) != 1)
      return std::nullopt;
    rest.remove_prefix(4);
  }
  if (rest != "Z") return std::nullopt;

  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) return std::nullopt;
  return time_point_cast<milliseconds>(sys_days{ymd}) + hours{h} + minutes{mi} +
         seconds{s} + milliseconds{ms};
}

std::string format_rfc5322(Timestamp ts) {
  static constexpr const char* kDays[] = {"Sun", "Mon", "Tue", "Wed",
                                          "Thu", "Fri", "Sat"};
  static constexpr const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr",
                                            "May", "Jun", "Jul", "Aug",
                                            "Sep", "Oct", "Nov", "Dec"};
  const std::tm tm = to_tm(ts);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s, %02d %s %04d %02d:%02d:%02d +0000",
                kDays[tm.tm_wday], tm.tm_mday, kMonths[tm.tm_mon],
                tm.tm_year + 1900, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

}  // namespace emotalk
