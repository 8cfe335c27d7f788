#pragma once

// Civil dates, UTC millisecond timestamps and the small set of exchange time
// zones the session grid needs.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "wavecorr/error.hpp"

namespace wavecorr {

using Date = std::chrono::year_month_day;
using TimestampMs = std::int64_t;  // milliseconds since 1970-01-01T00:00:00Z

constexpr TimestampMs kMsPerDay = 86'400'000;

inline std::chrono::sys_days to_days(Date d) { return std::chrono::sys_days{d}; }
inline Date from_days(std::chrono::sys_days d) { return Date{d}; }
inline std::int64_t day_number(Date d) { return to_days(d).time_since_epoch().count(); }

inline int year_of(Date d) { return static_cast<int>(d.year()); }
inline unsigned month_of(Date d) { return static_cast<unsigned>(d.month()); }
inline unsigned day_of(Date d) { return static_cast<unsigned>(d.day()); }

inline Date make_date(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

namespace detail {

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

}  // namespace detail

/// Parses YYYY-MM-DD.
inline Date parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  const bool shaped = text.size() == 10 && text[4] == '-' && text[7] == '-';
  if (!shaped || !detail::parse_int(text.substr(0, 4), y) || !detail::parse_int(text.substr(5, 2), m) ||
      !detail::parse_int(text.substr(8, 2), d)) {
    fail(ErrorCode::ParseError, "bad date '" + std::string(text) + "'");
  }
  const Date date = make_date(y, m, d);
  require(date.ok(), ErrorCode::ParseError, "invalid calendar date '" + std::string(text) + "'");
  return date;
}

inline std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year_of(d), month_of(d), day_of(d));
  return buf;
}

inline Date utc_date(TimestampMs ts) {
  const auto days = std::chrono::floor<std::chrono::days>(std::chrono::milliseconds{ts});
  return from_days(std::chrono::sys_days{days});
}

inline TimestampMs utc_midnight(Date d) { return day_number(d) * kMsPerDay; }

/// ISO-8601 in UTC with millisecond precision, e.g. 2005-01-03T14:30:00.000Z.
inline std::string format_timestamp(TimestampMs ts) {
  const Date d = utc_date(ts);
  const TimestampMs in_day = ts - utc_midnight(d);
  const auto h = in_day / 3'600'000;
  const auto mi = (in_day / 60'000) % 60;
  const auto s = (in_day / 1000) % 60;
  const auto ms = in_day % 1000;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%sT%02lld:%02lld:%02lld.%03lldZ", format_date(d).c_str(),
                static_cast<long long>(h), static_cast<long long>(mi), static_cast<long long>(s),
                static_cast<long long>(ms));
  return buf;
}

/// Parses YYYY-MM-DDTHH:MM:SS[.fff](Z|+HH:MM|-HH:MM). A space may replace 'T'.
/// Returns false instead of throwing so callers can attach line context.
inline bool try_parse_iso_timestamp(std::string_view text, TimestampMs& out) {
  if (text.size() < 20 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':') {
    return false;
  }
  Date date;
  try {
    date = parse_date(text.substr(0, 10));
  } catch (const Error&) {
    return false;
  }
  int h = 0;
  int mi = 0;
  int s = 0;
  if (!detail::parse_int(text.substr(11, 2), h) || !detail::parse_int(text.substr(14, 2), mi) ||
      !detail::parse_int(text.substr(17, 2), s) || h > 23 || mi > 59 || s > 60) {
    return false;
  }
  std::size_t pos = 19;
  TimestampMs millis = 0;
  if (pos < text.size() && text[pos] == '.') {
    std::size_t digits = 0;
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 3) millis = millis * 10 + (text[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return false;
    for (std::size_t k = digits; k < 3; ++k) millis *= 10;
  }
  if (pos >= text.size()) return false;
  TimestampMs offset_ms = 0;
  if (text[pos] == 'Z') {
    ++pos;
  } else if (text[pos] == '+' || text[pos] == '-') {
    const int sign = text[pos] == '+' ? 1 : -1;
    int oh = 0;
    int om = 0;
    if (text.size() != pos + 6 || text[pos + 3] != ':' || !detail::parse_int(text.substr(pos + 1, 2), oh) ||
        !detail::parse_int(text.substr(pos + 4, 2), om)) {
      return false;
    }
    offset_ms = sign * (oh * 3'600'000LL + om * 60'000LL);
    pos += 6;
  } else {
    return false;
  }
  if (pos != text.size()) return false;
  out = utc_midnight(date) + h * 3'600'000LL + mi * 60'000LL + s * 1000LL + millis - offset_ms;
  return true;
}

inline bool is_weekend(Date d) {
  const std::chrono::weekday wd{to_days(d)};
  return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

/// Exchange-local clock zone. Supports UTC, fixed offsets ("+HH:MM") and the US
/// zones the futures sessions use, with the historical US daylight-saving rules.
class ExchangeZone {
 public:
  explicit ExchangeZone(std::string name = "UTC") : name_(std::move(name)) {
    if (name_ == "UTC") {
      kind_ = Kind::Fixed;
    } else if (name_ == "America/New_York") {
      kind_ = Kind::UsRules;
      standard_minutes_ = -300;
    } else if (name_ == "America/Chicago") {
      kind_ = Kind::UsRules;
      standard_minutes_ = -360;
    } else if (name_.size() == 6 && (name_[0] == '+' || name_[0] == '-') && name_[3] == ':') {
      int h = 0;
      int m = 0;
      require(detail::parse_int(std::string_view(name_).substr(1, 2), h) &&
                  detail::parse_int(std::string_view(name_).substr(4, 2), m),
              ErrorCode::InvalidArgument, "bad fixed offset zone '" + name_ + "'");
      kind_ = Kind::Fixed;
      standard_minutes_ = (name_[0] == '+' ? 1 : -1) * (h * 60 + m);
    } else {
      fail(ErrorCode::InvalidArgument, "unsupported time zone '" + name_ + "'");
    }
  }

  const std::string& name() const { return name_; }

  /// UTC offset in minutes in effect during the trading day `local`.
  int offset_minutes(Date local) const {
    if (kind_ == Kind::Fixed) return standard_minutes_;
    return standard_minutes_ + (us_dst(local) ? 60 : 0);
  }

  /// UTC instant of a local wall-clock time (minutes after local midnight).
  TimestampMs to_utc(Date local, int minutes_after_midnight) const {
    return utc_midnight(local) + (minutes_after_midnight - offset_minutes(local)) * 60'000LL;
  }

 private:
  enum class Kind { Fixed, UsRules };

  static Date nth_sunday(int y, unsigned m, unsigned n) {
    using namespace std::chrono;
    return Date{sys_days{year_month_weekday{year{y}, month{m}, weekday_indexed{Sunday, n}}}};
  }

  static Date last_sunday(int y, unsigned m) {
    using namespace std::chrono;
    return Date{sys_days{year_month_weekday_last{year{y}, month{m}, weekday_last{Sunday}}}};
  }

  // Daylight time is in effect from the start Sunday up to (excluding) the end
  // Sunday; sessions never straddle the 2am switch.
  static bool us_dst(Date d) {
    const int y = year_of(d);
    Date start;
    Date end;
    if (y >= 2007) {
      start = nth_sunday(y, 3, 2);
      end = nth_sunday(y, 11, 1);
    } else if (y >= 1987) {
      start = nth_sunday(y, 4, 1);
      end = last_sunday(y, 10);
    } else {
      start = last_sunday(y, 4);
      end = last_sunday(y, 10);
    }
    return to_days(d) >= to_days(start) && to_days(d) < to_days(end);
  }

  std::string name_;
  Kind kind_ = Kind::Fixed;
  int standard_minutes_ = 0;
};

}  // namespace wavecorr
