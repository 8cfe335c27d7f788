#pragma once

// Tick ingestion, the trading calendar, session-grid resampling, equal-stamp
// synchronization of several assets and descriptive return statistics.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "wavecorr/calendar.hpp"
#include "wavecorr/error.hpp"

namespace wavecorr {

inline constexpr double kGap = std::numeric_limits<double>::quiet_NaN();
inline bool is_gap(double v) { return std::isnan(v); }

struct Tick {
  TimestampMs ts;
  double price;
};

struct TickSeries {
  std::string asset;
  std::vector<Tick> rows;
};

enum class TimestampFormat { Iso, EpochMs };

namespace detail {

inline std::string_view trim_line(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

inline bool looks_like_epoch(std::string_view text) {
  if (text.empty()) return false;
  std::size_t i = text.front() == '-' ? 1 : 0;
  if (i == text.size()) return false;
  for (; i < text.size(); ++i)
    if (text[i] < '0' || text[i] > '9') return false;
  return true;
}

}  // namespace detail

/// Reads `timestamp,price` rows. Timestamps are either ISO-8601 with offset or
/// integer epoch milliseconds, detected from the first row and never mixed.
/// Duplicate timestamps keep the last row. `source` labels error messages.
inline TickSeries parse_ticks(std::istream& in, std::string asset, const std::string& source = "<input>") {
  TickSeries out{std::move(asset), {}};
  std::string raw;
  std::size_t line_no = 0;
  auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };
  if (!std::getline(in, raw)) fail(ErrorCode::ParseError, source + ": empty file, expected header 'timestamp,price'");
  ++line_no;
  std::string_view header = detail::trim_line(raw);
  if (header.size() >= 3 && header.substr(0, 3) == "\xEF\xBB\xBF") header.remove_prefix(3);
  require(header == "timestamp,price", ErrorCode::ParseError, where() + "expected header 'timestamp,price'");
  std::optional<TimestampFormat> format;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim_line(raw);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    require(comma != std::string_view::npos && line.find(',', comma + 1) == std::string_view::npos,
            ErrorCode::ParseError, where() + "expected two fields");
    const auto ts_text = detail::trim_line(line.substr(0, comma));
    const auto px_text = detail::trim_line(line.substr(comma + 1));
    const auto kind = detail::looks_like_epoch(ts_text) ? TimestampFormat::EpochMs : TimestampFormat::Iso;
    if (!format) format = kind;
    require(*format == kind, ErrorCode::ParseError, where() + "timestamp format differs from the first row");
    TimestampMs ts = 0;
    const bool ok = kind == TimestampFormat::EpochMs ? detail::parse_int(ts_text, ts)
                                                     : try_parse_iso_timestamp(ts_text, ts);
    require(ok, ErrorCode::ParseError, where() + "bad timestamp '" + std::string(ts_text) + "'");
    double price = 0.0;
    require(detail::parse_double(px_text, price), ErrorCode::ParseError,
            where() + "bad price '" + std::string(px_text) + "'");
    require(price > 0.0, ErrorCode::NonPositivePrice, where() + "price must be positive");
    if (!out.rows.empty()) {
      require(ts >= out.rows.back().ts, ErrorCode::NonMonotoneTimestamps, where() + "timestamp goes backwards");
      if (ts == out.rows.back().ts) {
        out.rows.back().price = price;
        continue;
      }
    }
    out.rows.push_back({ts, price});
  }
  return out;
}

inline TickSeries load_ticks(const std::string& path, std::string asset) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open tick file '" + path + "'");
  return parse_ticks(in, std::move(asset), path);
}

/// Writes the `timestamp,price` schema read by parse_ticks.
inline void write_ticks(std::ostream& out, const TickSeries& ticks, TimestampFormat format = TimestampFormat::Iso,
                        int price_decimals = 4) {
  out << "timestamp,price\n";
  for (const auto& row : ticks.rows) {
    if (format == TimestampFormat::Iso) {
      out << format_timestamp(row.ts);
    } else {
      out << row.ts;
    }
    out << fmt::format(",{:.{}f}\n", row.price, price_decimals);
  }
}

// ---------------------------------------------------------------------------
// Calendar

struct SessionSpec {
  int open_minutes = 9 * 60 + 30;  // local wall clock
  int close_minutes = 16 * 60;
  ExchangeZone zone{"America/New_York"};
  int step_minutes = 5;
  std::vector<Date> holidays;  // kept sorted
  bool drop_weekends = true;
  bool drop_year_end = true;  // Dec 24-26 and Dec 31-Jan 2

  void validate() const {
    require(open_minutes >= 0 && close_minutes <= 24 * 60 && open_minutes < close_minutes,
            ErrorCode::InvalidArgument, "session open must precede close within one day");
    require(step_minutes > 0 && (close_minutes - open_minutes) % step_minutes == 0, ErrorCode::InvalidArgument,
            "grid step must divide the session length");
  }

  std::size_t points_per_day() const {
    return static_cast<std::size_t>((close_minutes - open_minutes) / step_minutes) + 1;
  }
};

inline void add_holidays(SessionSpec& spec, std::span<const Date> days) {
  spec.holidays.insert(spec.holidays.end(), days.begin(), days.end());
  std::sort(spec.holidays.begin(), spec.holidays.end());
  spec.holidays.erase(std::unique(spec.holidays.begin(), spec.holidays.end()), spec.holidays.end());
}

/// One ISO date per line; '#' starts a comment.
inline std::vector<Date> parse_holidays(std::istream& in, const std::string& source = "<input>") {
  std::vector<Date> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim_line(line);
    if (line.empty()) continue;
    try {
      out.push_back(parse_date(line));
    } catch (const Error& e) {
      fail(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<Date> load_holidays(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open holiday file '" + path + "'");
  return parse_holidays(in, path);
}

inline bool is_trading_day(Date d, const SessionSpec& spec) {
  if (spec.drop_weekends && is_weekend(d)) return false;
  if (spec.drop_year_end) {
    const unsigned m = month_of(d);
    const unsigned day = day_of(d);
    if (m == 12 && (day >= 24 && day <= 26)) return false;
    if ((m == 12 && day == 31) || (m == 1 && day <= 2)) return false;
  }
  return !std::binary_search(spec.holidays.begin(), spec.holidays.end(), d);
}

inline std::vector<Date> calendar_filter(std::span<const Date> days, const SessionSpec& spec) {
  std::vector<Date> out;
  for (const Date d : days)
    if (is_trading_day(d, spec)) out.push_back(d);
  return out;
}

/// UTC instants of the session grid on local trading day `d`, open to close inclusive.
inline std::vector<TimestampMs> session_grid(Date d, const SessionSpec& spec) {
  std::vector<TimestampMs> out;
  for (int m = spec.open_minutes; m <= spec.close_minutes; m += spec.step_minutes) out.push_back(spec.zone.to_utc(d, m));
  return out;
}

// ---------------------------------------------------------------------------
// Gridded prices

struct GriddedSeries {
  std::string asset;
  std::vector<TimestampMs> stamps;
  std::vector<Date> days;      // local trading day of each stamp
  std::vector<double> prices;  // kGap where no tick is available yet that day
};

/// Last tick at or before each grid point, using only ticks from the same local
/// calendar day. Covers every trading day from the first to the last tick.
inline GriddedSeries resample_to_grid(const TickSeries& ticks, const SessionSpec& spec) {
  spec.validate();
  require(!ticks.rows.empty(), ErrorCode::TooFewObservations, "no ticks for asset '" + ticks.asset + "'");
  GriddedSeries out{ticks.asset, {}, {}, {}};
  // Local date of an instant, using the offset in effect on that UTC date.
  const auto local_date = [&](TimestampMs ts) {
    const Date guess = utc_date(ts);
    const TimestampMs local = ts + spec.zone.offset_minutes(guess) * 60'000LL;
    return utc_date(local);
  };
  const auto first = to_days(local_date(ticks.rows.front().ts));
  const auto last = to_days(local_date(ticks.rows.back().ts));
  std::size_t i = 0;
  for (auto day = first; day <= last; day += std::chrono::days{1}) {
    const Date d = from_days(day);
    if (!is_trading_day(d, spec)) continue;
    const TimestampMs midnight = spec.zone.to_utc(d, 0);
    while (i < ticks.rows.size() && ticks.rows[i].ts < midnight) ++i;
    std::size_t k = i;
    double current = kGap;
    for (const TimestampMs g : session_grid(d, spec)) {
      while (k < ticks.rows.size() && ticks.rows[k].ts <= g) current = ticks.rows[k++].price;
      out.stamps.push_back(g);
      out.days.push_back(d);
      out.prices.push_back(current);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synchronized panels

struct AlignedPanel {
  std::vector<std::string> assets;
  std::vector<TimestampMs> stamps;
  std::vector<Date> days;
  std::vector<std::vector<double>> prices;   // [asset][row]
  std::vector<std::vector<double>> returns;  // [asset][row]; kGap on the first row of each day

  std::size_t size() const { return stamps.size(); }
};

/// Equal-stamp intersection: a stamp survives only if every asset has a price
/// there. Log returns are taken between consecutive surviving stamps of the
/// same day.
inline AlignedPanel synchronize(std::span<const GriddedSeries> series) {
  require(series.size() >= 2, ErrorCode::InvalidArgument, "synchronize needs at least two assets");
  std::vector<std::size_t> pos(series.size(), 0);
  AlignedPanel panel;
  for (const auto& s : series) {
    require(s.stamps.size() == s.prices.size() && s.stamps.size() == s.days.size(), ErrorCode::ShapeMismatch,
            "gridded series '" + s.asset + "' is malformed");
    panel.assets.push_back(s.asset);
  }
  panel.prices.resize(series.size());
  panel.returns.resize(series.size());
  while (true) {
    TimestampMs target = std::numeric_limits<TimestampMs>::min();
    bool exhausted = false;
    for (std::size_t a = 0; a < series.size(); ++a) {
      if (pos[a] >= series[a].stamps.size()) {
        exhausted = true;
        break;
      }
      target = std::max(target, series[a].stamps[pos[a]]);
    }
    if (exhausted) break;
    bool aligned = true;
    for (std::size_t a = 0; a < series.size(); ++a) {
      while (pos[a] < series[a].stamps.size() && series[a].stamps[pos[a]] < target) ++pos[a];
      if (pos[a] >= series[a].stamps.size() || series[a].stamps[pos[a]] != target) aligned = false;
    }
    if (!aligned) continue;
    bool priced = true;
    for (std::size_t a = 0; a < series.size(); ++a) priced = priced && !is_gap(series[a].prices[pos[a]]);
    if (priced) {
      const Date d = series[0].days[pos[0]];
      const bool continues = !panel.days.empty() && panel.days.back() == d;
      panel.stamps.push_back(target);
      panel.days.push_back(d);
      for (std::size_t a = 0; a < series.size(); ++a) {
        const double p = series[a].prices[pos[a]];
        panel.returns[a].push_back(continues ? std::log(p) - std::log(panel.prices[a].back()) : kGap);
        panel.prices[a].push_back(p);
      }
    }
    for (auto& p : pos) ++p;
  }
  require(!panel.stamps.empty(), ErrorCode::EmptyIntersection, "assets share no priced grid stamp");
  return panel;
}

/// Panel restricted to a subset of its assets, with the intersection recomputed.
inline AlignedPanel select_assets(const AlignedPanel& panel, std::span<const std::size_t> which) {
  AlignedPanel out;
  for (std::size_t a : which) {
    require(a < panel.assets.size(), ErrorCode::IndexOutOfRange, "asset index out of range");
    out.assets.push_back(panel.assets[a]);
  }
  out.stamps = panel.stamps;
  out.days = panel.days;
  for (std::size_t a : which) {
    out.prices.push_back(panel.prices[a]);
    out.returns.push_back(panel.returns[a]);
  }
  return out;
}

/// Intraday returns of the panel with the first row of every day removed.
struct IntradayReturns {
  std::vector<Date> days;
  std::vector<TimestampMs> stamps;
  std::vector<std::vector<double>> columns;  // [asset][row]
};

inline IntradayReturns intraday_returns(const AlignedPanel& panel) {
  IntradayReturns out;
  out.columns.resize(panel.assets.size());
  for (std::size_t t = 0; t < panel.size(); ++t) {
    if (is_gap(panel.returns[0][t])) continue;
    out.days.push_back(panel.days[t]);
    out.stamps.push_back(panel.stamps[t]);
    for (std::size_t a = 0; a < panel.assets.size(); ++a) out.columns[a].push_back(panel.returns[a][t]);
  }
  return out;
}

/// Session-close price per retained day: the last synchronized price of the day.
struct DailyCloses {
  std::vector<Date> days;
  std::vector<std::vector<double>> prices;  // [asset][day]
};

inline DailyCloses daily_closes(const AlignedPanel& panel) {
  DailyCloses out;
  out.prices.resize(panel.assets.size());
  for (std::size_t t = 0; t < panel.size(); ++t) {
    const bool last_of_day = t + 1 == panel.size() || panel.days[t + 1] != panel.days[t];
    if (!last_of_day) continue;
    out.days.push_back(panel.days[t]);
    for (std::size_t a = 0; a < panel.assets.size(); ++a) out.prices[a].push_back(panel.prices[a][t]);
  }
  return out;
}

/// Close-to-close log returns; entry t is the return into day t+1.
inline std::vector<double> log_returns(std::span<const double> prices) {
  std::vector<double> out;
  for (std::size_t t = 1; t < prices.size(); ++t) out.push_back(std::log(prices[t]) - std::log(prices[t - 1]));
  return out;
}

inline std::string format_number(double v) { return is_gap(v) ? std::string{} : fmt::format("{:.10g}", v); }

/// `timestamp,<asset>_price...,<asset>_ret...`; an empty field marks a gap.
inline void write_panel_csv(std::ostream& out, const AlignedPanel& panel) {
  out << "timestamp";
  for (const auto& a : panel.assets) out << ',' << a << "_price";
  for (const auto& a : panel.assets) out << ',' << a << "_ret";
  out << '\n';
  for (std::size_t t = 0; t < panel.size(); ++t) {
    out << format_timestamp(panel.stamps[t]);
    for (const auto& col : panel.prices) out << ',' << format_number(col[t]);
    for (const auto& col : panel.returns) out << ',' << format_number(col[t]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Descriptive statistics

/// Sample moments of a return series. sd uses n - 1; skewness and kurtosis are
/// the moment ratios m3 / m2^1.5 and m4 / m2^2, so kurtosis is raw (3 for a
/// Gaussian). Both are empty, with `degenerate` set, for a constant series.
struct DescriptiveStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  std::optional<double> skewness;
  std::optional<double> kurtosis;
  double min = 0.0;
  double max = 0.0;
  bool degenerate = false;

  std::optional<double> excess_kurtosis() const {
    return kurtosis ? std::optional<double>(*kurtosis - 3.0) : std::nullopt;
  }
};

inline DescriptiveStats descriptive_stats(std::span<const double> r) {
  require(r.size() >= 4, ErrorCode::TooFewObservations, "descriptive statistics need at least 4 returns");
  DescriptiveStats s;
  s.n = r.size();
  const double n = static_cast<double>(r.size());
  double sum = 0.0;
  s.min = r.front();
  s.max = r.front();
  for (double x : r) {
    require(std::isfinite(x), ErrorCode::NonFiniteInput, "non-finite return");
    sum += x;
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean = sum / n;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double x : r) {
    const double d = x - s.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  s.sd = std::sqrt(m2 / (n - 1.0));
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (s.max == s.min || m2 <= 0.0) {
    s.sd = 0.0;
    s.degenerate = true;
    return s;
  }
  s.skewness = m3 / std::pow(m2, 1.5);
  s.kurtosis = m4 / (m2 * m2);
  return s;
}

}  // namespace wavecorr
