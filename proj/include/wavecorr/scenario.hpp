#pragma once

// Market scenarios for end-to-end runs. A latent log-price process on the
// session grid drives two or three assets:
//   r_t = sd_d (sqrt(1 - s) f_t + sqrt(s) a_t) + drift
// with f_t white and a_t a unit-variance AR(1), each with its own cross
// correlation, so the correlation of returns depends on the scale. sd_d follows
// a daily GARCH(1,1) and an optional error-correction term ties one pair of
// log prices together. The result is written as irregular ticks in the
// timestamp,price schema plus a JSON record of the ground truth.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "wavecorr/calendar.hpp"
#include "wavecorr/error.hpp"
#include "wavecorr/market_data.hpp"
#include "wavecorr/rng.hpp"
#include "wavecorr/wavelet_core.hpp"

namespace wavecorr {

struct ScenarioAsset {
  std::string name;
  double start_price = 100.0;
  double annual_vol = 0.2;
  double annual_drift = 0.0;
};

struct ScenarioRegime {
  Date from;
  std::vector<double> fast_corr;  // pair order (0,1), (0,2), (1,2)
  std::vector<double> slow_corr;
  double slow_share = 0.0;
  double ecm_speed = 0.0;  // per grid step; 0 leaves the pair unrelated in levels
};

struct MarketScenario {
  std::string name;
  std::uint64_t seed = 0;
  Date start;
  Date end;
  SessionSpec session{};
  int ticks_per_interval = 2;
  TimestampFormat timestamp_format = TimestampFormat::Iso;
  double slow_phi = 0.97;
  double garch_alpha = 0.05;
  double garch_beta = 0.90;
  FilterFamily truth_filter = FilterFamily::LA8;
  int truth_levels = 4;
  std::vector<ScenarioAsset> assets;
  std::vector<ScenarioRegime> regimes;
  std::optional<std::array<std::size_t, 2>> ecm_pair;
  double ecm_beta = 1.0;

  std::size_t pair_count() const { return assets.size() * (assets.size() - 1) / 2; }

  std::size_t steps_per_day() const { return session.points_per_day() - 1; }

  void validate() const;
};

inline std::size_t pair_slot(std::size_t i, std::size_t k, std::size_t n) {
  if (i > k) std::swap(i, k);
  return n == 2 ? 0 : (i == 0 ? k - 1 : 2);
}

namespace detail {

inline Eigen::MatrixXd correlation_matrix(std::span<const double> pairs, std::size_t n) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) {
      const double r = pairs[pair_slot(i, k, n)];
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = r;
      c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = r;
    }
  return c;
}

inline Eigen::MatrixXd cholesky_factor(std::span<const double> pairs, std::size_t n, const std::string& what) {
  for (double r : pairs)
    require(std::abs(r) < 1.0, ErrorCode::InvalidParameters, what + ": correlations must lie in (-1, 1)");
  const Eigen::LLT<Eigen::MatrixXd> llt(correlation_matrix(pairs, n));
  require(llt.info() == Eigen::Success, ErrorCode::InvalidParameters, what + ": correlation matrix is not positive definite");
  return llt.matrixL();
}

/// Variance of the sum of `steps` returns of unit per-step variance.
inline double daily_variance_factor(double share, double phi, std::size_t steps) {
  double ar = static_cast<double>(steps);
  double power = 1.0;
  for (std::size_t k = 1; k < steps; ++k) {
    power *= phi;
    ar += 2.0 * static_cast<double>(steps - k) * power;
  }
  return (1.0 - share) * static_cast<double>(steps) + share * ar;
}

inline std::vector<double> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!current.empty()) parts.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) parts.push_back(current);
  std::vector<double> out;
  for (const auto& p : parts) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(p, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == p.size(), ErrorCode::ParseError, "bad number '" + p + "'");
    out.push_back(v);
  }
  return out;
}

inline std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!current.empty()) out.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

/// "HH:MM" to minutes after midnight.
inline int parse_clock(const std::string& text) {
  int h = 0;
  int m = 0;
  require(text.size() == 5 && text[2] == ':' && parse_int(std::string_view(text).substr(0, 2), h) &&
              parse_int(std::string_view(text).substr(3, 2), m) && h <= 24 && m < 60,
          ErrorCode::ParseError, "bad clock time '" + text + "' (expected HH:MM)");
  return h * 60 + m;
}

inline std::string format_clock(int minutes) { return fmt::format("{:02d}:{:02d}", minutes / 60, minutes % 60); }

/// Level-j wavelet (or level-J scaling) filter as a circular impulse response.
inline std::vector<double> equivalent_filter(FilterFamily family, int level, bool scaling) {
  const auto f = make_filter(family);
  const auto width = boundary_counts(level, f.length(), 1).width;
  std::size_t n = 2;
  while (n < 2 * static_cast<std::size_t>(width)) n *= 2;
  std::vector<double> impulse(n, 0.0);
  impulse[0] = 1.0;
  const auto d = modwt(impulse, f, level, InteriorCheck::Skip);
  const auto h = scaling ? d.scaling() : d.wavelet(level);
  return {h.begin(), h.end()};
}

/// Variance of a filter applied to a unit-variance AR(1) with coefficient phi.
inline double filtered_ar_variance(std::span<const double> h, double phi) {
  double total = 0.0;
  for (std::size_t l = 0; l < h.size(); ++l) {
    if (h[l] == 0.0) continue;
    for (std::size_t m = 0; m < h.size(); ++m)
      total += h[l] * h[m] * std::pow(phi, std::abs(static_cast<double>(l) - static_cast<double>(m)));
  }
  return total;
}

}  // namespace detail

inline void MarketScenario::validate() const {
  require(!name.empty(), ErrorCode::InvalidParameters, "scenario needs a name");
  require(assets.size() >= 2 && assets.size() <= 3, ErrorCode::InvalidParameters, "scenario needs 2 or 3 assets");
  for (std::size_t i = 0; i < assets.size(); ++i) {
    const auto& a = assets[i];
    require(!a.name.empty() && a.name.find_first_of(",/\\ ") == std::string::npos, ErrorCode::InvalidParameters,
            "asset names must be nonempty without separators");
    for (std::size_t k = 0; k < i; ++k)
      require(assets[k].name != a.name, ErrorCode::InvalidParameters, "duplicate asset name '" + a.name + "'");
    require(a.start_price > 0.0 && a.annual_vol > 0.0, ErrorCode::InvalidParameters,
            "asset '" + a.name + "' needs a positive start price and volatility");
  }
  require(to_days(start) <= to_days(end), ErrorCode::InvalidParameters, "scenario start must not follow its end");
  session.validate();
  require(ticks_per_interval >= 1 && ticks_per_interval <= 50, ErrorCode::InvalidParameters,
          "ticks_per_interval must lie in 1..50");
  require(slow_phi >= 0.0 && slow_phi < 1.0, ErrorCode::InvalidParameters, "slow_phi must lie in [0, 1)");
  require(garch_alpha >= 0.0 && garch_beta >= 0.0 && garch_alpha + garch_beta < 1.0, ErrorCode::InvalidParameters,
          "GARCH parameters must satisfy alpha, beta >= 0 and alpha + beta < 1");
  require(truth_levels >= 1 && truth_levels <= 8, ErrorCode::InvalidParameters, "truth_levels must lie in 1..8");
  require(!regimes.empty(), ErrorCode::InvalidParameters, "scenario needs at least one regime");
  require(to_days(regimes.front().from) <= to_days(start), ErrorCode::InvalidParameters,
          "the first regime must start on or before the scenario start");
  for (std::size_t r = 0; r < regimes.size(); ++r) {
    const auto& g = regimes[r];
    const std::string what = "regime starting " + format_date(g.from);
    if (r > 0)
      require(to_days(g.from) > to_days(regimes[r - 1].from), ErrorCode::InvalidParameters,
              what + ": regimes must be in increasing date order");
    require(g.fast_corr.size() == pair_count() && g.slow_corr.size() == pair_count(), ErrorCode::InvalidParameters,
            what + fmt::format(": expected {} correlations per component", pair_count()));
    detail::cholesky_factor(g.fast_corr, assets.size(), what + " (fast)");
    detail::cholesky_factor(g.slow_corr, assets.size(), what + " (slow)");
    require(g.slow_share >= 0.0 && g.slow_share <= 1.0, ErrorCode::InvalidParameters, what + ": slow_share must lie in [0, 1]");
    require(g.ecm_speed >= 0.0 && g.ecm_speed < 1.0, ErrorCode::InvalidParameters, what + ": ecm_speed must lie in [0, 1)");
    require(g.ecm_speed == 0.0 || ecm_pair.has_value(), ErrorCode::InvalidParameters,
            what + ": ecm_speed needs a [cointegration] pair");
  }
  if (ecm_pair) {
    const auto [a, b] = *ecm_pair;
    require(a < assets.size() && b < assets.size() && a != b, ErrorCode::InvalidParameters, "bad cointegration pair");
  }
}

/// Parses the INI-style scenario format:
///   [scenario] name, seed, start, end, open, close, zone, step_minutes,
///              ticks_per_interval, timestamps (iso|epoch), slow_phi,
///              garch_alpha, garch_beta, truth_filter, truth_levels
///   [assets]   names, start_price, annual_vol, annual_drift (lists)
///   [regime.N] from, fast_corr, slow_corr, slow_share, ecm_speed
///   [cointegration] pair (two asset names), beta
inline MarketScenario parse_scenario(std::istream& in, const std::string& source = "<input>") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::ParseError, fmt::format("{}:{}: {}", source, e.line(), e.message()));
  }
  const auto context = [&](const std::string& key) { return source + ": [" + key + "]"; };
  MarketScenario s;
  try {
    const auto& sc = tree.get_child("scenario");
    for (const auto& [key, _] : sc) {
      static const std::vector<std::string> known{"name",      "seed",         "start",       "end",
                                                  "open",      "close",        "zone",        "step_minutes",
                                                  "ticks_per_interval", "timestamps", "slow_phi", "garch_alpha",
                                                  "garch_beta", "truth_filter", "truth_levels"};
      require(std::find(known.begin(), known.end(), key) != known.end(), ErrorCode::ParseError,
              context("scenario") + " unknown key '" + key + "'");
    }
    s.name = sc.get<std::string>("name");
    s.seed = sc.get<std::uint64_t>("seed");
    s.start = parse_date(sc.get<std::string>("start"));
    s.end = parse_date(sc.get<std::string>("end"));
    s.session.open_minutes = detail::parse_clock(sc.get<std::string>("open", "09:30"));
    s.session.close_minutes = detail::parse_clock(sc.get<std::string>("close", "16:00"));
    s.session.zone = ExchangeZone(sc.get<std::string>("zone", "America/New_York"));
    s.session.step_minutes = sc.get<int>("step_minutes", 5);
    s.ticks_per_interval = sc.get<int>("ticks_per_interval", 2);
    const auto stamps = sc.get<std::string>("timestamps", "iso");
    require(stamps == "iso" || stamps == "epoch", ErrorCode::ParseError,
            context("scenario") + " timestamps must be iso or epoch");
    s.timestamp_format = stamps == "iso" ? TimestampFormat::Iso : TimestampFormat::EpochMs;
    s.slow_phi = sc.get<double>("slow_phi", 0.97);
    s.garch_alpha = sc.get<double>("garch_alpha", 0.05);
    s.garch_beta = sc.get<double>("garch_beta", 0.90);
    s.truth_filter = parse_filter_family(sc.get<std::string>("truth_filter", "la8"));
    s.truth_levels = sc.get<int>("truth_levels", 4);

    const auto& as = tree.get_child("assets");
    const auto names = detail::split_words(as.get<std::string>("names"));
    const auto count = names.size();
    const auto list = [&](const char* key, double fallback) {
      const auto text = as.get_optional<std::string>(key);
      if (!text) return std::vector<double>(count, fallback);
      auto v = detail::split_list(*text);
      require(v.size() == count, ErrorCode::ParseError,
              context("assets") + fmt::format(" '{}' needs {} values", key, count));
      return v;
    };
    const auto prices = list("start_price", 100.0);
    const auto vols = list("annual_vol", 0.2);
    const auto drifts = list("annual_drift", 0.0);
    for (std::size_t i = 0; i < count; ++i) s.assets.push_back({names[i], prices[i], vols[i], drifts[i]});

    std::vector<std::pair<int, ScenarioRegime>> regimes;
    for (const auto& [section, body] : tree) {
      if (section.rfind("regime.", 0) != 0) continue;
      int index = 0;
      require(detail::parse_int(std::string_view(section).substr(7), index), ErrorCode::ParseError,
              context(section) + " regime sections are named regime.<number>");
      ScenarioRegime g;
      g.from = parse_date(body.get<std::string>("from"));
      g.fast_corr = detail::split_list(body.get<std::string>("fast_corr"));
      g.slow_corr = detail::split_list(body.get<std::string>("slow_corr", body.get<std::string>("fast_corr")));
      g.slow_share = body.get<double>("slow_share", 0.0);
      g.ecm_speed = body.get<double>("ecm_speed", 0.0);
      regimes.emplace_back(index, g);
    }
    std::sort(regimes.begin(), regimes.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [_, g] : regimes) s.regimes.push_back(std::move(g));

    if (const auto co = tree.get_child_optional("cointegration")) {
      const auto pair = detail::split_words(co->get<std::string>("pair"));
      require(pair.size() == 2, ErrorCode::ParseError, context("cointegration") + " pair needs two asset names");
      std::array<std::size_t, 2> idx{};
      for (std::size_t p = 0; p < 2; ++p) {
        const auto it = std::find(names.begin(), names.end(), pair[p]);
        require(it != names.end(), ErrorCode::ParseError, context("cointegration") + " unknown asset '" + pair[p] + "'");
        idx[p] = static_cast<std::size_t>(it - names.begin());
      }
      s.ecm_pair = idx;
      s.ecm_beta = co->get<double>("beta", 1.0);
    }
  } catch (const pt::ptree_bad_path& e) {
    fail(ErrorCode::ParseError, source + ": missing key " + e.path<pt::ptree::path_type>().dump());
  } catch (const pt::ptree_bad_data& e) {
    fail(ErrorCode::ParseError, source + ": bad value: " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    fail(ErrorCode::ParseError, source + ": " + e.what());
  }
  try {
    s.validate();
  } catch (const Error& e) {
    fail(e.code(), source + ": " + e.what());
  }
  return s;
}

inline MarketScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open scenario file '" + path + "'");
  return parse_scenario(in, path);
}

// ---------------------------------------------------------------------------
// Ground truth

/// Model-implied wavelet correlations of grid returns in one regime for the
/// pair (i, k): levels 1..J, then the level-J scaling entry.
inline std::vector<double> implied_scale_correlations(const MarketScenario& s, const ScenarioRegime& g, std::size_t i,
                                                      std::size_t k) {
  const std::size_t slot = pair_slot(i, k, s.assets.size());
  std::vector<double> out;
  const auto entry = [&](int level, bool scaling) {
    const auto h = detail::equivalent_filter(s.truth_filter, level, scaling);
    double white = 0.0;
    for (double v : h) white += v * v;
    const double slow = detail::filtered_ar_variance(h, s.slow_phi);
    const double fast_part = (1.0 - g.slow_share) * white;
    const double slow_part = g.slow_share * slow;
    return (g.fast_corr[slot] * fast_part + g.slow_corr[slot] * slow_part) / (fast_part + slow_part);
  };
  for (int j = 1; j <= s.truth_levels; ++j) out.push_back(entry(j, false));
  out.push_back(entry(s.truth_levels, true));
  return out;
}

inline nlohmann::ordered_json scenario_truth(const MarketScenario& s) {
  using json = nlohmann::ordered_json;
  json truth;
  truth["schema"] = "wavecorr.truth/1";
  truth["name"] = s.name;
  truth["seed"] = s.seed;
  truth["start"] = format_date(s.start);
  truth["end"] = format_date(s.end);
  truth["session"] = {{"open", detail::format_clock(s.session.open_minutes)},
                      {"close", detail::format_clock(s.session.close_minutes)},
                      {"zone", s.session.zone.name()},
                      {"step_minutes", s.session.step_minutes}};
  json assets = json::array();
  for (const auto& a : s.assets)
    assets.push_back({{"name", a.name},
                      {"file", a.name + ".csv"},
                      {"start_price", a.start_price},
                      {"annual_vol", a.annual_vol},
                      {"annual_drift", a.annual_drift}});
  truth["assets"] = assets;
  truth["garch"] = {{"alpha", s.garch_alpha}, {"beta", s.garch_beta}};
  truth["slow_phi"] = s.slow_phi;
  truth["scale_truth"] = {{"filter", to_string(s.truth_filter)},
                          {"levels", s.truth_levels},
                          {"note", "implied by the fast/slow return model; ignores volatility clustering and error correction"}};
  json regimes = json::array();
  json breaks = json::array();
  for (std::size_t r = 0; r < s.regimes.size(); ++r) {
    const auto& g = s.regimes[r];
    const Date to = r + 1 < s.regimes.size() ? from_days(to_days(s.regimes[r + 1].from) - std::chrono::days{1}) : s.end;
    json entry;
    entry["from"] = format_date(std::max(g.from, s.start));
    entry["to"] = format_date(to);
    entry["slow_share"] = g.slow_share;
    entry["ecm_speed"] = g.ecm_speed;
    json pairs = json::object();
    for (std::size_t i = 0; i < s.assets.size(); ++i)
      for (std::size_t k = i + 1; k < s.assets.size(); ++k) {
        const auto slot = pair_slot(i, k, s.assets.size());
        const auto implied = implied_scale_correlations(s, g, i, k);
        pairs[s.assets[i].name + "-" + s.assets[k].name] = {
            {"fast_corr", g.fast_corr[slot]},
            {"slow_corr", g.slow_corr[slot]},
            {"scales", std::vector<double>(implied.begin(), implied.end() - 1)},
            {"lowfreq", implied.back()}};
      }
    entry["pairs"] = pairs;
    regimes.push_back(entry);
    if (r > 0) breaks.push_back(format_date(g.from));
  }
  truth["regimes"] = regimes;
  truth["breaks"] = breaks;
  if (s.ecm_pair) {
    json ranks = json::array();
    for (const auto& g : s.regimes) ranks.push_back(g.ecm_speed > 0.0 ? 1 : 0);
    truth["cointegration"] = {{"pair", s.assets[(*s.ecm_pair)[0]].name + "-" + s.assets[(*s.ecm_pair)[1]].name},
                              {"beta", s.ecm_beta},
                              {"rank_by_regime", ranks}};
  }
  return truth;
}

// ---------------------------------------------------------------------------
// Simulation

struct MarketPath {
  std::vector<Date> days;                          // every simulated weekday
  std::vector<std::vector<double>> log_prices;     // [asset][day * points + k]
  std::vector<TickSeries> ticks;                   // per asset
};

inline MarketPath simulate_market(const MarketScenario& s) {
  s.validate();
  const std::size_t n = s.assets.size();
  const std::size_t steps = s.steps_per_day();
  const std::size_t points = steps + 1;
  const TimestampMs step_ms = static_cast<TimestampMs>(s.session.step_minutes) * 60'000;
  const double steps_per_year = 252.0 * static_cast<double>(steps);

  MarketPath path;
  path.log_prices.assign(n, {});
  for (const auto& a : s.assets) path.ticks.push_back({a.name, {}});

  std::vector<double> lp(n);
  std::vector<double> h(n);
  std::vector<double> omega(n);
  for (std::size_t a = 0; a < n; ++a) {
    lp[a] = std::log(s.assets[a].start_price);
    const double daily = s.assets[a].annual_vol * s.assets[a].annual_vol / 252.0;
    h[a] = daily;
    omega[a] = daily * (1.0 - s.garch_alpha - s.garch_beta);
  }
  const double ecm_level =
      s.ecm_pair ? lp[(*s.ecm_pair)[1]] - s.ecm_beta * lp[(*s.ecm_pair)[0]] : 0.0;
  std::vector<double> slow_state(n, 0.0);
  bool state_initialized = false;

  std::size_t regime = 0;
  std::vector<Eigen::MatrixXd> fast_factor;
  std::vector<Eigen::MatrixXd> slow_factor;
  std::vector<double> variance_factor;
  for (const auto& g : s.regimes) {
    fast_factor.push_back(detail::cholesky_factor(g.fast_corr, n, "fast"));
    slow_factor.push_back(detail::cholesky_factor(g.slow_corr, n, "slow"));
    variance_factor.push_back(detail::daily_variance_factor(g.slow_share, s.slow_phi, steps));
  }
  const double innovation_sd = std::sqrt(1.0 - s.slow_phi * s.slow_phi);

  Eigen::VectorXd z_fast(static_cast<Eigen::Index>(n));
  Eigen::VectorXd z_slow(static_cast<Eigen::Index>(n));
  std::vector<double> day_start(n);
  std::vector<double> prev(n);
  std::uint64_t day_index = 0;
  for (auto day = to_days(s.start); day <= to_days(s.end); day += std::chrono::days{1}) {
    const Date d = from_days(day);
    if (is_weekend(d)) continue;
    while (regime + 1 < s.regimes.size() && to_days(s.regimes[regime + 1].from) <= day) ++regime;
    const auto& g = s.regimes[regime];
    CounterRng rng(s.seed, day_index);
    CounterRng tick_rng(s.seed, (std::uint64_t{1} << 40) | day_index);
    ++day_index;
    if (!state_initialized) {
      // Start the slow component in its stationary distribution.
      for (std::size_t a = 0; a < n; ++a) z_slow(static_cast<Eigen::Index>(a)) = rng.normal();
      const Eigen::VectorXd init = slow_factor[regime] * z_slow;
      for (std::size_t a = 0; a < n; ++a) slow_state[a] = init(static_cast<Eigen::Index>(a));
      state_initialized = true;
    }
    path.days.push_back(d);
    const auto grid = session_grid(d, s.session);
    for (std::size_t a = 0; a < n; ++a) {
      day_start[a] = lp[a];
      path.log_prices[a].push_back(lp[a]);
    }
    std::vector<std::vector<double>> day_path(n, std::vector<double>(points));
    for (std::size_t a = 0; a < n; ++a) day_path[a][0] = lp[a];
    for (std::size_t k = 1; k <= steps; ++k) {
      for (std::size_t a = 0; a < n; ++a) {
        z_fast(static_cast<Eigen::Index>(a)) = rng.normal();
        z_slow(static_cast<Eigen::Index>(a)) = rng.normal();
      }
      const Eigen::VectorXd f = fast_factor[regime] * z_fast;
      const Eigen::VectorXd e = slow_factor[regime] * z_slow;
      for (std::size_t a = 0; a < n; ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        slow_state[a] = s.slow_phi * slow_state[a] + innovation_sd * e(ai);
        const double u = std::sqrt(1.0 - g.slow_share) * f(ai) + std::sqrt(g.slow_share) * slow_state[a];
        prev[a] = lp[a];
        lp[a] += std::sqrt(h[a] / variance_factor[regime]) * u + s.assets[a].annual_drift / steps_per_year;
      }
      if (s.ecm_pair && g.ecm_speed > 0.0) {
        const auto [x, y] = *s.ecm_pair;
        const double gap = prev[y] - s.ecm_beta * prev[x] - ecm_level;
        lp[y] -= g.ecm_speed * gap;
      }
      for (std::size_t a = 0; a < n; ++a) {
        day_path[a][k] = lp[a];
        path.log_prices[a].push_back(lp[a]);
      }
    }
    for (std::size_t a = 0; a < n; ++a) {
      const double r = lp[a] - day_start[a];
      h[a] = omega[a] + s.garch_alpha * r * r + s.garch_beta * h[a];
    }

    // Ticks: one before the open carrying the opening price, then
    // ticks_per_interval ticks in each (g_{k-1}, g_k], the last of which
    // carries the grid price, and one after the close.
    const auto rounded = [](double log_price) { return std::round(std::exp(log_price) * 1e4) / 1e4; };
    for (std::size_t a = 0; a < n; ++a) {
      auto& rows = path.ticks[a].rows;
      const double step_sd = std::sqrt(h[a] / variance_factor[regime]);
      rows.push_back({grid[0] - 1000 - static_cast<TimestampMs>(tick_rng.uniform() * 299'000.0), rounded(day_path[a][0])});
      std::vector<TimestampMs> offsets(static_cast<std::size_t>(s.ticks_per_interval));
      for (std::size_t k = 1; k < points; ++k) {
        for (auto& o : offsets) o = 1 + static_cast<TimestampMs>(tick_rng.uniform() * static_cast<double>(step_ms - 1));
        std::sort(offsets.begin(), offsets.end());
        offsets.back() = step_ms;
        for (std::size_t t = 0; t < offsets.size(); ++t) {
          const double frac = static_cast<double>(offsets[t]) / static_cast<double>(step_ms);
          double value = day_path[a][k];
          const double noise = 0.25 * step_sd * tick_rng.normal();
          if (t + 1 < offsets.size()) value = day_path[a][k - 1] + frac * (day_path[a][k] - day_path[a][k - 1]) + noise;
          const TimestampMs ts = grid[k - 1] + offsets[t];
          if (!rows.empty() && rows.back().ts == ts) rows.back().price = rounded(value);
          else rows.push_back({ts, rounded(value)});
        }
      }
      rows.push_back({grid.back() + 1000 + static_cast<TimestampMs>(tick_rng.uniform() * 599'000.0),
                      rounded(day_path[a][steps] + 0.25 * step_sd * tick_rng.normal())});
    }
  }
  require(!path.days.empty(), ErrorCode::InvalidParameters, "scenario covers no weekdays");
  return path;
}

/// Writes <dir>/<asset>.csv for every asset and <dir>/truth.json. Returns the
/// written paths in that order.
inline std::vector<std::filesystem::path> write_market_scenario(const MarketScenario& s,
                                                                const std::filesystem::path& dir) {
  const auto path = simulate_market(s);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create directory '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto& ticks : path.ticks) {
    const auto file = dir / (ticks.asset + ".csv");
    std::ofstream out(file, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot write '" + file.string() + "'");
    write_ticks(out, ticks, s.timestamp_format);
    written.push_back(file);
  }
  const auto truth_file = dir / "truth.json";
  std::ofstream out(truth_file, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write '" + truth_file.string() + "'");
  out << scenario_truth(s).dump(2) << '\n';
  written.push_back(truth_file);
  return written;
}

}  // namespace wavecorr
