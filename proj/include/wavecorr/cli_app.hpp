#pragma once

// Pipeline driver behind the wavecorr command-line tool: configuration,
// orchestration of the analysis modules and emission of the output tables.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
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
#include "wavecorr/dcc_garch.hpp"
#include "wavecorr/error.hpp"
#include "wavecorr/market_data.hpp"
#include "wavecorr/realized_cov.hpp"
#include "wavecorr/regime.hpp"
#include "wavecorr/scenario.hpp"
#include "wavecorr/wavelet_core.hpp"
#include "wavecorr/wavelet_stats.hpp"

#ifndef WAVECORR_DATA_DIR
#define WAVECORR_DATA_DIR "data"
#endif

namespace wavecorr {

inline constexpr const char* kConfigEnvVar = "WAVECORR_CONFIG";
inline constexpr const char* kReportSchema = "wavecorr.report/1";

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
  std::vector<std::string> assets;
  std::string data_dir = ".";
  std::vector<std::string> inputs;  // per-asset tick files; default <data_dir>/<asset>.csv
  std::string open = "09:30";
  std::string close = "16:00";
  std::string zone = "America/New_York";
  int step_minutes = 5;
  std::string holidays;  // optional file of ISO dates
  bool drop_year_end = true;
  FilterFamily filter = FilterFamily::LA8;
  int intraday_levels = 4;
  int daily_levels = 5;
  EffectiveSize n_eff = EffectiveSize::DwtEquivalent;
  double alpha = 0.05;
  double trim = 0.15;
  std::string supf_table;  // default <built-in data dir>/supf_null_trim<trim>.csv
  std::string break_series = "monthly";  // monthly | dcc | realized
  int break_scale = 1;                  // level of the monthly series
  int johansen_lags = 1;
  JohansenSpec johansen_spec = JohansenSpec::Constant;
  bool johansen_sweep = false;
  int johansen_sim_reps = 0;
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  bool json_report = true;

  std::vector<std::string> input_paths() const {
    if (!inputs.empty()) return inputs;
    std::vector<std::string> out;
    for (const auto& a : assets) out.push_back((std::filesystem::path(data_dir) / (a + ".csv")).string());
    return out;
  }

  std::string null_table_path() const {
    if (!supf_table.empty()) return supf_table;
    return (std::filesystem::path(WAVECORR_DATA_DIR) / supf_table_filename(trim)).string();
  }

  SessionSpec session() const {
    SessionSpec s;
    s.open_minutes = detail::parse_clock(open);
    s.close_minutes = detail::parse_clock(close);
    s.zone = ExchangeZone(zone);
    s.step_minutes = step_minutes;
    s.drop_year_end = drop_year_end;
    if (!holidays.empty()) {
      const auto days = load_holidays(holidays);
      add_holidays(s, days);
    }
    return s;
  }

  void validate() const {
    const auto usage = [](bool ok, const std::string& msg) { require(ok, ErrorCode::Usage, msg); };
    usage(assets.size() >= 2 && assets.size() <= 3, "config: assets must name 2 or 3 assets");
    usage(inputs.empty() || inputs.size() == assets.size(), "config: inputs must list one file per asset");
    usage(intraday_levels >= 1 && intraday_levels <= 8, "config: intraday_levels must lie in 1..8");
    usage(daily_levels >= 1 && daily_levels <= 8, "config: daily_levels must lie in 1..8");
    usage(alpha > 0.0 && alpha < 1.0, "config: alpha must lie in (0, 1)");
    usage(trim >= 0.05 && trim <= 0.25, "config: trim must lie in [0.05, 0.25]");
    usage(break_series == "monthly" || break_series == "dcc" || break_series == "realized",
          "config: break_series must be monthly, dcc or realized");
    usage(break_scale >= 1 && break_scale <= intraday_levels, "config: break_scale must lie in 1..intraday_levels");
    usage(johansen_lags >= 0 && johansen_lags <= 5, "config: johansen_lags must lie in 0..5");
    usage(johansen_sim_reps == 0 || johansen_sim_reps >= 19, "config: johansen_sim_reps must be 0 or >= 19");
    usage(step_minutes > 0, "config: step_minutes must be positive");
  }
};

namespace detail {

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorCode::Usage, "expected true or false, got '" + v + "'");
}

inline std::string join(const std::vector<std::string>& v, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  in >> out;
  require(!in.fail() && in.eof(), ErrorCode::Usage, "config: bad value '" + v + "' for " + key);
  return out;
}

inline std::string n_eff_name(EffectiveSize e) {
  switch (e) {
    case EffectiveSize::DwtEquivalent: return "dwt";
    case EffectiveSize::Coefficients: return "coefficients";
    case EffectiveSize::FilterAdjusted: return "filter";
  }
  return "dwt";
}

struct ConfigKey {
  const char* name;
  const char* help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

}  // namespace detail

/// Every configuration key with its setter; CLI flags use the same names.
inline const std::vector<detail::ConfigKey>& config_keys() {
  using detail::parse_number;
  static const std::vector<detail::ConfigKey> keys{
      {"assets", "asset names (comma separated)",
       [](RunConfig& c, const std::string& v) { c.assets = detail::split_words(v); },
       [](const RunConfig& c) { return detail::join(c.assets); }},
      {"data_dir", "directory holding <asset>.csv tick files",
       [](RunConfig& c, const std::string& v) { c.data_dir = v; }, [](const RunConfig& c) { return c.data_dir; }},
      {"inputs", "tick files in asset order (overrides data_dir)",
       [](RunConfig& c, const std::string& v) { c.inputs = detail::split_words(v); },
       [](const RunConfig& c) { return detail::join(c.inputs); }},
      {"open", "session open, local HH:MM", [](RunConfig& c, const std::string& v) { c.open = v; },
       [](const RunConfig& c) { return c.open; }},
      {"close", "session close, local HH:MM", [](RunConfig& c, const std::string& v) { c.close = v; },
       [](const RunConfig& c) { return c.close; }},
      {"zone", "exchange time zone", [](RunConfig& c, const std::string& v) { c.zone = v; },
       [](const RunConfig& c) { return c.zone; }},
      {"step_minutes", "grid step in minutes",
       [](RunConfig& c, const std::string& v) { c.step_minutes = parse_number<int>("step_minutes", v); },
       [](const RunConfig& c) { return std::to_string(c.step_minutes); }},
      {"holidays", "file of holiday dates", [](RunConfig& c, const std::string& v) { c.holidays = v; },
       [](const RunConfig& c) { return c.holidays; }},
      {"drop_year_end", "drop Dec 24-26 and Dec 31-Jan 2",
       [](RunConfig& c, const std::string& v) { c.drop_year_end = detail::parse_bool(v); },
       [](const RunConfig& c) { return std::string(c.drop_year_end ? "true" : "false"); }},
      {"filter", "wavelet filter: haar, d4, la8",
       [](RunConfig& c, const std::string& v) {
         try {
           c.filter = parse_filter_family(v);
         } catch (const Error& e) {
           fail(ErrorCode::Usage, std::string("config: ") + e.what());
         }
       },
       [](const RunConfig& c) { return to_string(c.filter); }},
      {"intraday_levels", "decomposition depth for intraday returns",
       [](RunConfig& c, const std::string& v) { c.intraday_levels = parse_number<int>("intraday_levels", v); },
       [](const RunConfig& c) { return std::to_string(c.intraday_levels); }},
      {"daily_levels", "decomposition depth for daily returns",
       [](RunConfig& c, const std::string& v) { c.daily_levels = parse_number<int>("daily_levels", v); },
       [](const RunConfig& c) { return std::to_string(c.daily_levels); }},
      {"n_eff", "effective size for intervals: dwt, coefficients, filter",
       [](RunConfig& c, const std::string& v) {
         if (v == "dwt") c.n_eff = EffectiveSize::DwtEquivalent;
         else if (v == "coefficients") c.n_eff = EffectiveSize::Coefficients;
         else if (v == "filter") c.n_eff = EffectiveSize::FilterAdjusted;
         else fail(ErrorCode::Usage, "config: n_eff must be dwt, coefficients or filter");
       },
       [](const RunConfig& c) { return detail::n_eff_name(c.n_eff); }},
      {"alpha", "homogeneity test level",
       [](RunConfig& c, const std::string& v) { c.alpha = parse_number<double>("alpha", v); },
       [](const RunConfig& c) { return fmt::format("{}", c.alpha); }},
      {"trim", "supF trimming fraction",
       [](RunConfig& c, const std::string& v) { c.trim = parse_number<double>("trim", v); },
       [](const RunConfig& c) { return fmt::format("{}", c.trim); }},
      {"supf_table", "supF null table file", [](RunConfig& c, const std::string& v) { c.supf_table = v; },
       [](const RunConfig& c) { return c.supf_table; }},
      {"break_series", "series tested for a break: monthly, dcc, realized",
       [](RunConfig& c, const std::string& v) { c.break_series = v; },
       [](const RunConfig& c) { return c.break_series; }},
      {"break_scale", "level of the monthly series tested for a break",
       [](RunConfig& c, const std::string& v) { c.break_scale = parse_number<int>("break_scale", v); },
       [](const RunConfig& c) { return std::to_string(c.break_scale); }},
      {"johansen_lags", "lagged differences in the VECM (0-5)",
       [](RunConfig& c, const std::string& v) { c.johansen_lags = parse_number<int>("johansen_lags", v); },
       [](const RunConfig& c) { return std::to_string(c.johansen_lags); }},
      {"johansen_spec", "deterministic terms: constant, none",
       [](RunConfig& c, const std::string& v) {
         try {
           c.johansen_spec = parse_johansen_spec(v);
         } catch (const Error& e) {
           fail(ErrorCode::Usage, std::string("config: ") + e.what());
         }
       },
       [](const RunConfig& c) { return std::string(to_string(c.johansen_spec)); }},
      {"johansen_sweep", "also report lags 0-5",
       [](RunConfig& c, const std::string& v) { c.johansen_sweep = detail::parse_bool(v); },
       [](const RunConfig& c) { return std::string(c.johansen_sweep ? "true" : "false"); }},
      {"johansen_sim_reps", "replications for simulated trace p-values (0 = table brackets)",
       [](RunConfig& c, const std::string& v) { c.johansen_sim_reps = parse_number<int>("johansen_sim_reps", v); },
       [](const RunConfig& c) { return std::to_string(c.johansen_sim_reps); }},
      {"output_dir", "directory for output files", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
       [](const RunConfig& c) { return c.output_dir; }},
      {"seed", "seed for simulated nulls",
       [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"json_report", "write a JSON report next to the tables",
       [](RunConfig& c, const std::string& v) { c.json_report = detail::parse_bool(v); },
       [](const RunConfig& c) { return std::string(c.json_report ? "true" : "false"); }},
  };
  return keys;
}

inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (key == k.name) {
      k.set(c, value);
      return;
    }
  }
  fail(ErrorCode::Usage, "config: unknown key '" + key + "'");
}

/// Flat key = value text; '#' and ';' start comments. Relative paths are kept
/// as written (resolved against the working directory).
inline std::map<std::string, std::string> parse_config_text(std::istream& in, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::Usage, fmt::format("{}:{}: {}", source, e.line(), e.message()));
  }
  std::map<std::string, std::string> out;
  for (const auto& [key, node] : tree) {
    require(node.empty(), ErrorCode::Usage, source + ": config files are flat; no [sections]");
    out[key] = node.data();
  }
  return out;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Usage, "cannot open config file '" + path + "'");
  RunConfig c;
  for (const auto& [key, value] : parse_config_text(in, path)) {
    try {
      apply_setting(c, key, value);
    } catch (const Error& e) {
      fail(e.code(), path + ": " + e.what());
    }
  }
  return c;
}

inline nlohmann::ordered_json config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  for (const auto& k : config_keys()) j[k.name] = k.get(c);
  return j;
}

// ---------------------------------------------------------------------------
// Output helpers

namespace detail {

inline std::string fixed(double v, int decimals = 6) {
  if (is_gap(v)) return {};
  auto s = fmt::format("{:.{}f}", v, decimals);
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);  // no negative zero
  return s;
}

inline std::string fixed(const std::optional<double>& v, int decimals = 6) {
  return v ? fixed(*v, decimals) : std::string{};
}

inline std::ofstream open_output(const std::filesystem::path& file) {
  std::error_code ec;
  if (!file.parent_path().empty()) std::filesystem::create_directories(file.parent_path(), ec);
  require(!ec, ErrorCode::IoError, "cannot create '" + file.parent_path().string() + "': " + ec.message());
  std::ofstream out(file, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write '" + file.string() + "'");
  return out;
}

inline std::string month_label(int year, unsigned month) { return fmt::format("{:04d}-{:02d}", year, month); }

}  // namespace detail

/// Lists every file written by a command, in order.
struct CommandResult {
  std::vector<std::filesystem::path> files;
  nlohmann::ordered_json report;
  std::vector<std::string> warnings;  // non-convergence notes
};

// ---------------------------------------------------------------------------
// Data loading

struct PipelineData {
  AlignedPanel panel;
  IntradayReturns intraday;
  DailyCloses closes;
  std::vector<Date> return_days;                // day of each daily return
  std::vector<std::vector<double>> daily_returns;  // [asset][day]
};

inline PipelineData load_pipeline(const RunConfig& c) {
  c.validate();
  const auto session = c.session();
  const auto paths = c.input_paths();
  std::vector<GriddedSeries> gridded;
  for (std::size_t a = 0; a < c.assets.size(); ++a) gridded.push_back(resample_to_grid(load_ticks(paths[a], c.assets[a]), session));
  PipelineData d;
  d.panel = synchronize(gridded);
  d.intraday = intraday_returns(d.panel);
  d.closes = daily_closes(d.panel);
  require(d.closes.days.size() >= 2, ErrorCode::TooFewObservations, "fewer than two trading days after synchronization");
  d.return_days.assign(d.closes.days.begin() + 1, d.closes.days.end());
  for (const auto& p : d.closes.prices) d.daily_returns.push_back(log_returns(p));
  return d;
}

inline std::vector<std::array<std::size_t, 2>> asset_pairs(std::size_t n) {
  std::vector<std::array<std::size_t, 2>> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) out.push_back({i, k});
  return out;
}

inline std::string pair_name(const RunConfig& c, const std::array<std::size_t, 2>& p) {
  return c.assets[p[0]] + "-" + c.assets[p[1]];
}

// ---------------------------------------------------------------------------
// panel

inline std::vector<std::string> panel_header(int levels, std::chrono::duration<double> step) {
  std::vector<std::string> h{"year"};
  for (int j = 1; j <= levels; ++j) h.push_back(horizon_label(j, step));
  h.push_back("lowfreq");
  h.push_back("reject");
  return h;
}

inline void write_panel_table(std::ostream& out, const std::vector<PanelCell>& cells, int levels,
                              std::chrono::duration<double> step) {
  out << detail::join(panel_header(levels, step)) << '\n';
  for (const auto& cell : cells) {
    out << cell.year;
    for (int j = 0; j < levels; ++j) {
      const auto& s = cell.scales[static_cast<std::size_t>(j)];
      out << ',' << (s ? detail::fixed(s->rho) : std::string{});
    }
    out << ',' << (cell.lowfreq ? detail::fixed(cell.lowfreq->rho) : std::string{});
    out << ',' << (cell.verdict ? (cell.verdict->reject ? "true" : "false") : "");
    out << '\n';
  }
}

inline nlohmann::ordered_json cell_json(const PanelCell& cell) {
  nlohmann::ordered_json j;
  j["year"] = cell.year;
  if (cell.month) j["month"] = cell.month;
  j["observations"] = cell.observations;
  if (cell.gap) j["gap"] = std::string(to_string(*cell.gap));
  auto scales = nlohmann::ordered_json::array();
  const auto entry = [](const std::optional<ScaleCorrelation>& s) {
    if (!s) return nlohmann::ordered_json();
    return nlohmann::ordered_json{{"rho", s->rho}, {"ci_lo", s->ci_lo}, {"ci_hi", s->ci_hi}, {"n_eff", s->n_eff}};
  };
  for (const auto& s : cell.scales) scales.push_back(entry(s));
  j["scales"] = scales;
  j["lowfreq"] = entry(cell.lowfreq);
  if (cell.verdict) j["reject"] = cell.verdict->reject;
  return j;
}

inline CommandResult cmd_panel(const RunConfig& c) {
  const auto data = load_pipeline(c);
  const std::filesystem::path dir = c.output_dir;
  CommandResult result;
  result.report["schema"] = kReportSchema;
  result.report["command"] = "panel";
  result.report["config"] = config_json(c);

  PanelOptions intraday_opts;
  intraday_opts.filter = c.filter;
  intraday_opts.levels = c.intraday_levels;
  intraday_opts.alpha = c.alpha;
  intraday_opts.correlation.effective_size = c.n_eff;
  PanelOptions daily_opts = intraday_opts;
  daily_opts.levels = c.daily_levels;
  const auto intraday_step = std::chrono::duration<double>(60.0 * c.step_minutes);
  const auto daily_step = std::chrono::duration<double>(86400.0);

  // Descriptive statistics of intraday and daily returns.
  {
    const auto file = dir / "descriptive.csv";
    auto out = detail::open_output(file);
    out << "asset,resolution,n,mean,sd,skewness,excess_kurtosis,min,max\n";
    for (std::size_t a = 0; a < c.assets.size(); ++a) {
      for (const auto& [label, series] : {std::pair{"intraday", &data.intraday.columns[a]},
                                          std::pair{"daily", &data.daily_returns[a]}}) {
        const auto s = descriptive_stats(*series);
        out << fmt::format("{},{},{},{},{},{},{},{},{}\n", c.assets[a], label, s.n, detail::fixed(s.mean, 8),
                           detail::fixed(s.sd, 8), detail::fixed(s.skewness, 4), detail::fixed(s.excess_kurtosis(), 4),
                           detail::fixed(s.min, 8), detail::fixed(s.max, 8));
      }
    }
    result.files.push_back(file);
  }

  auto pairs_json = nlohmann::ordered_json::object();
  for (const auto& p : asset_pairs(c.assets.size())) {
    const auto name = pair_name(c, p);
    const auto& x = data.intraday.columns[p[0]];
    const auto& y = data.intraday.columns[p[1]];
    const auto yearly = yearly_panel(data.intraday.days, x, y, intraday_opts);
    const auto daily = yearly_panel(data.return_days, data.daily_returns[p[0]], data.daily_returns[p[1]], daily_opts);
    const auto monthly = monthly_series(data.intraday.days, x, y, intraday_opts);
    {
      const auto file = dir / ("panel_intraday_" + name + ".csv");
      auto out = detail::open_output(file);
      write_panel_table(out, yearly, c.intraday_levels, intraday_step);
      result.files.push_back(file);
    }
    {
      const auto file = dir / ("panel_daily_" + name + ".csv");
      auto out = detail::open_output(file);
      write_panel_table(out, daily, c.daily_levels, daily_step);
      result.files.push_back(file);
    }
    {
      const auto file = dir / ("monthly_" + name + ".csv");
      auto out = detail::open_output(file);
      out << "month,scale,rho,ci_lo,ci_hi,n_eff\n";
      for (const auto& cell : monthly) {
        const auto month = detail::month_label(cell.year, cell.month);
        const auto row = [&](const std::string& label, const std::optional<ScaleCorrelation>& s) {
          if (s) {
            out << fmt::format("{},{},{},{},{},{}\n", month, label, detail::fixed(s->rho), detail::fixed(s->ci_lo),
                               detail::fixed(s->ci_hi), detail::fixed(s->n_eff, 2));
          } else {
            out << month << ',' << label << ",,,,\n";
          }
        };
        for (int j = 1; j <= c.intraday_levels; ++j)
          row(horizon_label(j, intraday_step), cell.scales[static_cast<std::size_t>(j - 1)]);
        row("lowfreq", cell.lowfreq);
      }
      result.files.push_back(file);
    }
    nlohmann::ordered_json pj;
    auto yj = nlohmann::ordered_json::array();
    for (const auto& cell : yearly) yj.push_back(cell_json(cell));
    auto dj = nlohmann::ordered_json::array();
    for (const auto& cell : daily) dj.push_back(cell_json(cell));
    pj["intraday"] = yj;
    pj["daily"] = dj;
    pairs_json[name] = pj;
  }
  result.report["pairs"] = pairs_json;
  return result;
}

// ---------------------------------------------------------------------------
// benchmarks

struct PairDcc {
  DccGarchFit fit;
  std::vector<double> rho;
};

inline PairDcc fit_pair_dcc(const PipelineData& data, const std::array<std::size_t, 2>& p) {
  const auto t = static_cast<Eigen::Index>(data.return_days.size());
  Eigen::MatrixXd r(t, 2);
  for (Eigen::Index i = 0; i < t; ++i) {
    r(i, 0) = data.daily_returns[p[0]][static_cast<std::size_t>(i)];
    r(i, 1) = data.daily_returns[p[1]][static_cast<std::size_t>(i)];
  }
  PairDcc out{dcc_garch_fit(r), {}};
  out.rho = dcc_correlation_path(out.fit.dcc, 0, 1);
  return out;
}

inline CommandResult cmd_benchmarks(const RunConfig& c) {
  const auto data = load_pipeline(c);
  const std::filesystem::path dir = c.output_dir;
  CommandResult result;
  result.report["schema"] = kReportSchema;
  result.report["command"] = "benchmarks";
  result.report["config"] = config_json(c);
  const auto realized = realized_by_day(data.intraday.days, data.intraday.columns);

  const auto params_file = dir / "dcc_params.csv";
  auto params = detail::open_output(params_file);
  params << "pair,asset,omega,alpha,beta,a,b,loglik,converged\n";
  auto pairs_json = nlohmann::ordered_json::object();
  for (const auto& p : asset_pairs(c.assets.size())) {
    const auto name = pair_name(c, p);
    const auto dcc = fit_pair_dcc(data, p);
    {
      const auto file = dir / ("dcc_" + name + ".csv");
      auto out = detail::open_output(file);
      out << "date,rho\n";
      for (std::size_t t = 0; t < dcc.rho.size(); ++t)
        out << format_date(data.return_days[t]) << ',' << detail::fixed(dcc.rho[t]) << '\n';
      result.files.push_back(file);
    }
    {
      const auto file = dir / ("realized_" + name + ".csv");
      auto out = detail::open_output(file);
      out << "date,rc_xx,rc_xy,rc_yy,rcorr_xy\n";
      const auto i = static_cast<Eigen::Index>(p[0]);
      const auto k = static_cast<Eigen::Index>(p[1]);
      for (const auto& day : realized) {
        out << fmt::format("{},{},{},{},{}\n", format_date(day.day), format_number(day.rc(i, i)),
                           format_number(day.rc(i, k)), format_number(day.rc(k, k)),
                           detail::fixed(day.correlation(p[0], p[1])));
      }
      result.files.push_back(file);
    }
    for (std::size_t m = 0; m < 2; ++m) {
      const auto& g = dcc.fit.margins[m];
      params << fmt::format("{},{},{},{},{},,,{},{}\n", name, c.assets[p[m]], format_number(g.omega),
                            detail::fixed(g.alpha), detail::fixed(g.beta), detail::fixed(g.loglik, 4),
                            g.converged ? "true" : "false");
    }
    params << fmt::format("{},,,,,{},{},{},{}\n", name, detail::fixed(dcc.fit.dcc.a), detail::fixed(dcc.fit.dcc.b),
                          detail::fixed(dcc.fit.dcc.loglik, 4), dcc.fit.dcc.converged ? "true" : "false");
    if (!dcc.fit.converged()) result.warnings.push_back("DCC-GARCH fit for " + name + " did not converge");
    pairs_json[name] = {{"dcc_a", dcc.fit.dcc.a},
                        {"dcc_b", dcc.fit.dcc.b},
                        {"dcc_degenerate", dcc.fit.dcc.degenerate},
                        {"converged", dcc.fit.converged()},
                        {"days", dcc.rho.size()}};
  }
  result.files.push_back(params_file);
  result.report["pairs"] = pairs_json;
  result.report["converged"] = result.warnings.empty();
  return result;
}

// ---------------------------------------------------------------------------
// breaks

struct DatedSeries {
  std::vector<Date> dates;
  std::vector<double> values;
};

inline DatedSeries break_series(const RunConfig& c, const PipelineData& data, const std::array<std::size_t, 2>& p) {
  DatedSeries s;
  if (c.break_series == "monthly") {
    PanelOptions opts;
    opts.filter = c.filter;
    opts.levels = c.intraday_levels;
    opts.alpha = c.alpha;
    opts.correlation.effective_size = c.n_eff;
    const auto cells =
        monthly_series(data.intraday.days, data.intraday.columns[p[0]], data.intraday.columns[p[1]], opts);
    for (const auto& cell : cells) {
      const auto& v = cell.scales[static_cast<std::size_t>(c.break_scale - 1)];
      if (!v) continue;
      s.dates.push_back(make_date(cell.year, cell.month, 1));
      s.values.push_back(v->rho);
    }
  } else if (c.break_series == "dcc") {
    const auto dcc = fit_pair_dcc(data, p);
    s.dates = data.return_days;
    s.values = dcc.rho;
  } else {
    const auto realized = realized_by_day(data.intraday.days, data.intraday.columns);
    for (const auto& day : realized) {
      const auto rho = day.correlation(p[0], p[1]);
      if (!rho) continue;
      s.dates.push_back(day.day);
      s.values.push_back(*rho);
    }
  }
  return s;
}

inline std::string trace_p(const JohansenResult& r, std::size_t rank) {
  if (r.simulated_p.at(rank)) return detail::fixed(*r.simulated_p[rank], 4);
  return r.bracket(rank);
}

inline CommandResult cmd_breaks(const RunConfig& c) {
  const auto data = load_pipeline(c);
  const auto table = SupFNullTable::load(c.null_table_path());
  const std::filesystem::path dir = c.output_dir;
  CommandResult result;
  result.report["schema"] = kReportSchema;
  result.report["command"] = "breaks";
  result.report["config"] = config_json(c);

  const auto pairs = asset_pairs(c.assets.size());
  std::vector<BreakResult> breaks;
  std::vector<CointegrationSplit> splits;
  std::vector<std::string> series_names;
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto& p = pairs[pi];
    const auto s = break_series(c, data, p);
    try {
      breaks.push_back(supf_break(s.values, s.dates, table, c.trim));
    } catch (const Error& e) {
      fail(e.code(), pair_name(c, p) + ": " + e.what());
    }
    const Date when = *breaks.back().break_date;
    std::size_t index = 0;
    while (index < data.closes.days.size() && to_days(data.closes.days[index]) < to_days(when)) ++index;
    Eigen::MatrixXd levels(static_cast<Eigen::Index>(data.closes.days.size()), 2);
    for (std::size_t t = 0; t < data.closes.days.size(); ++t) {
      levels(static_cast<Eigen::Index>(t), 0) = std::log(data.closes.prices[p[0]][t]);
      levels(static_cast<Eigen::Index>(t), 1) = std::log(data.closes.prices[p[1]][t]);
    }
    try {
      splits.push_back(split_sample_cointegration(levels, index, c.johansen_lags, c.johansen_spec));
    } catch (const Error& e) {
      fail(e.code(), pair_name(c, p) + ": " + e.what());
    }
    if (c.johansen_sim_reps > 0) {
      auto& sp = splits.back();
      const auto reps = static_cast<std::size_t>(c.johansen_sim_reps);
      johansen_simulated_pvalues(sp.pre, reps, c.seed + 3 * pi);
      johansen_simulated_pvalues(sp.post, reps, c.seed + 3 * pi + 1);
      johansen_simulated_pvalues(sp.full, reps, c.seed + 3 * pi + 2);
    }
  }

  {
    const auto file = dir / "breaks.csv";
    auto out = detail::open_output(file);
    out << "pair,series,n,trim,supF,p_value,break_index,break_date\n";
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
      const auto& b = breaks[pi];
      const std::string series = c.break_series == "monthly" ? fmt::format("monthly_level{}", c.break_scale) : c.break_series;
      out << fmt::format("{},{},{},{},{},{},{},{}\n", pair_name(c, pairs[pi]), series, b.n, b.trim,
                         detail::fixed(b.supf, 4), detail::fixed(b.p_value, 4), b.break_index,
                         format_date(*b.break_date));
    }
    result.files.push_back(file);
  }
  const auto periods = [](const CointegrationSplit& s) {
    return std::array<std::pair<const char*, const JohansenResult*>, 3>{
        {{"pre-break", &s.pre}, {"post-break", &s.post}, {"full period", &s.full}}};
  };
  {
    const auto file = dir / "cointegration_summary.csv";
    auto out = detail::open_output(file);
    out << "period";
    for (const auto& p : pairs) out << ',' << pair_name(c, p) << ',' << pair_name(c, p) << "_p";
    out << '\n';
    for (std::size_t row = 0; row < 3; ++row) {
      out << periods(splits[0])[row].first;
      for (const auto& s : splits) {
        const auto* r = periods(s)[row].second;
        out << ',' << detail::fixed(r->trace[0], 2) << ',' << trace_p(*r, 0);
      }
      out << '\n';
    }
    result.files.push_back(file);
  }
  {
    const auto file = dir / "cointegration.csv";
    auto out = detail::open_output(file);
    out << "pair,period,first_day,last_day,t_eff,lags,spec,rank,eigenvalue,trace,cv90,cv95,cv99,p\n";
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
      const auto& s = splits[pi];
      for (const auto& [label, r] : periods(s)) {
        const std::size_t first = std::string(label) == "post-break" ? s.break_index : 0;
        const std::size_t last =
            std::string(label) == "pre-break" ? s.break_index - 1 : data.closes.days.size() - 1;
        for (std::size_t rank = 0; rank < r->trace.size(); ++rank) {
          out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", pair_name(c, pairs[pi]), label,
                             format_date(data.closes.days[first]), format_date(data.closes.days[last]), r->t_eff,
                             r->lags, to_string(r->spec), rank, detail::fixed(r->eigenvalues[rank], 6),
                             detail::fixed(r->trace[rank], 4), r->critical[rank][0], r->critical[rank][1],
                             r->critical[rank][2], trace_p(*r, rank));
        }
      }
    }
    result.files.push_back(file);
  }
  if (c.johansen_sweep) {
    const auto file = dir / "cointegration_sweep.csv";
    auto out = detail::open_output(file);
    out << "pair,period,lags,trace_r0,p_r0,trace_r1,p_r1\n";
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
      const auto& p = pairs[pi];
      Eigen::MatrixXd levels(static_cast<Eigen::Index>(data.closes.days.size()), 2);
      for (std::size_t t = 0; t < data.closes.days.size(); ++t) {
        levels(static_cast<Eigen::Index>(t), 0) = std::log(data.closes.prices[p[0]][t]);
        levels(static_cast<Eigen::Index>(t), 1) = std::log(data.closes.prices[p[1]][t]);
      }
      for (int lags = 0; lags <= 5; ++lags) {
        const auto s = split_sample_cointegration(levels, splits[pi].break_index, lags, c.johansen_spec);
        for (const auto& [label, r] : periods(s)) {
          out << fmt::format("{},{},{},{},{},{},{}\n", pair_name(c, p), label, lags, detail::fixed(r->trace[0], 4),
                             r->bracket(0), detail::fixed(r->trace[1], 4), r->bracket(1));
        }
      }
    }
    result.files.push_back(file);
  }

  auto pj = nlohmann::ordered_json::object();
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto& b = breaks[pi];
    nlohmann::ordered_json j;
    j["supF"] = b.supf;
    j["p_value"] = b.p_value;
    j["break_date"] = format_date(*b.break_date);
    for (const auto& [label, r] : periods(splits[pi])) {
      j[label] = {{"trace", r->trace}, {"eigenvalues", r->eigenvalues}, {"rank", r->rank()}};
    }
    pj[pair_name(c, pairs[pi])] = j;
  }
  result.report["pairs"] = pj;
  return result;
}

// ---------------------------------------------------------------------------
// gen and nulltab

inline CommandResult cmd_gen(const std::string& scenario_path, const std::string& output_dir) {
  const auto scenario = load_scenario(scenario_path);
  CommandResult result;
  result.files = write_market_scenario(scenario, output_dir);
  return result;
}

inline CommandResult cmd_nulltab(double trim, std::uint64_t seed, std::size_t paths, std::size_t grid,
                                 const std::string& output) {
  const auto table = SupFNullTable::simulate(trim, seed, paths, grid);
  auto out = detail::open_output(output);
  table.write(out);
  CommandResult result;
  result.files.push_back(output);
  return result;
}

/// Writes the command's JSON report when enabled and returns the exit status:
/// 0 on success, 4 when an estimate did not converge (outputs still written).
inline int finish_command(const RunConfig& c, CommandResult& result, const std::string& command) {
  if (c.json_report) {
    const auto file = std::filesystem::path(c.output_dir) / ("report_" + command + ".json");
    auto out = detail::open_output(file);
    result.report["files"] = nlohmann::ordered_json::array();
    for (const auto& f : result.files) result.report["files"].push_back(f.filename().string());
    result.report["warnings"] = result.warnings;
    out << result.report.dump(2) << '\n';
    result.files.push_back(file);
  }
  return result.warnings.empty() ? 0 : 4;
}

/// Exit status for an error: 2 usage, 4 non-convergence, 3 any data error.
inline int exit_code_for(ErrorCode code) {
  if (code == ErrorCode::Usage) return 2;
  if (code == ErrorCode::NonConvergence) return 4;
  return 3;
}

/// Single-line machine-parsable error message.
inline std::string error_line(ErrorCode code, const std::string& message) {
  std::string flat = message;
  for (auto& ch : flat)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return fmt::format("ERROR {}: {}", to_string(code), flat);
}

}  // namespace wavecorr
