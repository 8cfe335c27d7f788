#pragma once

// Single-break detection (supF over a trimmed interior, mean-shift model) and
// the Johansen trace test for the cointegration rank of 2 or 3 level series.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "wavecorr/calendar.hpp"
#include "wavecorr/error.hpp"
#include "wavecorr/rng.hpp"

namespace wavecorr {

// ---------------------------------------------------------------------------
// supF null distribution

/// Seed of the shipped null table.
inline constexpr std::uint64_t kSupFNullSeed = 20240601;

/// Quantiles of sup over l in [trim, 1 - trim] of (B(l) - l B(1))^2 / (l (1 - l)),
/// B a standard Brownian motion, simulated on an equally spaced grid.
class SupFNullTable {
 public:
  static constexpr std::size_t kLevels = 1000;  // quantiles at k / kLevels, k = 0..kLevels

  static SupFNullTable simulate(double trim, std::uint64_t seed, std::size_t paths = 100'000,
                                std::size_t grid = 1000) {
    require(trim >= 0.05 && trim <= 0.25, ErrorCode::InvalidArgument, "trim must lie in [0.05, 0.25]");
    require(paths >= 100 && grid >= 20, ErrorCode::InvalidArgument, "null table needs >= 100 paths and >= 20 grid points");
    std::vector<double> stats(paths);
    std::vector<double> walk(grid + 1);
    const double step_sd = 1.0 / std::sqrt(static_cast<double>(grid));
    for (std::size_t p = 0; p < paths; ++p) {
      CounterRng rng(seed, p);
      walk[0] = 0.0;
      for (std::size_t i = 1; i <= grid; ++i) walk[i] = walk[i - 1] + step_sd * rng.normal();
      double sup = 0.0;
      for (std::size_t i = 1; i < grid; ++i) {
        const double l = static_cast<double>(i) / static_cast<double>(grid);
        if (l < trim - 1e-12 || l > 1.0 - trim + 1e-12) continue;
        const double bridge = walk[i] - l * walk[grid];
        sup = std::max(sup, bridge * bridge / (l * (1.0 - l)));
      }
      stats[p] = sup;
    }
    std::sort(stats.begin(), stats.end());
    SupFNullTable t;
    t.trim_ = trim;
    t.seed_ = seed;
    t.paths_ = paths;
    t.grid_ = grid;
    for (std::size_t k = 0; k <= kLevels; ++k) {
      const double pos = static_cast<double>(k) / kLevels * static_cast<double>(paths - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, paths - 1);
      t.probs_.push_back(static_cast<double>(k) / kLevels);
      t.quantiles_.push_back(stats[lo] + (pos - static_cast<double>(lo)) * (stats[hi] - stats[lo]));
    }
    return t;
  }

  void write(std::ostream& out) const {
    out << "# supF null: sup over [trim, 1-trim] of (B(l) - l*B(1))^2 / (l*(1-l))\n";
    out << fmt::format("# seed={} paths={} grid={} trim={}\n", seed_, paths_, grid_, trim_);
    out << "grid_point,quantile\n";
    for (std::size_t k = 0; k < probs_.size(); ++k) out << fmt::format("{:.3f},{:.8f}\n", probs_[k], quantiles_[k]);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot write null table '" + path + "'");
    write(out);
  }

  static SupFNullTable parse(std::istream& in, const std::string& source = "<input>") {
    SupFNullTable t;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line[0] == '#') {
        std::istringstream fields(line.substr(1));
        std::string kv;
        while (fields >> kv) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) continue;
          const std::string key = kv.substr(0, eq);
          const std::string value = kv.substr(eq + 1);
          if (key == "seed") t.seed_ = std::stoull(value);
          if (key == "paths") t.paths_ = std::stoull(value);
          if (key == "grid") t.grid_ = std::stoull(value);
          if (key == "trim") t.trim_ = std::stod(value);
        }
        continue;
      }
      if (!header) {
        require(line == "grid_point,quantile", ErrorCode::ParseError,
                source + ":" + std::to_string(line_no) + ": expected header 'grid_point,quantile'");
        header = true;
        continue;
      }
      const auto comma = line.find(',');
      require(comma != std::string::npos, ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": bad row");
      try {
        t.probs_.push_back(std::stod(line.substr(0, comma)));
        t.quantiles_.push_back(std::stod(line.substr(comma + 1)));
      } catch (const std::exception&) {
        fail(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": bad number");
      }
    }
    require(t.probs_.size() >= 2 && t.trim_ > 0.0, ErrorCode::ParseError, source + ": incomplete null table");
    for (std::size_t k = 1; k < t.probs_.size(); ++k) {
      require(t.probs_[k] > t.probs_[k - 1] && t.quantiles_[k] >= t.quantiles_[k - 1], ErrorCode::ParseError,
              source + ": null table rows must increase");
    }
    return t;
  }

  static SupFNullTable load(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::IoError, "cannot open null table '" + path + "'");
    return parse(in, path);
  }

  /// Upper-tail probability of `stat`, interpolating the tabulated CDF.
  double p_value(double stat) const {
    if (stat <= quantiles_.front()) return 1.0;
    if (stat >= quantiles_.back()) return 0.0;
    const auto it = std::upper_bound(quantiles_.begin(), quantiles_.end(), stat);
    const auto hi = static_cast<std::size_t>(it - quantiles_.begin());
    const auto lo = hi - 1;
    const double span = quantiles_[hi] - quantiles_[lo];
    const double w = span > 0.0 ? (stat - quantiles_[lo]) / span : 1.0;
    return 1.0 - (probs_[lo] + w * (probs_[hi] - probs_[lo]));
  }

  double quantile(double prob) const {
    require(prob >= probs_.front() && prob <= probs_.back(), ErrorCode::InvalidArgument, "probability outside table");
    const auto it = std::lower_bound(probs_.begin(), probs_.end(), prob);
    const auto hi = static_cast<std::size_t>(it - probs_.begin());
    if (hi == 0) return quantiles_.front();
    const auto lo = hi - 1;
    const double w = (prob - probs_[lo]) / (probs_[hi] - probs_[lo]);
    return quantiles_[lo] + w * (quantiles_[hi] - quantiles_[lo]);
  }

  double trim() const { return trim_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t paths() const { return paths_; }
  std::size_t grid() const { return grid_; }

 private:
  double trim_ = 0.0;
  std::uint64_t seed_ = 0;
  std::size_t paths_ = 0;
  std::size_t grid_ = 0;
  std::vector<double> probs_;
  std::vector<double> quantiles_;
};

inline std::string supf_table_filename(double trim) { return fmt::format("supf_null_trim{:.2f}.csv", trim); }

// ---------------------------------------------------------------------------
// supF

struct BreakResult {
  double supf = 0.0;
  std::size_t break_index = 0;  // first observation of the second regime
  std::optional<Date> break_date;
  double p_value = 1.0;
  double trim = 0.15;
  std::size_t n = 0;
  std::size_t first_candidate = 0;
  std::vector<double> fstats;  // F(k) for k = first_candidate, first_candidate + 1, ...
};

/// Chow F statistic for a mean shift at every k in [ceil(trim n), floor((1 - trim) n)]:
/// F(k) = (SSR0 - SSR1(k)) / (SSR1(k) / (n - 2)).
inline BreakResult supf_break(std::span<const double> y, const SupFNullTable& null, double trim = 0.15) {
  require(y.size() >= 40, ErrorCode::SeriesTooShort, "supF needs at least 40 observations");
  require(trim >= 0.05 && trim <= 0.25, ErrorCode::InvalidArgument, "trim must lie in [0.05, 0.25]");
  require(std::abs(null.trim() - trim) < 1e-9, ErrorCode::InvalidArgument,
          fmt::format("null table was simulated for trim {} but the test uses {}", null.trim(), trim));
  const std::size_t n = y.size();
  const double nd = static_cast<double>(n);
  for (double v : y) require(std::isfinite(v), ErrorCode::NonFiniteInput, "non-finite value in break series");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= nd;
  // Work with deviations from the mean so the statistic is exactly affine invariant.
  std::vector<double> prefix(n + 1, 0.0);
  std::vector<double> prefix_sq(n + 1, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double d = y[t] - mean;
    prefix[t + 1] = prefix[t] + d;
    prefix_sq[t + 1] = prefix_sq[t] + d * d;
  }
  const double ssr0 = prefix_sq[n] - prefix[n] * prefix[n] / nd;
  const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
  require(*lo_it != *hi_it && ssr0 > 0.0, ErrorCode::ConstantSeries, "series is constant; F is undefined");

  BreakResult out;
  out.trim = trim;
  out.n = n;
  const auto first = static_cast<std::size_t>(std::ceil(trim * nd - 1e-9));
  const auto last = static_cast<std::size_t>(std::floor((1.0 - trim) * nd + 1e-9));
  out.first_candidate = first;
  out.supf = -1.0;
  for (std::size_t k = first; k <= last; ++k) {
    const double n1 = static_cast<double>(k);
    const double n2 = nd - n1;
    const double s1 = prefix[k];
    const double s2 = prefix[n] - prefix[k];
    // SSR0 - SSR1 is the between-group sum of squares.
    const double between = s1 * s1 / n1 + s2 * s2 / n2 - prefix[n] * prefix[n] / nd;
    const double ssr1 = std::max(ssr0 - between, 0.0);
    const double f = ssr1 > 0.0 ? between / (ssr1 / (nd - 2.0)) : std::numeric_limits<double>::infinity();
    out.fstats.push_back(f);
    if (f > out.supf) {
      out.supf = f;
      out.break_index = k;
    }
  }
  out.p_value = null.p_value(out.supf);
  return out;
}

/// Same test on a date-indexed series; break_date is the date at break_index.
inline BreakResult supf_break(std::span<const double> y, std::span<const Date> dates, const SupFNullTable& null,
                              double trim = 0.15) {
  require(dates.size() == y.size(), ErrorCode::ShapeMismatch, "series and dates differ in length");
  BreakResult out = supf_break(y, null, trim);
  out.break_date = dates[out.break_index];
  return out;
}

// ---------------------------------------------------------------------------
// Johansen trace test

enum class JohansenSpec { Constant, None };

inline std::string_view to_string(JohansenSpec s) { return s == JohansenSpec::Constant ? "constant" : "none"; }

inline JohansenSpec parse_johansen_spec(std::string_view text) {
  if (text == "constant") return JohansenSpec::Constant;
  if (text == "none") return JohansenSpec::None;
  fail(ErrorCode::InvalidArgument, "unknown Johansen deterministic spec '" + std::string(text) + "'");
}

/// Asymptotic trace critical values at 90/95/99% by n - r (MacKinnon, Haug and
/// Michelis 1999), for an unrestricted constant and for no deterministic terms.
struct TraceCriticalValues {
  static constexpr std::array<double, 3> kLevels{0.90, 0.95, 0.99};

  static std::array<double, 3> lookup(std::size_t dimension, JohansenSpec spec) {
    static constexpr std::array<std::array<double, 3>, 3> kConstant{{
        {2.7055, 3.8415, 6.6349},
        {13.4294, 15.4943, 19.9349},
        {27.0669, 29.7961, 35.4628},
    }};
    static constexpr std::array<std::array<double, 3>, 3> kNone{{
        {2.9762, 4.1296, 6.9406},
        {10.4741, 12.3212, 16.3640},
        {21.7781, 24.2761, 29.5147},
    }};
    require(dimension >= 1 && dimension <= 3, ErrorCode::InvalidArgument, "critical values cover n - r = 1..3");
    return spec == JohansenSpec::Constant ? kConstant[dimension - 1] : kNone[dimension - 1];
  }

  /// CSV keyed by (n, rank, spec, level) for n = 2, 3.
  static void write_csv(std::ostream& out) {
    out << "n,rank,spec,level,critical_value\n";
    for (std::size_t n = 2; n <= 3; ++n)
      for (std::size_t r = 0; r < n; ++r)
        for (auto spec : {JohansenSpec::Constant, JohansenSpec::None}) {
          const auto cv = lookup(n - r, spec);
          for (std::size_t l = 0; l < 3; ++l)
            out << fmt::format("{},{},{},{:.2f},{:.4f}\n", n, r, to_string(spec), kLevels[l], cv[l]);
        }
  }
};

struct JohansenResult {
  int lags = 1;
  JohansenSpec spec = JohansenSpec::Constant;
  std::size_t n = 0;
  std::size_t t_eff = 0;
  std::vector<double> eigenvalues;                 // descending
  std::vector<double> trace;                       // null rank r = 0..n-1
  std::vector<std::array<double, 3>> critical;     // 90/95/99% per r
  std::vector<std::optional<double>> simulated_p;  // filled by johansen_simulated_pvalues

  /// "<0.01", "0.01-0.05", "0.05-0.10" or ">0.10".
  std::string bracket(std::size_t r) const {
    const auto& cv = critical.at(r);
    const double s = trace.at(r);
    if (s > cv[2]) return "<0.01";
    if (s > cv[1]) return "0.01-0.05";
    if (s > cv[0]) return "0.05-0.10";
    return ">0.10";
  }

  bool rejects(std::size_t r, double level = 0.95) const {
    const auto& cv = critical.at(r);
    const double threshold = level >= 0.99 ? cv[2] : level >= 0.95 ? cv[1] : cv[0];
    return trace.at(r) > threshold;
  }

  /// Smallest r whose null is not rejected at 95%.
  std::size_t rank() const {
    for (std::size_t r = 0; r < trace.size(); ++r)
      if (!rejects(r)) return r;
    return trace.size();
  }
};

/// levels: T x n (n = 2 or 3). `lags` is the number of lagged differences in
/// the VECM dY_t = Pi Y_{t-1} + sum_i G_i dY_{t-i} + mu + e_t.
namespace detail {
inline JohansenResult johansen_core(const Eigen::MatrixXd& levels, int lags, JohansenSpec spec) {
  const auto n = levels.cols();
  require(lags >= 0 && lags <= 5, ErrorCode::InvalidArgument, "lags must lie in 0..5");
  require(levels.allFinite(), ErrorCode::NonFiniteInput, "non-finite level");
  const Eigen::Index big_t = levels.rows();
  const Eigen::Index t_eff = big_t - 1 - lags;
  require(t_eff >= 100, ErrorCode::TooShort,
          "Johansen test needs at least 100 observations after lag truncation, got " + std::to_string(std::max<Eigen::Index>(t_eff, 0)));

  const Eigen::MatrixXd dy = levels.bottomRows(big_t - 1) - levels.topRows(big_t - 1);
  const Eigen::Index extra = lags * n + (spec == JohansenSpec::Constant ? 1 : 0);
  Eigen::MatrixXd z0(t_eff, n);
  Eigen::MatrixXd z1(t_eff, n);
  Eigen::MatrixXd z2(t_eff, extra);
  for (Eigen::Index i = 0; i < t_eff; ++i) {
    const Eigen::Index s = i + lags;  // row of dy holding dY_t
    z0.row(i) = dy.row(s);
    z1.row(i) = levels.row(s);
    for (int l = 1; l <= lags; ++l) z2.block(i, (l - 1) * n, 1, n) = dy.row(s - l);
    if (spec == JohansenSpec::Constant) z2(i, extra - 1) = 1.0;
  }
  Eigen::MatrixXd r0 = z0;
  Eigen::MatrixXd r1 = z1;
  if (extra > 0) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z2);
    require(qr.rank() == extra, ErrorCode::SingularMoment, "lagged differences are collinear");
    r0 -= z2 * qr.solve(z0);
    r1 -= z2 * qr.solve(z1);
  }
  const double td = static_cast<double>(t_eff);
  const Eigen::MatrixXd s00 = r0.transpose() * r0 / td;
  const Eigen::MatrixXd s11 = r1.transpose() * r1 / td;
  const Eigen::MatrixXd s01 = r0.transpose() * r1 / td;
  // Judge conditioning on the correlation form so rescaling a series cannot trip it.
  const auto well_conditioned = [](const Eigen::MatrixXd& m) {
    const Eigen::VectorXd d = m.diagonal();
    if (d.minCoeff() <= 0.0) return false;
    const Eigen::VectorXd inv = d.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd c = inv.asDiagonal() * m * inv.asDiagonal();
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues().minCoeff() > 1e-10;
  };
  require(well_conditioned(s00) && well_conditioned(s11), ErrorCode::SingularMoment,
          "moment matrices are singular (collinear inputs)");

  // |lambda S11 - S10 S00^-1 S01| = 0 via S11 = L L'.
  const Eigen::LLT<Eigen::MatrixXd> chol(s11);
  const Eigen::MatrixXd l = chol.matrixL();
  const Eigen::MatrixXd m = s01.transpose() * s00.ldlt().solve(s01);
  const Eigen::MatrixXd left = l.triangularView<Eigen::Lower>().solve(m);
  Eigen::MatrixXd c = l.triangularView<Eigen::Lower>().solve(left.transpose()).transpose();
  c = 0.5 * (c + c.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);

  JohansenResult out;
  out.lags = lags;
  out.spec = spec;
  out.n = static_cast<std::size_t>(n);
  out.t_eff = static_cast<std::size_t>(t_eff);
  for (Eigen::Index i = n - 1; i >= 0; --i) out.eigenvalues.push_back(std::clamp(eig.eigenvalues()(i), 0.0, 1.0 - 1e-15));
  for (std::size_t r = 0; r < out.n; ++r) {
    double s = 0.0;
    for (std::size_t i = r; i < out.n; ++i) s -= td * std::log(1.0 - out.eigenvalues[i]);
    out.trace.push_back(s);
    out.critical.push_back(TraceCriticalValues::lookup(out.n - r, spec));
  }
  out.simulated_p.assign(out.n, std::nullopt);
  return out;
}
}  // namespace detail

inline JohansenResult johansen_trace(const Eigen::MatrixXd& levels, int lags = 1,
                                     JohansenSpec spec = JohansenSpec::Constant) {
  require(levels.cols() >= 2 && levels.cols() <= 3, ErrorCode::InvalidArgument, "Johansen test supports 2 or 3 series");
  return detail::johansen_core(levels, lags, spec);
}

/// Simulated p-values: for null rank r, the rank-0 trace statistic of n - r
/// independent random walks of the same length, lags and spec. Under the
/// constant spec the walks carry a unit drift, matching the asymptotic tables.
inline void johansen_simulated_pvalues(JohansenResult& result, std::size_t reps, std::uint64_t seed) {
  require(reps >= 19, ErrorCode::InvalidArgument, "simulated p-values need at least 19 replications");
  const auto length = static_cast<Eigen::Index>(result.t_eff + 1 + static_cast<std::size_t>(result.lags));
  for (std::size_t r = 0; r < result.n; ++r) {
    const auto dim = static_cast<Eigen::Index>(result.n - r);
    std::size_t exceed = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      CounterRng rng(seed, (static_cast<std::uint64_t>(dim) << 40) | rep);
      Eigen::MatrixXd walk(length, dim);
      const double drift = result.spec == JohansenSpec::Constant ? 1.0 : 0.0;
      for (Eigen::Index k = 0; k < dim; ++k) {
        double level = 0.0;
        for (Eigen::Index t = 0; t < length; ++t) {
          level += drift + rng.normal();
          walk(t, k) = level;
        }
      }
      const double stat = detail::johansen_core(walk, result.lags, result.spec).trace[0];
      if (stat >= result.trace[r]) ++exceed;
    }
    result.simulated_p[r] = static_cast<double>(exceed + 1) / static_cast<double>(reps + 1);
  }
}

struct CointegrationSplit {
  std::size_t break_index;
  JohansenResult pre;
  JohansenResult post;
  JohansenResult full;
};

/// Johansen test on [0, break), [break, T) and the whole sample. Each side
/// must keep at least 100 observations after lag truncation.
inline CointegrationSplit split_sample_cointegration(const Eigen::MatrixXd& levels, std::size_t break_index,
                                                     int lags = 1, JohansenSpec spec = JohansenSpec::Constant) {
  const auto big_t = static_cast<std::size_t>(levels.rows());
  const auto need = static_cast<std::size_t>(101 + std::max(lags, 0));
  require(break_index >= need && big_t >= break_index + need, ErrorCode::SubsampleTooShort,
          fmt::format("break at {} leaves fewer than {} observations on one side of {}", break_index, need, big_t));
  const auto k = static_cast<Eigen::Index>(break_index);
  return {break_index, johansen_trace(levels.topRows(k), lags, spec),
          johansen_trace(levels.bottomRows(levels.rows() - k), lags, spec), johansen_trace(levels, lags, spec)};
}

}  // namespace wavecorr
