#pragma once

// Scale-wise second moments of MODWT coefficients: wavelet variance,
// covariance and correlation, Fisher-z confidence intervals, the cross-scale
// homogeneity test, and calendar panels built from them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "wavecorr/calendar.hpp"
#include "wavecorr/error.hpp"
#include "wavecorr/wavelet_core.hpp"

namespace wavecorr {

/// Which coefficients enter a moment estimate. BoundaryExcluded sums only the
/// M_j coefficients whose filter support lies inside the sample (s = L_j-1..N-1);
/// FullCircular uses all N, under which the variance/covariance decompositions
/// across scales are exact.
enum class Summation { BoundaryExcluded, FullCircular };

/// Effective sample size convention for correlation confidence intervals.
/// DwtEquivalent: M_j / 2^j. Coefficients: M_j. FilterAdjusted: M_j divided by
/// the sum of squared autocorrelations the level-j filter induces in white
/// noise, the exact large-sample Fisher-z variance for white inputs.
enum class EffectiveSize { DwtEquivalent, Coefficients, FilterAdjusted };

struct MomentOptions {
  Summation summation = Summation::BoundaryExcluded;
  bool demean = true;  // subtract the mean of the included coefficients
};

struct CorrelationOptions {
  MomentOptions moments{};
  EffectiveSize effective_size = EffectiveSize::DwtEquivalent;
  double coverage = 0.95;
};

struct ScaleVariance {
  int level;
  double nu2;
  std::size_t count;  // M_j, or N in full-circular mode
  bool demeaned;
};

struct ConfidenceInterval {
  double lo;
  double hi;
  bool degenerate;  // |rho| = 1, point interval
};

struct ScaleCorrelation {
  int level;         // J for the low-frequency entry
  bool lowfreq = false;
  double rho = 0.0;
  double gamma = 0.0;
  double ci_lo = -1.0;
  double ci_hi = 1.0;
  double n_eff = 0.0;
  std::size_t count = 0;
  bool ci_defined = false;  // false when n_eff < 4; bounds are then [-1, 1]
  bool degenerate = false;
};

struct HomogeneityVerdict {
  struct PairTest {
    int first;
    int second;
    double z;
    double p_value;
    double p_adjusted;  // Bonferroni
  };
  std::vector<int> levels;
  std::vector<PairTest> pairs;
  double alpha = 0.05;
  bool reject = false;
};

namespace detail {

struct CoefficientRange {
  std::size_t begin;
  std::size_t count;
};

inline CoefficientRange coefficient_range(const ModwtDecomposition& d, int level, Summation mode) {
  const auto counts = d.boundary(level);
  if (mode == Summation::FullCircular) return {0, d.size()};
  require(counts.unaffected >= 2, ErrorCode::InsufficientCoefficients,
          "level " + std::to_string(level) + " has M_j = " + std::to_string(counts.unaffected) + " < 2");
  return {counts.width - 1, static_cast<std::size_t>(counts.unaffected)};
}

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double cross_moment(std::span<const double> a, std::span<const double> b, bool demean) {
  const double ma = demean ? mean_of(a) : 0.0;
  const double mb = demean ? mean_of(b) : 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size());
}

inline void check_compatible(const ModwtDecomposition& dx, const ModwtDecomposition& dy) {
  require(dx.size() == dy.size() && dx.levels() == dy.levels() && dx.family() == dy.family(),
          ErrorCode::ShapeMismatch, "decompositions differ in length, depth or filter");
}

inline double clamp_unit(double rho) {
  // Overshoot beyond [-1, 1] can only come from rounding.
  return std::clamp(rho, -1.0, 1.0);
}

inline double fisher_z(double rho) {
  constexpr double kEdge = 1.0 - 1e-15;
  return std::atanh(std::clamp(rho, -kEdge, kEdge));
}

}  // namespace detail

inline ScaleVariance wavelet_variance(const ModwtDecomposition& d, int level, MomentOptions opts = {}) {
  const auto range = detail::coefficient_range(d, level, opts.summation);
  const auto w = d.wavelet(level).subspan(range.begin, range.count);
  return {level, detail::cross_moment(w, w, opts.demean), range.count, opts.demean};
}

inline double wavelet_covariance(const ModwtDecomposition& dx, const ModwtDecomposition& dy, int level,
                                 MomentOptions opts = {}) {
  detail::check_compatible(dx, dy);
  const auto range = detail::coefficient_range(dx, level, opts.summation);
  return detail::cross_moment(dx.wavelet(level).subspan(range.begin, range.count),
                              dy.wavelet(level).subspan(range.begin, range.count), opts.demean);
}

/// sum over lags of rho(tau)^2, where rho is the autocorrelation of level-j
/// wavelet (or, with `scaling`, level-J scaling) coefficients of white noise.
inline double filter_dependence(FilterFamily family, int level, bool scaling = false) {
  const auto f = make_filter(family);
  const auto width = boundary_counts(level, f.length(), 1).width;
  std::size_t n = 2;
  while (n < 2 * static_cast<std::size_t>(width)) n *= 2;
  std::vector<double> impulse(n, 0.0);
  impulse[0] = 1.0;
  const auto d = modwt(impulse, f, level, InteriorCheck::Skip);
  const auto h = scaling ? d.scaling() : d.wavelet(level);
  std::vector<double> acf(n, 0.0);
  for (std::size_t lag = 0; lag < n; ++lag)
    for (std::size_t t = 0; t + lag < n; ++t) acf[lag] += h[t] * h[t + lag];
  double total = 1.0;
  for (std::size_t lag = 1; lag < n; ++lag) total += 2.0 * (acf[lag] / acf[0]) * (acf[lag] / acf[0]);
  return total;
}

inline double effective_size(std::size_t count, int level, EffectiveSize convention,
                             FilterFamily family = FilterFamily::LA8, bool scaling = false) {
  const double m = static_cast<double>(count);
  switch (convention) {
    case EffectiveSize::DwtEquivalent:
      return m / std::ldexp(1.0, level);
    case EffectiveSize::Coefficients:
      return m;
    case EffectiveSize::FilterAdjusted:
      return m / filter_dependence(family, level, scaling);
  }
  return m;
}

/// Fisher-z interval tanh(atanh(rho) -/+ z_{(1+coverage)/2} / sqrt(n_eff - 3)).
inline ConfidenceInterval correlation_ci(double rho, double n_eff, double coverage = 0.95) {
  require(n_eff >= 4.0, ErrorCode::InvalidArgument, "correlation_ci requires n_eff >= 4");
  require(coverage > 0.0 && coverage < 1.0, ErrorCode::InvalidArgument, "coverage must lie in (0, 1)");
  require(std::abs(rho) <= 1.0, ErrorCode::InvalidArgument, "correlation outside [-1, 1]");
  if (std::abs(rho) >= 1.0 - 1e-12) {
    const double edge = rho > 0 ? 1.0 : -1.0;
    return {edge, edge, true};
  }
  const boost::math::normal standard;
  const double zcrit = boost::math::quantile(standard, 0.5 + coverage / 2.0);
  const double half = zcrit / std::sqrt(n_eff - 3.0);
  const double z = std::atanh(rho);
  return {std::tanh(z - half), std::tanh(z + half), false};
}

namespace detail {

inline ScaleCorrelation finish_correlation(int level, bool lowfreq, double gamma, double vx, double vy,
                                           std::size_t count, FilterFamily family, const CorrelationOptions& opts) {
  require(vx > 0.0 && vy > 0.0, ErrorCode::DegenerateVariance,
          "zero variance at level " + std::to_string(level));
  ScaleCorrelation out;
  out.level = level;
  out.lowfreq = lowfreq;
  out.gamma = gamma;
  out.rho = clamp_unit(gamma / (std::sqrt(vx) * std::sqrt(vy)));
  out.count = count;
  out.n_eff = effective_size(count, level, opts.effective_size, family, lowfreq);
  if (out.n_eff >= 4.0) {
    const auto ci = correlation_ci(out.rho, out.n_eff, opts.coverage);
    out.ci_lo = std::min(ci.lo, out.rho);
    out.ci_hi = std::max(ci.hi, out.rho);
    out.degenerate = ci.degenerate;
    out.ci_defined = true;
  }
  return out;
}

}  // namespace detail

inline ScaleCorrelation wavelet_correlation(const ModwtDecomposition& dx, const ModwtDecomposition& dy,
                                            int level, const CorrelationOptions& opts = {}) {
  detail::check_compatible(dx, dy);
  const auto range = detail::coefficient_range(dx, level, opts.moments.summation);
  const auto wx = dx.wavelet(level).subspan(range.begin, range.count);
  const auto wy = dy.wavelet(level).subspan(range.begin, range.count);
  const bool demean = opts.moments.demean;
  return detail::finish_correlation(level, false, detail::cross_moment(wx, wy, demean),
                                    detail::cross_moment(wx, wx, demean), detail::cross_moment(wy, wy, demean),
                                    range.count, dx.family(), opts);
}

/// Pearson correlation of the boundary-unaffected scaling coefficients V(J, .).
inline ScaleCorrelation lowfreq_correlation(const ModwtDecomposition& dx, const ModwtDecomposition& dy,
                                            const CorrelationOptions& opts = {}) {
  detail::check_compatible(dx, dy);
  const int deepest = dx.levels();
  const auto range = detail::coefficient_range(dx, deepest, opts.moments.summation);
  const auto vx = dx.scaling().subspan(range.begin, range.count);
  const auto vy = dy.scaling().subspan(range.begin, range.count);
  return detail::finish_correlation(deepest, true, detail::cross_moment(vx, vy, true),
                                    detail::cross_moment(vx, vx, true), detail::cross_moment(vy, vy, true),
                                    range.count, dx.family(), opts);
}

/// Sample variance (1/N normalization) of the scaling coefficients; with
/// full-circular wavelet variances this completes the decomposition of var(x).
inline double scaling_variance(const ModwtDecomposition& d, Summation mode = Summation::FullCircular) {
  const auto range = detail::coefficient_range(d, d.levels(), mode);
  const auto v = d.scaling().subspan(range.begin, range.count);
  return detail::cross_moment(v, v, true);
}

inline double scaling_covariance(const ModwtDecomposition& dx, const ModwtDecomposition& dy,
                                 Summation mode = Summation::FullCircular) {
  detail::check_compatible(dx, dy);
  const auto range = detail::coefficient_range(dx, dx.levels(), mode);
  return detail::cross_moment(dx.scaling().subspan(range.begin, range.count),
                              dy.scaling().subspan(range.begin, range.count), true);
}

/// Pairwise two-sample Fisher-z tests of equal correlation across scales with a
/// Bonferroni adjustment. Low-frequency entries and scales without a defined
/// interval (n_eff < 4) are left out.
inline HomogeneityVerdict homogeneity_test(std::span<const ScaleCorrelation> corrs, double alpha = 0.05) {
  std::vector<const ScaleCorrelation*> usable;
  for (const auto& c : corrs) {
    if (!c.lowfreq && c.n_eff >= 4.0) usable.push_back(&c);
  }
  require(usable.size() >= 2, ErrorCode::TooFewScales, "homogeneity test needs at least two scales");

  HomogeneityVerdict verdict;
  verdict.alpha = alpha;
  for (const auto* c : usable) verdict.levels.push_back(c->level);
  const double tests = static_cast<double>(usable.size() * (usable.size() - 1) / 2);
  for (std::size_t a = 0; a < usable.size(); ++a) {
    for (std::size_t b = a + 1; b < usable.size(); ++b) {
      const auto& ca = *usable[a];
      const auto& cb = *usable[b];
      const double diff = detail::fisher_z(ca.rho) - detail::fisher_z(cb.rho);
      const double se = std::sqrt(1.0 / (ca.n_eff - 3.0) + 1.0 / (cb.n_eff - 3.0));
      const double z = diff / se;
      const double p = std::erfc(std::abs(z) / std::sqrt(2.0));
      const double adjusted = std::min(1.0, p * tests);
      verdict.pairs.push_back({ca.level, cb.level, z, p, adjusted});
      if (adjusted < alpha) verdict.reject = true;
    }
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// Calendar panels

enum class Partition { Year, Month };

struct PanelOptions {
  FilterFamily filter = FilterFamily::LA8;
  int levels = 4;
  CorrelationOptions correlation{};
  double alpha = 0.05;
};

struct PanelCell {
  int year = 0;
  unsigned month = 0;  // 0 in yearly panels
  std::size_t observations = 0;
  std::vector<std::optional<ScaleCorrelation>> scales;  // index j-1
  std::optional<ScaleCorrelation> lowfreq;
  std::optional<HomogeneityVerdict> verdict;
  std::optional<ErrorCode> gap;  // set when the whole cell could not be computed
};

/// Wavelet correlations for one aligned pair of series.
inline PanelCell correlate_cell(std::span<const double> x, std::span<const double> y, const PanelOptions& opts) {
  require(x.size() == y.size(), ErrorCode::ShapeMismatch, "panel series differ in length");
  PanelCell cell;
  cell.observations = x.size();
  cell.scales.assign(static_cast<std::size_t>(opts.levels), std::nullopt);
  if (x.size() < 2) {
    cell.gap = ErrorCode::EmptyCell;
    return cell;
  }
  try {
    const auto filter = make_filter(opts.filter);
    const auto dx = modwt(x, filter, opts.levels);
    const auto dy = modwt(y, filter, opts.levels);
    std::vector<ScaleCorrelation> valid;
    for (int j = 1; j <= opts.levels; ++j) {
      try {
        auto c = wavelet_correlation(dx, dy, j, opts.correlation);
        valid.push_back(c);
        cell.scales[static_cast<std::size_t>(j - 1)] = c;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateVariance) throw;
      }
    }
    try {
      cell.lowfreq = lowfreq_correlation(dx, dy, opts.correlation);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateVariance) throw;
    }
    if (valid.empty() && !cell.lowfreq) cell.gap = ErrorCode::DegenerateVariance;
    try {
      cell.verdict = homogeneity_test(valid, opts.alpha);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TooFewScales) throw;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SeriesTooShort && e.code() != ErrorCode::InsufficientCoefficients) throw;
    cell.gap = e.code();
  }
  return cell;
}

/// One cell per calendar year (or month) between the first and last date,
/// inclusive. Cells without enough data are returned with `gap` set.
inline std::vector<PanelCell> correlation_panel(std::span<const Date> dates, std::span<const double> x,
                                                std::span<const double> y, Partition partition,
                                                const PanelOptions& opts) {
  require(dates.size() == x.size() && x.size() == y.size(), ErrorCode::ShapeMismatch,
          "panel dates and series differ in length");
  std::vector<PanelCell> cells;
  if (dates.empty()) return cells;
  for (std::size_t i = 1; i < dates.size(); ++i) {
    require(to_days(dates[i - 1]) <= to_days(dates[i]), ErrorCode::InvalidArgument,
            "panel dates must be nondecreasing");
  }
  const auto key_of = [partition](Date d) {
    return partition == Partition::Year ? year_of(d) * 12 : year_of(d) * 12 + static_cast<int>(month_of(d)) - 1;
  };
  const int first = key_of(dates.front());
  const int last = key_of(dates.back());
  const int step = partition == Partition::Year ? 12 : 1;
  std::size_t begin = 0;
  for (int key = first; key <= last; key += step) {
    std::size_t end = begin;
    while (end < dates.size() && key_of(dates[end]) == key) ++end;
    PanelCell cell = correlate_cell(x.subspan(begin, end - begin), y.subspan(begin, end - begin), opts);
    cell.year = key / 12;
    cell.month = partition == Partition::Year ? 0u : static_cast<unsigned>(key % 12 + 1);
    cells.push_back(std::move(cell));
    begin = end;
  }
  return cells;
}

inline std::vector<PanelCell> yearly_panel(std::span<const Date> dates, std::span<const double> x,
                                           std::span<const double> y, const PanelOptions& opts) {
  return correlation_panel(dates, x, y, Partition::Year, opts);
}

inline std::vector<PanelCell> monthly_series(std::span<const Date> dates, std::span<const double> x,
                                             std::span<const double> y, const PanelOptions& opts) {
  return correlation_panel(dates, x, y, Partition::Month, opts);
}

}  // namespace wavecorr
