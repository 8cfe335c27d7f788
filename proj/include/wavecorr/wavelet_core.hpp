#pragma once

// Maximal overlap discrete wavelet transform (MODWT) via the pyramid
// algorithm with circular filtering.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wavecorr/error.hpp"

namespace wavecorr {

enum class FilterFamily { Haar, D4, LA8 };

inline std::string to_string(FilterFamily family) {
  switch (family) {
    case FilterFamily::Haar: return "haar";
    case FilterFamily::D4: return "d4";
    case FilterFamily::LA8: return "la8";
  }
  return "unknown";
}

inline FilterFamily parse_filter_family(const std::string& name) {
  if (name == "haar") return FilterFamily::Haar;
  if (name == "d4") return FilterFamily::D4;
  if (name == "la8") return FilterFamily::LA8;
  fail(ErrorCode::InvalidArgument, "unknown wavelet filter '" + name + "'");
}

/// MODWT-normalized filter pair: the orthonormal DWT filters divided by sqrt(2),
/// so sum(g) = 1, sum(h) = 0 and sum(g^2) = sum(h^2) = 1/2.
struct WaveletFilter {
  FilterFamily family;
  std::vector<double> scaling;  // g
  std::vector<double> wavelet;  // h

  std::size_t length() const { return scaling.size(); }
};

namespace detail {

// Orthonormal scaling filters. LA8 is the least-asymmetric Daubechies filter,
// obtained by spectral factorization at 50-digit precision.
inline std::vector<double> orthonormal_scaling(FilterFamily family) {
  switch (family) {
    case FilterFamily::Haar: {
      const double c = 1.0 / std::sqrt(2.0);
      return {c, c};
    }
    case FilterFamily::D4: {
      const double s3 = std::sqrt(3.0);
      const double d = 4.0 * std::sqrt(2.0);
      return {(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d};
    }
    case FilterFamily::LA8:
      return {-0.0757657147895022132277462, -0.02963552764600249176436918,
              0.4976186676327749899796055,  0.8037387518051320808788056,
              0.2978577956053060514029012,  -0.09921954357663353258520801,
              -0.0126039672620313037539161, 0.03222310060405146787161592};
  }
  return {};
}

}  // namespace detail

inline WaveletFilter make_filter(FilterFamily family) {
  WaveletFilter filter{family, detail::orthonormal_scaling(family), {}};
  const std::size_t len = filter.scaling.size();
  const double norm = 1.0 / std::sqrt(2.0);
  for (double& g : filter.scaling) g *= norm;
  // Quadrature mirror: h[l] = (-1)^l g[L-1-l].
  filter.wavelet.resize(len);
  for (std::size_t l = 0; l < len; ++l) {
    const double sign = (l % 2 == 0) ? 1.0 : -1.0;
    filter.wavelet[l] = sign * filter.scaling[len - 1 - l];
  }
  return filter;
}

/// Width of the level-j equivalent filter and the number of coefficients whose
/// support lies entirely inside a sample of length n.
struct BoundaryCounts {
  std::size_t width;        // L_j
  std::ptrdiff_t unaffected;  // M_j, may be <= 0
};

inline BoundaryCounts boundary_counts(int level, std::size_t filter_length, std::size_t n) {
  require(level >= 1 && filter_length >= 2, ErrorCode::InvalidArgument,
          "boundary_counts requires level >= 1 and filter length >= 2");
  const std::size_t width = ((std::size_t{1} << level) - 1) * (filter_length - 1) + 1;
  return {width, static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(width) + 1};
}

/// Deepest level permitted for a series of length n: floor(log2(n)).
inline int max_level(std::size_t n) {
  int level = 0;
  while ((std::size_t{2} << level) <= n) ++level;
  return level;
}

/// Wavelet coefficient vectors W(1..J) and scaling coefficients V(J), all of the
/// input's length. Immutable once built.
class ModwtDecomposition {
 public:
  ModwtDecomposition(WaveletFilter filter, std::vector<std::vector<double>> wavelet,
                     std::vector<double> scaling)
      : filter_(std::move(filter)), wavelet_(std::move(wavelet)), scaling_(std::move(scaling)) {
    require(!wavelet_.empty(), ErrorCode::MalformedDecomposition,
            "decomposition needs at least one wavelet level");
    for (const auto& w : wavelet_) {
      require(w.size() == scaling_.size(), ErrorCode::MalformedDecomposition,
              "coefficient vectors differ in length");
    }
    require(!scaling_.empty(), ErrorCode::MalformedDecomposition, "empty decomposition");
  }

  std::size_t size() const { return scaling_.size(); }
  int levels() const { return static_cast<int>(wavelet_.size()); }
  const WaveletFilter& filter() const { return filter_; }
  FilterFamily family() const { return filter_.family; }

  /// Level j wavelet coefficients, 1 <= j <= levels().
  std::span<const double> wavelet(int level) const {
    require(level >= 1 && level <= levels(), ErrorCode::IndexOutOfRange,
            "wavelet level " + std::to_string(level) + " outside 1.." + std::to_string(levels()));
    return wavelet_[static_cast<std::size_t>(level - 1)];
  }

  /// Scaling coefficients at the deepest level.
  std::span<const double> scaling() const { return scaling_; }

  BoundaryCounts boundary(int level) const {
    return boundary_counts(level, filter_.length(), size());
  }

  /// Copy of the coefficient storage, for callers that build modified
  /// decompositions (e.g. zeroing levels before reconstruction).
  std::vector<std::vector<double>> wavelet_copy() const { return wavelet_; }
  std::vector<double> scaling_copy() const { return scaling_; }

 private:
  WaveletFilter filter_;
  std::vector<std::vector<double>> wavelet_;
  std::vector<double> scaling_;
};

namespace detail {

// One pyramid stage: circular filtering of v with filters upsampled by 2^(j-1).
inline void modwt_step(std::span<const double> v, const WaveletFilter& f, std::size_t stride,
                       std::vector<double>& w_out, std::vector<double>& v_out) {
  const std::size_t n = v.size();
  const std::size_t len = f.length();
  const std::size_t back = stride % n;
  w_out.assign(n, 0.0);
  v_out.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double w = 0.0;
    double s = 0.0;
    std::size_t k = t;
    for (std::size_t l = 0; l < len; ++l) {
      w += f.wavelet[l] * v[k];
      s += f.scaling[l] * v[k];
      k = (k >= back) ? k - back : k + n - back;
    }
    w_out[t] = w;
    v_out[t] = s;
  }
}

inline void imodwt_step(std::span<const double> w, std::span<const double> v, const WaveletFilter& f,
                        std::size_t stride, std::vector<double>& out) {
  const std::size_t n = v.size();
  const std::size_t len = f.length();
  const std::size_t ahead = stride % n;
  out.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    std::size_t k = t;
    for (std::size_t l = 0; l < len; ++l) {
      acc += f.wavelet[l] * w[k] + f.scaling[l] * v[k];
      k = (k + ahead < n) ? k + ahead : k + ahead - n;
    }
    out[t] = acc;
  }
}

}  // namespace detail

/// Whether modwt() insists on at least two boundary-unaffected coefficients at
/// the deepest level. The transform itself is defined for any depth up to
/// floor(log2(n)); the moment estimators are not.
enum class InteriorCheck { Require, Skip };

inline ModwtDecomposition modwt(std::span<const double> x, const WaveletFilter& filter, int levels,
                                InteriorCheck check = InteriorCheck::Require) {
  const std::size_t n = x.size();
  require(n >= 2, ErrorCode::SeriesTooShort, "MODWT needs at least 2 observations");
  require(levels >= 1, ErrorCode::InvalidArgument, "MODWT depth must be >= 1");
  require(levels <= max_level(n), ErrorCode::SeriesTooShort,
          "depth " + std::to_string(levels) + " exceeds floor(log2(" + std::to_string(n) + "))");
  const auto deepest = boundary_counts(levels, filter.length(), n);
  require(check == InteriorCheck::Skip || deepest.unaffected >= 2, ErrorCode::SeriesTooShort,
          "only " + std::to_string(deepest.unaffected) + " boundary-unaffected coefficients at level " +
              std::to_string(levels) + " for n = " + std::to_string(n));
  for (double value : x) {
    require(std::isfinite(value), ErrorCode::NonFiniteInput, "MODWT input contains non-finite values");
  }

  std::vector<std::vector<double>> wavelet(static_cast<std::size_t>(levels));
  std::vector<double> current(x.begin(), x.end());
  std::vector<double> next;
  for (int j = 1; j <= levels; ++j) {
    detail::modwt_step(current, filter, std::size_t{1} << (j - 1), wavelet[static_cast<std::size_t>(j - 1)],
                       next);
    current.swap(next);
  }
  return ModwtDecomposition(filter, std::move(wavelet), std::move(current));
}

inline std::vector<double> imodwt(const ModwtDecomposition& d) {
  const auto& filter = d.filter();
  std::vector<double> current = d.scaling_copy();
  std::vector<double> previous;
  for (int j = d.levels(); j >= 1; --j) {
    detail::imodwt_step(d.wavelet(j), current, filter, std::size_t{1} << (j - 1), previous);
    current.swap(previous);
  }
  return current;
}

/// Period band [2^j dt, 2^(j+1) dt] covered by level j.
struct HorizonBand {
  std::chrono::duration<double> shortest;
  std::chrono::duration<double> longest;
};

inline HorizonBand scale_to_horizon(int level, std::chrono::duration<double> step) {
  require(level >= 1 && step.count() > 0.0, ErrorCode::InvalidArgument,
          "scale_to_horizon requires level >= 1 and a positive sampling step");
  const double lo = std::ldexp(1.0, level);
  return {step * lo, step * (2.0 * lo)};
}

/// Short column label for level j, e.g. "10min" for 5-minute data or "2d" for daily.
inline std::string horizon_label(int level, std::chrono::duration<double> step) {
  const double seconds = scale_to_horizon(level, step).shortest.count();
  const auto whole = [](double v) { return std::to_string(static_cast<long long>(std::llround(v))); };
  if (std::fmod(seconds, 86400.0) == 0.0) return whole(seconds / 86400.0) + "d";
  if (std::fmod(seconds, 60.0) == 0.0) return whole(seconds / 60.0) + "min";
  return whole(seconds) + "s";
}

}  // namespace wavecorr
