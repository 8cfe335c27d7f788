#pragma once

// Daily realized covariance and correlation from synchronized intraday returns.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wavecorr/calendar.hpp"
#include "wavecorr/error.hpp"

namespace wavecorr {

struct RealizedDay {
  Date day;
  std::size_t m = 0;  // intraday return count
  Eigen::MatrixXd rc;
  Eigen::MatrixXd rcorr;  // NaN where either realized variance is zero

  /// Realized correlation of assets i and k, empty when undefined.
  std::optional<double> correlation(std::size_t i, std::size_t k) const {
    const double v = rcorr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    return std::isnan(v) ? std::nullopt : std::optional<double>(v);
  }
};

/// RC = sum_i r_i r_i' over the day's returns; `columns[a]` holds asset a.
inline RealizedDay realized_cov_day(Date day, std::span<const std::vector<double>> columns) {
  require(!columns.empty(), ErrorCode::InvalidArgument, "realized covariance needs at least one asset");
  const std::size_t m = columns.front().size();
  for (const auto& c : columns) {
    require(c.size() == m, ErrorCode::UnsynchronizedInput,
            "intraday return columns differ in length on " + format_date(day));
  }
  require(m >= 2, ErrorCode::TooFewObservations, "fewer than 2 intraday returns on " + format_date(day));
  const auto n = static_cast<Eigen::Index>(columns.size());
  RealizedDay out{day, m, Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k <= i; ++k) {
      const auto& a = columns[static_cast<std::size_t>(i)];
      const auto& b = columns[static_cast<std::size_t>(k)];
      double s = 0.0;
      for (std::size_t t = 0; t < m; ++t) s += a[t] * b[t];
      out.rc(i, k) = s;
      out.rc(k, i) = s;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double denom = std::sqrt(out.rc(i, i)) * std::sqrt(out.rc(k, k));
      if (!(denom > 0.0)) {
        out.rcorr(i, k) = std::numeric_limits<double>::quiet_NaN();
      } else if (i == k) {
        out.rcorr(i, k) = 1.0;
      } else {
        out.rcorr(i, k) = std::clamp(out.rc(i, k) / denom, -1.0, 1.0);
      }
    }
  }
  return out;
}

struct RealizedPoint {
  Date day;
  std::optional<double> rho;  // empty marks a gap
};

inline std::vector<RealizedPoint> realized_corr_series(std::span<const RealizedDay> days, std::size_t i,
                                                       std::size_t k) {
  require(!days.empty(), ErrorCode::InvalidArgument, "no realized days");
  std::vector<RealizedPoint> out;
  out.reserve(days.size());
  for (const auto& d : days) {
    require(i < static_cast<std::size_t>(d.rc.rows()) && k < static_cast<std::size_t>(d.rc.rows()),
            ErrorCode::IndexOutOfRange, "asset index out of range");
    out.push_back({d.day, d.correlation(i, k)});
  }
  return out;
}

/// Splits synchronized intraday returns (rows tagged by day) into per-day RC.
/// Days with fewer than `min_returns` rows are skipped.
inline std::vector<RealizedDay> realized_by_day(std::span<const Date> days,
                                                std::span<const std::vector<double>> columns,
                                                std::size_t min_returns = 2) {
  for (const auto& c : columns) {
    require(c.size() == days.size(), ErrorCode::UnsynchronizedInput, "return columns and day tags differ in length");
  }
  std::vector<RealizedDay> out;
  std::size_t begin = 0;
  while (begin < days.size()) {
    std::size_t end = begin;
    while (end < days.size() && days[end] == days[begin]) ++end;
    if (end - begin >= std::max<std::size_t>(min_returns, 2)) {
      std::vector<std::vector<double>> slice;
      for (const auto& c : columns)
        slice.emplace_back(c.begin() + static_cast<long>(begin), c.begin() + static_cast<long>(end));
      out.push_back(realized_cov_day(days[begin], slice));
    }
    begin = end;
  }
  return out;
}

}  // namespace wavecorr
