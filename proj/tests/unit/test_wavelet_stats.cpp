#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "wavecorr/synthgen.hpp"
#include "wavecorr/wavelet_stats.hpp"

using namespace wavecorr;

namespace {

struct Pair {
  std::vector<double> x;
  std::vector<double> y;
};

Pair correlated_noise(std::size_t n, double rho, std::mt19937_64& gen) {
  auto a = oracle::gaussian(n, gen);
  auto b = oracle::gaussian(n, gen);
  Pair p{a, std::vector<double>(n)};
  for (std::size_t t = 0; t < n; ++t) p.y[t] = rho * a[t] + std::sqrt(1 - rho * rho) * b[t];
  return p;
}

double sample_var(const std::vector<double>& v) {
  const double m = oracle::sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

double sample_cov(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = oracle::sample_mean(a);
  const double mb = oracle::sample_mean(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size());
}

double within_mc(const std::vector<double>& draws, double truth) {
  const double se = oracle::sample_sd(draws) / std::sqrt(static_cast<double>(draws.size()));
  return std::abs(oracle::sample_mean(draws) - truth) / se;
}

}  // namespace

TEST(WaveletVariance, ZeroCoefficientsGiveZero) {
  std::vector<double> flat(256, 3.25);
  const auto d = modwt(flat, make_filter(FilterFamily::LA8), 3);
  for (int j = 1; j <= 3; ++j) EXPECT_NEAR(wavelet_variance(d, j).nu2, 0.0, 1e-24);
}

TEST(WaveletVariance, MatchesDirectBoundaryExcludedSum) {
  std::mt19937_64 gen(11);
  const auto x = oracle::gaussian(300, gen);
  for (auto fam : {FilterFamily::Haar, FilterFamily::D4, FilterFamily::LA8}) {
    const auto f = make_filter(fam);
    const auto d = modwt(x, f, 3);
    for (int j = 1; j <= 3; ++j) {
      const auto lf = oracle::level_filters(f.wavelet, f.scaling, j);
      const auto w = oracle::circular_filter(lf.wavelet, x);
      const std::size_t lj = (std::size_t{1} << j) * (f.length() - 1) - (f.length() - 1) + 1;
      std::vector<double> kept(w.begin() + static_cast<long>(lj - 1), w.end());
      const auto v = wavelet_variance(d, j, {Summation::BoundaryExcluded, false});
      ASSERT_EQ(v.count, kept.size());
      double ss = 0.0;
      for (double c : kept) ss += c * c;
      EXPECT_NEAR(v.nu2, ss / static_cast<double>(kept.size()), 1e-12);
      EXPECT_NEAR(wavelet_variance(d, j).nu2, sample_var(kept), 1e-12);
    }
  }
}

TEST(WaveletVariance, WhiteNoiseHalvesPerLevel) {
  std::mt19937_64 gen(2024);
  const auto f = make_filter(FilterFamily::LA8);
  std::vector<std::vector<double>> draws(4);
  for (int rep = 0; rep < 200; ++rep) {
    const auto x = oracle::gaussian(std::size_t{1} << 16, gen);
    const auto d = modwt(x, f, 4);
    for (int j = 1; j <= 4; ++j) draws[static_cast<std::size_t>(j - 1)].push_back(wavelet_variance(d, j).nu2);
  }
  for (int j = 1; j <= 4; ++j) EXPECT_LT(within_mc(draws[static_cast<std::size_t>(j - 1)], std::ldexp(1.0, -j)), 3.0) << j;
}

TEST(WaveletVariance, ScaleDecompositionOfVariance) {
  std::mt19937_64 gen(5);
  for (auto fam : {FilterFamily::Haar, FilterFamily::D4, FilterFamily::LA8}) {
    auto x = oracle::gaussian(1024, gen);
    for (std::size_t t = 1; t < x.size(); ++t) x[t] += 0.3 * x[t - 1];
    const auto d = modwt(x, make_filter(fam), 5);
    double full = scaling_variance(d, Summation::FullCircular);
    double excluded = scaling_variance(d, Summation::BoundaryExcluded);
    for (int j = 1; j <= 5; ++j) {
      full += wavelet_variance(d, j, {Summation::FullCircular, true}).nu2;
      excluded += wavelet_variance(d, j).nu2;
    }
    EXPECT_NEAR(full, sample_var(x), 1e-8);
    // Only approximate once boundary coefficients are dropped.
    EXPECT_NEAR(excluded / sample_var(x), 1.0, 0.25);
  }
}

TEST(WaveletCovariance, SelfCovarianceIsVariance) {
  std::mt19937_64 gen(3);
  const auto x = oracle::gaussian(512, gen);
  const auto d = modwt(x, make_filter(FilterFamily::D4), 4);
  for (int j = 1; j <= 4; ++j) EXPECT_EQ(wavelet_covariance(d, d, j), wavelet_variance(d, j).nu2);
}

TEST(WaveletCovariance, IndependentNoiseNearZero) {
  std::mt19937_64 gen(17);
  const auto f = make_filter(FilterFamily::LA8);
  std::vector<std::vector<double>> draws(4);
  for (int rep = 0; rep < 200; ++rep) {
    const auto p = correlated_noise(4096, 0.0, gen);
    const auto dx = modwt(p.x, f, 4);
    const auto dy = modwt(p.y, f, 4);
    for (int j = 1; j <= 4; ++j) draws[static_cast<std::size_t>(j - 1)].push_back(wavelet_covariance(dx, dy, j));
  }
  for (const auto& d : draws) EXPECT_LT(within_mc(d, 0.0), 3.0);
}

TEST(WaveletCovariance, ScaleDecompositionOfCovariance) {
  std::mt19937_64 gen(23);
  for (auto fam : {FilterFamily::Haar, FilterFamily::LA8}) {
    const auto p = correlated_noise(2048, 0.6, gen);
    const auto dx = modwt(p.x, make_filter(fam), 6);
    const auto dy = modwt(p.y, make_filter(fam), 6);
    double total = scaling_covariance(dx, dy);
    for (int j = 1; j <= 6; ++j) total += wavelet_covariance(dx, dy, j, {Summation::FullCircular, true});
    EXPECT_NEAR(total, sample_cov(p.x, p.y), 1e-8);
  }
}

TEST(WaveletCovariance, ShapeMismatchAndShortLevels) {
  std::mt19937_64 gen(1);
  const auto x = oracle::gaussian(256, gen);
  const auto d1 = modwt(x, make_filter(FilterFamily::LA8), 2);
  const auto d2 = modwt(x, make_filter(FilterFamily::Haar), 2);
  const std::vector<double> shorter(x.begin(), x.begin() + 128);
  const auto d3 = modwt(shorter, make_filter(FilterFamily::LA8), 2);
  try {
    (void)wavelet_covariance(d1, d2, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  EXPECT_THROW((void)wavelet_covariance(d1, d3, 1), Error);
  // 64 points at level 4 with LA8: L_4 = 106 > 64.
  const std::vector<double> tiny(x.begin(), x.begin() + 64);
  const auto d4 = modwt(tiny, make_filter(FilterFamily::LA8), 4, InteriorCheck::Skip);
  try {
    (void)wavelet_variance(d4, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientCoefficients);
  }
}

TEST(WaveletCorrelation, PerfectAndInverse) {
  std::mt19937_64 gen(8);
  const auto x = oracle::gaussian(1000, gen);
  std::vector<double> neg(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) neg[t] = -x[t];
  const auto f = make_filter(FilterFamily::LA8);
  const auto dx = modwt(x, f, 4);
  const auto dn = modwt(neg, f, 4);
  for (int j = 1; j <= 4; ++j) {
    const auto same = wavelet_correlation(dx, dx, j);
    EXPECT_DOUBLE_EQ(same.rho, 1.0);
    EXPECT_TRUE(same.degenerate);
    EXPECT_DOUBLE_EQ(same.ci_lo, 1.0);
    EXPECT_DOUBLE_EQ(wavelet_correlation(dx, dn, j).rho, -1.0);
  }
  EXPECT_DOUBLE_EQ(lowfreq_correlation(dx, dx).rho, 1.0);
}

TEST(WaveletCorrelation, EquicorrelatedWhiteNoise) {
  std::mt19937_64 gen(99);
  const auto f = make_filter(FilterFamily::LA8);
  std::vector<std::vector<double>> draws(4);
  for (int rep = 0; rep < 200; ++rep) {
    const auto p = correlated_noise(std::size_t{1} << 16, 0.5, gen);
    const auto dx = modwt(p.x, f, 4);
    const auto dy = modwt(p.y, f, 4);
    for (int j = 1; j <= 4; ++j) draws[static_cast<std::size_t>(j - 1)].push_back(wavelet_correlation(dx, dy, j).rho);
  }
  // Fisher-z bias of order rho(1-rho^2)/(2n) is far below the MC error here.
  for (const auto& d : draws) EXPECT_LT(within_mc(d, 0.5), 3.0);
}

TEST(WaveletCorrelation, ZeroVarianceIsDegenerate) {
  std::mt19937_64 gen(4);
  const auto x = oracle::gaussian(256, gen);
  const std::vector<double> flat(256, 1.0);
  const auto f = make_filter(FilterFamily::Haar);
  try {
    (void)wavelet_correlation(modwt(x, f, 2), modwt(flat, f, 2), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateVariance);
  }
}

TEST(WaveletCorrelation, AffineInvarianceAndSymmetry) {
  std::mt19937_64 gen(31);
  const auto p = correlated_noise(2000, 0.3, gen);
  std::vector<double> xs(p.x.size());
  std::vector<double> ys(p.y.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    xs[t] = 250.0 * p.x[t] + 17.0;
    ys[t] = 0.003 * p.y[t] - 4.0;
  }
  for (auto fam : {FilterFamily::Haar, FilterFamily::D4, FilterFamily::LA8}) {
    const auto f = make_filter(fam);
    const auto dx = modwt(p.x, f, 4);
    const auto dy = modwt(p.y, f, 4);
    const auto sx = modwt(xs, f, 4);
    const auto sy = modwt(ys, f, 4);
    for (int j = 1; j <= 4; ++j) {
      const double r = wavelet_correlation(dx, dy, j).rho;
      EXPECT_NEAR(wavelet_correlation(sx, sy, j).rho, r, 1e-10);
      EXPECT_EQ(wavelet_correlation(dy, dx, j).rho, r);
      const double g = wavelet_covariance(dx, dy, j);
      EXPECT_LE(g * g, wavelet_variance(dx, j).nu2 * wavelet_variance(dy, j).nu2);
      const auto c = wavelet_correlation(dx, dy, j);
      EXPECT_LE(c.ci_lo, c.rho);
      EXPECT_GE(c.ci_hi, c.rho);
      EXPECT_GE(c.ci_lo, -1.0);
      EXPECT_LE(c.ci_hi, 1.0);
    }
    EXPECT_NEAR(lowfreq_correlation(sx, sy).rho, lowfreq_correlation(dx, dy).rho, 1e-10);
  }
}

TEST(LowfreqCorrelation, RandomWalksStayBounded) {
  std::mt19937_64 gen(77);
  const auto f = make_filter(FilterFamily::LA8);
  double widest = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    auto a = oracle::gaussian(1024, gen);
    auto b = oracle::gaussian(1024, gen);
    for (std::size_t t = 1; t < a.size(); ++t) {
      a[t] += a[t - 1];
      b[t] += b[t - 1];
    }
    const double r = lowfreq_correlation(modwt(a, f, 4), modwt(b, f, 4)).rho;
    ASSERT_LE(std::abs(r), 1.0);
    widest = std::max(widest, std::abs(r));
  }
  EXPECT_GT(widest, 0.5);
}

TEST(LowfreqCorrelation, CommonSlowCycleDominates) {
  std::mt19937_64 gen(41);
  const std::size_t n = 4096;
  auto x = oracle::gaussian(n, gen);
  auto y = oracle::gaussian(n, gen);
  for (std::size_t t = 0; t < n; ++t) {
    const double slow = 3.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 512.0);
    x[t] += slow;
    y[t] += slow;
  }
  const auto f = make_filter(FilterFamily::LA8);
  const auto dx = modwt(x, f, 4);
  const auto dy = modwt(y, f, 4);
  EXPECT_GT(lowfreq_correlation(dx, dy).rho, wavelet_correlation(dx, dy, 1).rho + 0.5);
}

TEST(CorrelationCi, HalfWidthAnchors) {
  const auto one_year = correlation_ci(0.0, 19500);
  EXPECT_NEAR(one_year.hi, std::tanh(1.959963984540054 / std::sqrt(19497.0)), 1e-12);
  EXPECT_NEAR(one_year.hi, 0.0140, 0.00005);
  EXPECT_NEAR(one_year.lo, -one_year.hi, 1e-15);
  const auto last = correlation_ci(0.0, 2437);
  EXPECT_NEAR(last.hi, 0.0397, 0.00005);
  const auto edge = correlation_ci(0.9999999999999, 100);
  EXPECT_TRUE(edge.degenerate);
  EXPECT_EQ(edge.lo, 1.0);
  EXPECT_EQ(edge.hi, 1.0);
  const auto asym = correlation_ci(0.7, 50);
  EXPECT_NEAR(std::atanh(asym.hi) - std::atanh(0.7), std::atanh(0.7) - std::atanh(asym.lo), 1e-12);
  EXPECT_THROW((void)correlation_ci(0.1, 3.5), Error);
}

TEST(CorrelationCi, EffectiveSizeConventions) {
  EXPECT_DOUBLE_EQ(effective_size(19493, 4, EffectiveSize::DwtEquivalent), 19493.0 / 16.0);
  EXPECT_DOUBLE_EQ(effective_size(19493, 4, EffectiveSize::Coefficients), 19493.0);
  // Haar level 1 coefficients (x_t - x_{t-1})/2 have lag-1 autocorrelation -1/2.
  EXPECT_NEAR(filter_dependence(FilterFamily::Haar, 1), 1.5, 1e-12);
  EXPECT_NEAR(effective_size(3000, 1, EffectiveSize::FilterAdjusted, FilterFamily::Haar), 2000.0, 1e-9);
}

TEST(CorrelationCi, WhiteNoiseCoverage) {
  std::mt19937_64 gen(606);
  const auto f = make_filter(FilterFamily::LA8);
  CorrelationOptions adjusted;
  adjusted.effective_size = EffectiveSize::FilterAdjusted;
  const int reps = 500;
  const double band = 3.0 * std::sqrt(0.95 * 0.05 / reps);
  for (double rho : {0.0, 0.5, 0.9}) {
    std::vector<int> hits(4, 0);
    for (int rep = 0; rep < reps; ++rep) {
      const auto p = correlated_noise(4096, rho, gen);
      const auto dx = modwt(p.x, f, 4);
      const auto dy = modwt(p.y, f, 4);
      for (int j = 1; j <= 4; ++j) {
        const auto c = wavelet_correlation(dx, dy, j, adjusted);
        if (c.ci_lo <= rho && rho <= c.ci_hi) ++hits[static_cast<std::size_t>(j - 1)];
      }
    }
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(hits[static_cast<std::size_t>(j)] / double(reps), 0.95, band) << rho << " " << j + 1;
  }
}

TEST(Homogeneity, IdenticalCorrelationsPass) {
  std::vector<ScaleCorrelation> c(4);
  for (int j = 0; j < 4; ++j) {
    c[static_cast<std::size_t>(j)].level = j + 1;
    c[static_cast<std::size_t>(j)].rho = 0.42;
    c[static_cast<std::size_t>(j)].n_eff = 5000;
  }
  const auto v = homogeneity_test(c);
  EXPECT_FALSE(v.reject);
  EXPECT_EQ(v.pairs.size(), 6u);
  for (const auto& p : v.pairs) EXPECT_DOUBLE_EQ(p.p_adjusted, 1.0);
}

TEST(Homogeneity, LastScaleJumpRejects) {
  std::vector<ScaleCorrelation> c(4);
  const double rho[] = {0.0, 0.0, 0.0, 0.8};
  for (int j = 0; j < 4; ++j) {
    c[static_cast<std::size_t>(j)].level = j + 1;
    c[static_cast<std::size_t>(j)].rho = rho[j];
    c[static_cast<std::size_t>(j)].n_eff = 5000;
  }
  const auto v = homogeneity_test(c);
  EXPECT_TRUE(v.reject);
  const double expected_z = (0.0 - 0.5 * std::log(1.8 / 0.2)) / std::sqrt(2.0 / 4997.0);
  bool seen = false;
  for (const auto& p : v.pairs) {
    if (p.first == 1 && p.second == 4) {
      EXPECT_NEAR(p.z, expected_z, 1e-9);
      seen = true;
    }
    if (p.second != 4) EXPECT_FALSE(p.p_adjusted < 0.05);
  }
  EXPECT_TRUE(seen);
}

TEST(Homogeneity, TooFewScales) {
  std::vector<ScaleCorrelation> c(1);
  c[0].level = 1;
  c[0].n_eff = 100;
  try {
    (void)homogeneity_test(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewScales);
  }
}

TEST(Homogeneity, SizeUnderEquicorrelation) {
  std::mt19937_64 gen(8080);
  const auto f = make_filter(FilterFamily::LA8);
  const int reps = 500;
  for (auto convention : {EffectiveSize::DwtEquivalent, EffectiveSize::FilterAdjusted}) {
    CorrelationOptions opts;
    opts.effective_size = convention;
    int rejections = 0;
    for (int rep = 0; rep < reps; ++rep) {
      const auto p = correlated_noise(4096, 0.4, gen);
      const auto dx = modwt(p.x, f, 4);
      const auto dy = modwt(p.y, f, 4);
      std::vector<ScaleCorrelation> c;
      for (int j = 1; j <= 4; ++j) c.push_back(wavelet_correlation(dx, dy, j, opts));
      if (homogeneity_test(c).reject) ++rejections;
    }
    EXPECT_LE(rejections / double(reps), 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / reps));
  }
}

namespace {

std::vector<Date> trading_days_for(std::size_t per_year, int first_year, int years) {
  std::vector<Date> dates;
  for (int y = 0; y < years; ++y)
    for (std::size_t i = 0; i < per_year; ++i)
      dates.push_back(from_days(to_days(make_date(first_year + y, 1, 1)) + std::chrono::days{static_cast<int>(i * 360 / per_year)}));
  return dates;
}

}  // namespace

TEST(Panel, IdenticalSeriesGiveUnitCells) {
  std::mt19937_64 gen(12);
  const auto dates = trading_days_for(2000, 2001, 3);
  const auto x = oracle::gaussian(dates.size(), gen);
  PanelOptions opts;
  const auto cells = yearly_panel(dates, x, x, opts);
  ASSERT_EQ(cells.size(), 3u);
  for (const auto& cell : cells) {
    EXPECT_FALSE(cell.gap.has_value());
    for (const auto& s : cell.scales) EXPECT_DOUBLE_EQ(s->rho, 1.0);
    EXPECT_DOUBLE_EQ(cell.lowfreq->rho, 1.0);
    ASSERT_TRUE(cell.verdict.has_value());
    EXPECT_FALSE(cell.verdict->reject);
  }
  const auto months = monthly_series(dates, x, x, opts);
  EXPECT_EQ(months.size(), 36u);
  for (const auto& cell : months)
    for (const auto& s : cell.scales) EXPECT_DOUBLE_EQ(s->rho, 1.0);
}

TEST(Panel, MissingMonthIsGap) {
  std::mt19937_64 gen(13);
  std::vector<Date> dates;
  for (unsigned m : {1u, 2u, 4u})
    for (int k = 0; k < 400; ++k) dates.push_back(make_date(2010, m, 1 + static_cast<unsigned>(k % 28)));
  std::sort(dates.begin(), dates.end());
  const auto p = correlated_noise(dates.size(), 0.3, gen);
  const auto months = monthly_series(dates, p.x, p.y, PanelOptions{});
  ASSERT_EQ(months.size(), 4u);
  EXPECT_EQ(months[2].month, 3u);
  EXPECT_EQ(months[2].gap, ErrorCode::EmptyCell);
  EXPECT_FALSE(months[1].gap.has_value());
  // 60 points cannot support level 4 with LA8.
  const auto tiny = correlate_cell(std::span(p.x).first(60), std::span(p.y).first(60), PanelOptions{});
  EXPECT_EQ(tiny.gap, ErrorCode::SeriesTooShort);
}

TEST(Panel, ScaleDependentYearsReject) {
  const std::size_t per_year = std::size_t{1} << 14;
  const auto dates = trading_days_for(per_year, 2001, 5);
  std::vector<double> x;
  std::vector<double> y;
  const std::vector<double> flat{0.4, 0.4, 0.4, 0.4};
  const std::vector<double> varying{-0.5, 0.0, 0.5, 0.8};
  for (int year = 0; year < 5; ++year) {
    const bool dependent = year == 2 || year == 3;
    const auto pair = gen_scale_dependent_pair(per_year, dependent ? varying : flat, FilterFamily::LA8, 9,
                                               static_cast<std::uint64_t>(year));
    x.insert(x.end(), pair.x.begin(), pair.x.end());
    y.insert(y.end(), pair.y.begin(), pair.y.end());
  }
  const auto cells = yearly_panel(dates, x, y, PanelOptions{});
  ASSERT_EQ(cells.size(), 5u);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    ASSERT_TRUE(cells[i].verdict.has_value());
    EXPECT_EQ(cells[i].verdict->reject, i == 2 || i == 3) << cells[i].year;
  }
}

TEST(Panel, MonthlyStepFollowsCorrelationShift) {
  std::mt19937_64 gen(21);
  std::vector<Date> dates;
  for (unsigned m = 1; m <= 12; ++m)
    for (int k = 0; k < 1500; ++k) dates.push_back(make_date(2012, m, 1 + static_cast<unsigned>(k * 28 / 1500)));
  Pair p{std::vector<double>(dates.size()), std::vector<double>(dates.size())};
  for (std::size_t t = 0; t < dates.size(); ++t) {
    const double rho = month_of(dates[t]) >= 7 ? 0.8 : 0.1;
    std::normal_distribution<double> z;
    const double a = z(gen);
    p.x[t] = a;
    p.y[t] = rho * a + std::sqrt(1 - rho * rho) * z(gen);
  }
  const auto months = monthly_series(dates, p.x, p.y, PanelOptions{});
  ASSERT_EQ(months.size(), 12u);
  for (const auto& cell : months) {
    const double r = cell.scales[0]->rho;
    if (cell.month >= 7) EXPECT_GT(r, 0.65);
    else EXPECT_LT(r, 0.3);
  }
}

TEST(Panel, IntradayHorizonLabels) {
  using namespace std::chrono_literals;
  const std::vector<std::string> expected{"10min", "20min", "40min", "80min", "160min"};
  for (int j = 1; j <= 5; ++j) EXPECT_EQ(horizon_label(j, 5min), expected[static_cast<std::size_t>(j - 1)]);
  EXPECT_EQ(horizon_label(1, std::chrono::hours(24)), "2d");
}
