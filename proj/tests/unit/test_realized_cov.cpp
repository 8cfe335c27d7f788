#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "wavecorr/realized_cov.hpp"

using namespace wavecorr;

namespace {

const Date kDay = make_date(2011, 6, 15);

std::vector<std::vector<double>> noise_day(std::size_t m, double rho, std::mt19937_64& gen) {
  auto a = oracle::gaussian(m, gen, 0.001);
  auto b = oracle::gaussian(m, gen, 0.001);
  for (std::size_t t = 0; t < m; ++t) b[t] = rho * a[t] + std::sqrt(1 - rho * rho) * b[t];
  return {a, b};
}

}  // namespace

TEST(RealizedCov, MatchesMatrixProduct) {
  std::mt19937_64 gen(1);
  std::vector<std::vector<double>> cols{oracle::gaussian(78, gen), oracle::gaussian(78, gen), oracle::gaussian(78, gen)};
  Eigen::MatrixXd x(78, 3);
  for (int k = 0; k < 3; ++k)
    for (int t = 0; t < 78; ++t) x(t, k) = cols[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)];
  const Eigen::MatrixXd expected = x.transpose() * x;
  const auto d = realized_cov_day(kDay, cols);
  EXPECT_EQ(d.m, 78u);
  EXPECT_LT((d.rc - expected).cwiseAbs().maxCoeff(), 1e-12);
  for (int k = 0; k < 3; ++k) {
    double ss = 0.0;
    for (double v : cols[static_cast<std::size_t>(k)]) ss += v * v;
    EXPECT_EQ(d.rc(k, k), ss);
    EXPECT_EQ(d.rcorr(k, k), 1.0);
  }
  const double trace = d.rc.trace();
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(d.rc).eigenvalues().minCoeff(), -1e-12 * trace);
  EXPECT_NEAR(*d.correlation(0, 1), expected(0, 1) / std::sqrt(expected(0, 0) * expected(1, 1)), 1e-12);
}

TEST(RealizedCov, PermutationAndScaling) {
  std::mt19937_64 gen(2);
  auto cols = noise_day(390, 0.4, gen);
  const auto base = realized_cov_day(kDay, cols);
  auto shuffled = cols;
  std::vector<std::size_t> idx(390);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), gen);
  for (std::size_t t = 0; t < 390; ++t) {
    shuffled[0][t] = cols[0][idx[t]];
    shuffled[1][t] = cols[1][idx[t]];
  }
  const auto perm = realized_cov_day(kDay, shuffled);
  EXPECT_LT((perm.rc - base.rc).cwiseAbs().maxCoeff(), 1e-15 * base.rc.cwiseAbs().maxCoeff() * 390);
  auto scaled = cols;
  for (auto& v : scaled[0]) v *= 4.0;  // power of two keeps the products exact
  EXPECT_EQ(realized_cov_day(kDay, scaled).rc(0, 1), 4.0 * base.rc(0, 1));
  for (auto& v : scaled[0]) v *= 0.75;
  EXPECT_NEAR(realized_cov_day(kDay, scaled).rc(0, 1), 3.0 * base.rc(0, 1), 1e-15);
}

TEST(RealizedCov, ConstantPricesAndIdenticalColumns) {
  const std::vector<std::vector<double>> flat{std::vector<double>(78, 0.0), std::vector<double>(78, 0.0)};
  const auto d = realized_cov_day(kDay, flat);
  EXPECT_EQ(d.rc.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_FALSE(d.correlation(0, 1).has_value());
  std::mt19937_64 gen(3);
  const auto a = oracle::gaussian(78, gen);
  const std::vector<std::vector<double>> same{a, a};
  EXPECT_EQ(*realized_cov_day(kDay, same).correlation(0, 1), 1.0);
}

TEST(RealizedCov, Errors) {
  const std::vector<std::vector<double>> one_row{{0.1}, {0.2}};
  try {
    (void)realized_cov_day(kDay, one_row);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewObservations);
  }
  const std::vector<std::vector<double>> ragged{{0.1, 0.2, 0.3}, {0.2, 0.1}};
  try {
    (void)realized_cov_day(kDay, ragged);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsynchronizedInput);
  }
}

TEST(RealizedCov, ErrorShrinksWithSamplingFrequency) {
  // Euler paths on a 7800-step day with a U-shaped volatility pattern; the
  // truth is the integrated covariance over the fine grid.
  std::mt19937_64 gen(4);
  const std::size_t fine = 7800;
  const double rho = 0.6;
  std::vector<double> sigma(fine);
  double truth = 0.0;
  for (std::size_t s = 0; s < fine; ++s) {
    const double u = static_cast<double>(s) / fine;
    sigma[s] = 0.01 * (1.0 + 2.0 * (u - 0.5) * (u - 0.5)) / std::sqrt(static_cast<double>(fine));
    truth += rho * sigma[s] * sigma[s];
  }
  std::normal_distribution<double> z;
  const std::vector<std::size_t> ms{39, 78, 390};
  std::vector<std::vector<double>> errors(ms.size());
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> px(fine + 1, 0.0);
    std::vector<double> py(fine + 1, 0.0);
    for (std::size_t s = 0; s < fine; ++s) {
      const double a = z(gen);
      const double b = rho * a + std::sqrt(1 - rho * rho) * z(gen);
      px[s + 1] = px[s] + sigma[s] * a;
      py[s + 1] = py[s] + sigma[s] * b;
    }
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const std::size_t stride = fine / ms[i];
      std::vector<std::vector<double>> cols(2);
      for (std::size_t t = 0; t < ms[i]; ++t) {
        cols[0].push_back(px[(t + 1) * stride] - px[t * stride]);
        cols[1].push_back(py[(t + 1) * stride] - py[t * stride]);
      }
      errors[i].push_back(std::abs(realized_cov_day(kDay, cols).rc(0, 1) - truth));
    }
  }
  EXPECT_GT(oracle::median(errors[0]), oracle::median(errors[1]));
  EXPECT_GT(oracle::median(errors[1]), oracle::median(errors[2]));
}

TEST(RealizedCorrSeries, IndependentDaysCenterOnZero) {
  std::mt19937_64 gen(5);
  std::vector<RealizedDay> days;
  for (int d = 0; d < 500; ++d) days.push_back(realized_cov_day(kDay, noise_day(78, 0.0, gen)));
  const auto series = realized_corr_series(days, 0, 1);
  std::vector<double> values;
  for (const auto& p : series) values.push_back(*p.rho);
  EXPECT_LT(std::abs(oracle::sample_mean(values)), 3.0 * oracle::sample_sd(values) / std::sqrt(500.0));
}

TEST(RealizedCorrSeries, GapDayAndIdenticalColumns) {
  std::mt19937_64 gen(6);
  std::vector<Date> tags;
  std::vector<std::vector<double>> cols(2);
  for (int d = 0; d < 5; ++d) {
    const Date day = from_days(to_days(kDay) + std::chrono::days{d});
    const auto a = oracle::gaussian(78, gen);
    for (std::size_t t = 0; t < 78; ++t) {
      tags.push_back(day);
      cols[0].push_back(d == 2 ? 0.0 : a[t]);
      cols[1].push_back(a[t]);
    }
  }
  const auto days = realized_by_day(tags, cols);
  ASSERT_EQ(days.size(), 5u);
  const auto series = realized_corr_series(days, 0, 1);
  int gaps = 0;
  for (std::size_t d = 0; d < series.size(); ++d) {
    if (!series[d].rho) {
      ++gaps;
      EXPECT_EQ(series[d].day, from_days(to_days(kDay) + std::chrono::days{2}));
    } else {
      EXPECT_NEAR(*series[d].rho, 1.0, 1e-15);
    }
  }
  EXPECT_EQ(gaps, 1);
  EXPECT_THROW((void)realized_corr_series(days, 0, 2), Error);
}
