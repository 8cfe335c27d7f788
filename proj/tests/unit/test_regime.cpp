#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "wavecorr/regime.hpp"
#include "wavecorr/synthgen.hpp"

using namespace wavecorr;

namespace {

const std::string kDataDir = WAVECORR_DATA_DIR;

const SupFNullTable& shipped_table() {
  static const SupFNullTable table = SupFNullTable::load(kDataDir + "/supf_null_trim0.15.csv");
  return table;
}

double ssr_about_mean(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  double mean = 0.0;
  for (std::size_t t = lo; t < hi; ++t) mean += v[t];
  mean /= static_cast<double>(hi - lo);
  double s = 0.0;
  for (std::size_t t = lo; t < hi; ++t) s += (v[t] - mean) * (v[t] - mean);
  return s;
}

Eigen::MatrixXd as_matrix(const SeriesPair& p) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(p.x.size()), 2);
  for (std::size_t t = 0; t < p.x.size(); ++t) {
    m(static_cast<Eigen::Index>(t), 0) = p.x[t];
    m(static_cast<Eigen::Index>(t), 1) = p.y[t];
  }
  return m;
}

double binomial_se(double p, int n) { return std::sqrt(p * (1 - p) / n); }

CointegrationParams drifting_pair() {
  CointegrationParams p;
  p.drift = 0.2;
  return p;
}

}  // namespace

// supF null table

TEST(SupFNull, ShippedTableMatchesPublishedCriticalValues) {
  // Andrews (1993), one restriction, 15% trimming: 7.12, 8.68, 12.16.
  const auto& t = shipped_table();
  EXPECT_EQ(t.paths(), 100000u);
  EXPECT_EQ(t.grid(), 1000u);
  EXPECT_DOUBLE_EQ(t.trim(), 0.15);
  EXPECT_NEAR(t.quantile(0.90), 7.12, 0.15);
  EXPECT_NEAR(t.quantile(0.95), 8.68, 0.15);
  EXPECT_NEAR(t.quantile(0.99), 12.16, 0.4);
}

TEST(SupFNull, ShippedTableIsRegenerable) {
  const auto& shipped = shipped_table();
  const auto fresh = SupFNullTable::simulate(shipped.trim(), shipped.seed(), shipped.paths(), shipped.grid());
  std::ostringstream a;
  std::ostringstream b;
  fresh.write(a);
  std::ifstream in(kDataDir + "/supf_null_trim0.15.csv");
  b << in.rdbuf();
  EXPECT_EQ(a.str(), b.str());
}

TEST(SupFNull, PValueIsMonotoneAndConsistentWithQuantiles) {
  const auto& t = shipped_table();
  EXPECT_EQ(t.p_value(0.0), 1.0);
  EXPECT_EQ(t.p_value(1e6), 0.0);
  EXPECT_NEAR(t.p_value(t.quantile(0.95)), 0.05, 1e-9);
  double prev = 1.0;
  for (double s = 0.5; s < 30.0; s += 0.25) {
    const double p = t.p_value(s);
    EXPECT_LE(p, prev);
    EXPECT_GE(p, 0.0);
    prev = p;
  }
}

TEST(SupFNull, RoundTripsThroughCsv) {
  const auto t = SupFNullTable::simulate(0.1, 7, 500, 200);
  std::stringstream s;
  t.write(s);
  const auto back = SupFNullTable::parse(s);
  EXPECT_EQ(back.seed(), 7u);
  EXPECT_EQ(back.paths(), 500u);
  EXPECT_DOUBLE_EQ(back.trim(), 0.1);
  for (double p : {0.1, 0.5, 0.9}) EXPECT_NEAR(back.quantile(p), t.quantile(p), 1e-7);
}

TEST(SupFNull, RejectsMalformedFiles) {
  std::istringstream bad_header("# trim=0.15\nprob,q\n0,1\n1,2\n");
  EXPECT_THROW(SupFNullTable::parse(bad_header), Error);
  std::istringstream decreasing("# trim=0.15\ngrid_point,quantile\n0,3\n1,2\n");
  EXPECT_THROW(SupFNullTable::parse(decreasing), Error);
  try {
    SupFNullTable::load("/nonexistent/table.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

// supF

TEST(SupF, MatchesDirectChowStatistic) {
  std::mt19937_64 gen(3);
  auto y = oracle::gaussian(120, gen);
  for (std::size_t t = 70; t < y.size(); ++t) y[t] += 0.8;
  const auto r = supf_break(y, shipped_table());
  const std::size_t n = y.size();
  const double ssr0 = ssr_about_mean(y, 0, n);
  double best = -1.0;
  std::size_t best_k = 0;
  const std::size_t first = 18;  // ceil(0.15 * 120)
  const std::size_t last = 102;  // floor(0.85 * 120)
  ASSERT_EQ(r.first_candidate, first);
  ASSERT_EQ(r.fstats.size(), last - first + 1);
  for (std::size_t k = first; k <= last; ++k) {
    const double ssr1 = ssr_about_mean(y, 0, k) + ssr_about_mean(y, k, n);
    const double f = (ssr0 - ssr1) / (ssr1 / static_cast<double>(n - 2));
    EXPECT_NEAR(r.fstats[k - first], f, 1e-9 * std::max(1.0, f));
    if (f > best) {
      best = f;
      best_k = k;
    }
  }
  EXPECT_NEAR(r.supf, best, 1e-9 * best);
  EXPECT_EQ(r.break_index, best_k);
  EXPECT_EQ(r.n, n);
  EXPECT_NEAR(r.p_value, shipped_table().p_value(r.supf), 1e-15);
}

TEST(SupF, AffineInvariance) {
  std::mt19937_64 gen(4);
  const auto y = oracle::gaussian(300, gen);
  const auto base = supf_break(y, shipped_table());
  for (auto [a, b] : {std::pair{3.5, -2.0}, std::pair{-0.01, 100.0}, std::pair{-1.0, 0.0}}) {
    std::vector<double> z(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) z[t] = a * y[t] + b;
    const auto r = supf_break(z, shipped_table());
    EXPECT_NEAR(r.supf, base.supf, 1e-9 * base.supf);
    EXPECT_EQ(r.break_index, base.break_index);
  }
}

TEST(SupF, BreakIndexStaysInTrimmedInterior) {
  std::mt19937_64 gen(5);
  for (double trim : {0.05, 0.15, 0.25}) {
    const auto table = SupFNullTable::simulate(trim, 1, 200, 100);
    auto y = oracle::gaussian(97, gen);
    y[0] += 50.0;  // a huge early outlier pulls the argmax to the boundary
    const auto r = supf_break(y, table, trim);
    EXPECT_GE(static_cast<double>(r.break_index), trim * 97);
    EXPECT_LE(static_cast<double>(r.break_index), (1 - trim) * 97);
    EXPECT_GE(r.supf, 0.0);
  }
}

TEST(SupF, ReportsDateOfBreak) {
  std::vector<double> y(60, 0.0);
  std::vector<Date> dates;
  for (int m = 0; m < 60; ++m) {
    y[static_cast<std::size_t>(m)] = (m >= 36 ? 1.0 : 0.0) + 0.01 * std::sin(m);
    dates.push_back(make_date(2005 + m / 12, m % 12 + 1, 1));
  }
  const auto r = supf_break(y, dates, shipped_table());
  EXPECT_EQ(r.break_index, 36u);
  ASSERT_TRUE(r.break_date.has_value());
  EXPECT_EQ(*r.break_date, make_date(2008, 1, 1));
  EXPECT_LT(r.p_value, 0.001);
}

TEST(SupF, Errors) {
  const auto& t = shipped_table();
  std::vector<double> flat(100, 0.3);
  try {
    supf_break(flat, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConstantSeries);
  }
  std::vector<double> short_series(39, 0.0);
  short_series[3] = 1.0;
  try {
    supf_break(short_series, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SeriesTooShort);
  }
  std::vector<double> y(100);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::cos(static_cast<double>(i));
  EXPECT_THROW(supf_break(y, t, 0.3), Error);
  EXPECT_THROW(supf_break(y, t, 0.10), Error);  // table simulated for 0.15
  std::vector<Date> dates(99, make_date(2000, 1, 1));
  EXPECT_THROW(supf_break(y, dates, t), Error);
}

TEST(SupF, SizeOnGaussianNoise) {
  const int runs = 400;
  int rejections = 0;
  for (int r = 0; r < runs; ++r) {
    const auto y = gen_bivariate_gaussian(200, 0.0, 61, static_cast<std::uint64_t>(r)).x;
    rejections += supf_break(y, shipped_table()).p_value < 0.05;
  }
  const double rate = static_cast<double>(rejections) / runs;
  EXPECT_NEAR(rate, 0.05, 3 * binomial_se(0.05, runs));
}

TEST(SupF, LocatesTwoSdShift) {
  const int runs = 200;
  const std::size_t n = 500;
  int located = 0;
  for (int r = 0; r < runs; ++r) {
    const auto s = gen_break_scenario({0.0, 0.0, 0.0, 1.0, 1.0}, n, n / 2, {0.0, 2.0, 0.0, 1.0, 1.0}, 62,
                                      static_cast<std::uint64_t>(r));
    const auto b = supf_break(s.data.x, shipped_table());
    const double miss = std::abs(static_cast<double>(b.break_index) - static_cast<double>(s.break_index));
    located += miss <= 0.05 * n;
  }
  EXPECT_GE(located, 0.95 * runs);
}

// Johansen

TEST(Johansen, EigenvaluesMatchGeneralEigenproblem) {
  // Independent route: eigenvalues of S11^-1 S10 S00^-1 S01 with no lags and
  // no deterministic terms, built directly from levels and differences.
  const auto m = as_matrix(gen_cointegrated_pair(400, {}, 71));
  const Eigen::Index t = m.rows() - 1;
  const Eigen::MatrixXd dy = m.bottomRows(t) - m.topRows(t);
  const Eigen::MatrixXd ylag = m.topRows(t);
  const Eigen::MatrixXd s00 = dy.transpose() * dy / static_cast<double>(t);
  const Eigen::MatrixXd s11 = ylag.transpose() * ylag / static_cast<double>(t);
  const Eigen::MatrixXd s01 = dy.transpose() * ylag / static_cast<double>(t);
  const Eigen::MatrixXd a = s11.inverse() * s01.transpose() * s00.inverse() * s01;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  std::vector<double> ev{es.eigenvalues()(0).real(), es.eigenvalues()(1).real()};
  std::sort(ev.rbegin(), ev.rend());

  const auto r = johansen_trace(m, 0, JohansenSpec::None);
  ASSERT_EQ(r.eigenvalues.size(), 2u);
  EXPECT_EQ(r.t_eff, static_cast<std::size_t>(t));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(r.eigenvalues[i], ev[i], 1e-10);
  EXPECT_NEAR(r.trace[0], -static_cast<double>(t) * (std::log(1 - ev[0]) + std::log(1 - ev[1])), 1e-7);
  EXPECT_NEAR(r.trace[1], -static_cast<double>(t) * std::log(1 - ev[1]), 1e-7);
}

TEST(Johansen, StructuralInvariants) {
  for (int lags = 0; lags <= 5; ++lags) {
    for (auto spec : {JohansenSpec::Constant, JohansenSpec::None}) {
      const auto m = as_matrix(gen_random_walks(300, {0.1, -0.05, 1.0}, 72, static_cast<std::uint64_t>(lags)));
      const auto r = johansen_trace(m, lags, spec);
      EXPECT_EQ(r.lags, lags);
      EXPECT_EQ(r.t_eff, static_cast<std::size_t>(300 - 1 - lags));
      for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
        EXPECT_GE(r.eigenvalues[i], 0.0);
        EXPECT_LT(r.eigenvalues[i], 1.0);
        if (i > 0) EXPECT_LE(r.eigenvalues[i], r.eigenvalues[i - 1]);
      }
      for (std::size_t i = 0; i < r.trace.size(); ++i) {
        EXPECT_GE(r.trace[i], 0.0);
        if (i > 0) EXPECT_LE(r.trace[i], r.trace[i - 1]);
      }
    }
  }
}

TEST(Johansen, InvariantUnderRescaling) {
  Eigen::MatrixXd m(500, 3);
  const auto a = gen_cointegrated_pair(500, drifting_pair(), 73);
  const auto b = gen_random_walks(500, {0.1, 0.0, 1.0}, 74);
  for (Eigen::Index t = 0; t < 500; ++t) {
    const auto s = static_cast<std::size_t>(t);
    m(t, 0) = a.x[s];
    m(t, 1) = a.y[s];
    m(t, 2) = b.x[s];
  }
  const auto base = johansen_trace(m, 2);
  Eigen::MatrixXd scaled = m;
  scaled.col(0) *= 1e-3;
  scaled.col(1) *= -250.0;
  scaled.col(2) *= 7.0;
  const auto r = johansen_trace(scaled, 2);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.trace[i], base.trace[i], 1e-6);
}

TEST(Johansen, CriticalValuesAndBrackets) {
  const auto m = as_matrix(gen_cointegrated_pair(1000, drifting_pair(), 75));
  const auto r = johansen_trace(m, 1);
  EXPECT_DOUBLE_EQ(r.critical[0][1], 15.4943);
  EXPECT_DOUBLE_EQ(r.critical[1][1], 3.8415);
  EXPECT_EQ(r.bracket(0), "<0.01");
  EXPECT_EQ(r.rank(), 1u);

  JohansenResult fake;
  fake.trace = {14.0, 2.0};
  fake.critical = {TraceCriticalValues::lookup(2, JohansenSpec::Constant),
                   TraceCriticalValues::lookup(1, JohansenSpec::Constant)};
  EXPECT_EQ(fake.bracket(0), "0.05-0.10");
  EXPECT_EQ(fake.bracket(1), ">0.10");
  fake.trace = {16.0, 5.0};
  EXPECT_EQ(fake.bracket(0), "0.01-0.05");
  EXPECT_EQ(fake.bracket(1), "0.01-0.05");
}

TEST(Johansen, ShippedCriticalValueFileMatchesEmbeddedTable) {
  std::ostringstream expected;
  TraceCriticalValues::write_csv(expected);
  std::ifstream in(kDataDir + "/johansen_trace_cv.csv");
  std::ostringstream shipped;
  shipped << in.rdbuf();
  EXPECT_EQ(shipped.str(), expected.str());
}

TEST(Johansen, Errors) {
  const auto pair = gen_random_walks(300, {}, 76);
  auto m = as_matrix(pair);
  Eigen::MatrixXd collinear = m;
  collinear.col(1) = 2.0 * m.col(0);
  try {
    johansen_trace(collinear);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularMoment);
  }
  try {
    johansen_trace(m.topRows(101), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooShort);
  }
  EXPECT_NO_THROW(johansen_trace(m.topRows(102), 1));
  EXPECT_THROW(johansen_trace(m, 6), Error);
  EXPECT_THROW(johansen_trace(m, -1), Error);
  EXPECT_THROW(johansen_trace(m.leftCols(1), 1), Error);
  Eigen::MatrixXd four(300, 4);
  four << m, m * 0.5 + Eigen::MatrixXd::Random(300, 2);
  EXPECT_THROW(johansen_trace(four, 1), Error);
  m(10, 0) = std::nan("");
  EXPECT_THROW(johansen_trace(m, 1), Error);
}

TEST(Johansen, SizeOnDriftingRandomWalks) {
  const int runs = 500;
  int rejections = 0;
  for (int r = 0; r < runs; ++r) {
    const auto m = as_matrix(gen_random_walks(1000, {0.2, 0.2, 1.0}, 77, static_cast<std::uint64_t>(r)));
    rejections += johansen_trace(m, 1).rejects(0);
  }
  const double rate = static_cast<double>(rejections) / runs;
  EXPECT_NEAR(rate, 0.05, 3 * binomial_se(0.05, runs));
}

TEST(Johansen, SizeWithoutDeterministicTerms) {
  const int runs = 500;
  int rejections = 0;
  for (int r = 0; r < runs; ++r) {
    const auto m = as_matrix(gen_random_walks(1000, {}, 78, static_cast<std::uint64_t>(r)));
    rejections += johansen_trace(m, 1, JohansenSpec::None).rejects(0);
  }
  const double rate = static_cast<double>(rejections) / runs;
  EXPECT_NEAR(rate, 0.05, 3 * binomial_se(0.05, runs));
}

TEST(Johansen, DetectsCointegration) {
  const int runs = 500;
  int reject0 = 0;
  int keep1 = 0;
  for (int r = 0; r < runs; ++r) {
    const auto m = as_matrix(gen_cointegrated_pair(1000, drifting_pair(), 79, static_cast<std::uint64_t>(r)));
    const auto j = johansen_trace(m, 1);
    reject0 += j.rejects(0);
    keep1 += !j.rejects(1);
  }
  EXPECT_GE(reject0, 0.9 * runs);
  EXPECT_GE(keep1, 0.9 * runs);
}

TEST(Johansen, SimulatedPValues) {
  auto coint = johansen_trace(as_matrix(gen_cointegrated_pair(400, drifting_pair(), 80)), 1);
  johansen_simulated_pvalues(coint, 199, 5);
  ASSERT_TRUE(coint.simulated_p[0].has_value());
  EXPECT_NEAR(*coint.simulated_p[0], 1.0 / 200.0, 1e-12);
  EXPECT_GT(*coint.simulated_p[1], 0.01);

  // Simulated p-values agree with the asymptotic bracket on unrelated walks.
  int agree = 0;
  for (int r = 0; r < 10; ++r) {
    auto j = johansen_trace(as_matrix(gen_random_walks(400, {1.0, 1.0, 1.0}, 81, static_cast<std::uint64_t>(r))), 1);
    johansen_simulated_pvalues(j, 99, 6);
    agree += (*j.simulated_p[0] < 0.05) == j.rejects(0);
  }
  EXPECT_GE(agree, 8);
  EXPECT_THROW(johansen_simulated_pvalues(coint, 5, 1), Error);
}

// Split-sample cointegration

TEST(SplitSample, CointegratedWithoutBreakFindsRankOneEverywhere) {
  const auto m = as_matrix(gen_cointegrated_pair(1000, drifting_pair(), 82));
  const auto s = split_sample_cointegration(m, 400);
  EXPECT_EQ(s.pre.rank(), 1u);
  EXPECT_EQ(s.post.rank(), 1u);
  EXPECT_EQ(s.full.rank(), 1u);
  EXPECT_EQ(s.pre.t_eff, 400u - 2);
  EXPECT_EQ(s.post.t_eff, 600u - 2);
}

TEST(SplitSample, CointegrationOnlyAfterBreak) {
  const int runs = 200;
  int pre_rank0 = 0;
  int post_rank1 = 0;
  for (int r = 0; r < runs; ++r) {
    const auto sc = gen_cointegration_switch(1000, 500, drifting_pair(), 83, static_cast<std::uint64_t>(r));
    const auto s = split_sample_cointegration(as_matrix(sc.data), sc.break_index);
    pre_rank0 += s.pre.rank() == 0;
    post_rank1 += s.post.rank() == 1;
  }
  EXPECT_GE(pre_rank0, 0.8 * runs);
  EXPECT_GE(post_rank1, 0.8 * runs);
}

TEST(SplitSample, EdgeBreakIsRejected) {
  const auto m = as_matrix(gen_cointegrated_pair(600, {}, 84));
  for (std::size_t k : {1u, 50u, 101u, 499u, 599u}) {
    try {
      split_sample_cointegration(m, k);
      FAIL() << k;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::SubsampleTooShort);
    }
  }
  EXPECT_NO_THROW(split_sample_cointegration(m, 102));
  EXPECT_NO_THROW(split_sample_cointegration(m, 498));
}
