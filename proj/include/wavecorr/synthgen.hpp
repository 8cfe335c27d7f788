#pragma once

// Seeded synthetic processes with known ground truth: correlated Gaussian
// pairs, pairs with prescribed per-scale wavelet correlation, GARCH(1,1) and
// DCC(1,1) paths, random walks, cointegrated pairs and break scenarios.
//
// Every generator takes (seed, stream). The same arguments always reproduce
// the same output bit for bit.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "wavecorr/error.hpp"
#include "wavecorr/rng.hpp"
#include "wavecorr/wavelet_core.hpp"

namespace wavecorr {

struct SeriesPair {
  std::vector<double> x;
  std::vector<double> y;
};

inline SeriesPair gen_bivariate_gaussian(std::size_t n, double rho, std::uint64_t seed, std::uint64_t stream = 0,
                                         double sd_x = 1.0, double sd_y = 1.0) {
  require(std::abs(rho) <= 1.0, ErrorCode::InvalidParameters, "correlation outside [-1, 1]");
  require(n >= 1, ErrorCode::InvalidParameters, "length must be positive");
  CounterRng rng(seed, stream);
  const double tail = std::sqrt(1.0 - rho * rho);
  SeriesPair out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t t = 0; t < n; ++t) {
    const double a = rng.normal();
    const double b = rng.normal();
    out.x[t] = sd_x * a;
    out.y[t] = sd_y * (rho * a + tail * b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-scale correlation

/// Recipe for a pair with prescribed per-level wavelet correlation.
///
/// x is Gaussian noise whose spectrum is piecewise constant over the dyadic
/// bands (1/2^(k+1), 1/2^k], k = 1..J, plus the low band [0, 1/2^(J+1)]; y has
/// the same spectrum and coherence `band_correlation[k]` with x inside band k.
/// Each level-j filter also passes a little of its neighbouring bands, so the
/// band coherences are solved such that the population wavelet correlation at
/// level j equals `targets[j-1]` exactly.
struct ScaleDependentPlan {
  FilterFamily filter;
  std::size_t length;
  std::vector<double> targets;          // population wavelet correlation, j = 1..J
  std::vector<double> band_weights;     // spectral level of bands 1..J and the low band
  std::vector<double> band_correlation; // solved coherence of bands 1..J and the low band
  Eigen::MatrixXd leakage;              // J x (J+1): variance reaching level j from band k
};

namespace detail {

// Band index (1..J, or J+1 for the low band) of DFT bin m of an n-point series.
inline int dyadic_band(std::size_t m, std::size_t n, int levels) {
  const double f = static_cast<double>(std::min(m, n - m)) / static_cast<double>(n);
  for (int k = 1; k <= levels; ++k) {
    if (f > std::ldexp(1.0, -(k + 1))) return k;
  }
  return levels + 1;
}

}  // namespace detail

inline ScaleDependentPlan plan_scale_dependent(std::size_t n, std::span<const double> targets, FilterFamily family,
                                               double lowfreq_correlation,
                                               std::span<const double> band_weights = {}) {
  const int levels = static_cast<int>(targets.size());
  require(levels >= 1, ErrorCode::InvalidParameters, "need at least one target scale");
  require(n >= (std::size_t{1} << (levels + 2)), ErrorCode::InvalidParameters,
          "length must be at least 2^(J+2)");
  for (double r : targets) require(std::abs(r) <= 1.0, ErrorCode::InvalidParameters, "target outside [-1, 1]");
  require(std::abs(lowfreq_correlation) <= 1.0, ErrorCode::InvalidParameters,
          "low-frequency correlation outside [-1, 1]");
  std::vector<double> weights(band_weights.begin(), band_weights.end());
  if (weights.empty()) weights.assign(static_cast<std::size_t>(levels + 1), 1.0);
  require(weights.size() == static_cast<std::size_t>(levels + 1), ErrorCode::InvalidParameters,
          "band weights need J + 1 entries");
  for (double w : weights) require(w > 0.0, ErrorCode::InvalidParameters, "band weights must be positive");

  const auto f = make_filter(family);
  std::vector<double> impulse(n, 0.0);
  impulse[0] = 1.0;
  const auto d = modwt(impulse, f, levels, InteriorCheck::Skip);

  ScaleDependentPlan plan{family, n, {targets.begin(), targets.end()}, weights, {}, Eigen::MatrixXd::Zero(levels, levels + 1)};
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  for (int j = 1; j <= levels; ++j) {
    const std::vector<double> response(d.wavelet(j).begin(), d.wavelet(j).end());
    fft.fwd(spectrum, response);
    for (std::size_t m = 0; m < n; ++m) {
      const int band = detail::dyadic_band(m, n, levels);
      plan.leakage(j - 1, band - 1) += weights[static_cast<std::size_t>(band - 1)] * std::norm(spectrum[m]);
    }
  }
  plan.leakage /= static_cast<double>(n);

  // sum_k E_jk c_k = rho_j sum_k E_jk, with the low-band coherence fixed.
  const Eigen::MatrixXd a = plan.leakage.leftCols(levels);
  Eigen::VectorXd rhs(levels);
  for (int j = 0; j < levels; ++j) {
    rhs(j) = targets[static_cast<std::size_t>(j)] * plan.leakage.row(j).sum() -
             lowfreq_correlation * plan.leakage(j, levels);
  }
  const Eigen::VectorXd c = a.partialPivLu().solve(rhs);
  plan.band_correlation.assign(c.data(), c.data() + levels);
  plan.band_correlation.push_back(lowfreq_correlation);
  for (double ck : plan.band_correlation) {
    require(std::abs(ck) <= 1.0, ErrorCode::UnattainableTarget,
            "targets need a band coherence of " + std::to_string(ck) +
                "; raise the band weights of the scales with the strongest correlation");
  }
  return plan;
}

/// Population wavelet correlation at each level implied by a plan.
inline std::vector<double> implied_scale_correlation(const ScaleDependentPlan& plan) {
  const auto levels = plan.leakage.rows();
  std::vector<double> out(static_cast<std::size_t>(levels));
  for (Eigen::Index j = 0; j < levels; ++j) {
    double num = 0.0;
    for (Eigen::Index k = 0; k <= levels; ++k) num += plan.band_correlation[static_cast<std::size_t>(k)] * plan.leakage(j, k);
    out[static_cast<std::size_t>(j)] = num / plan.leakage.row(j).sum();
  }
  return out;
}

inline SeriesPair gen_scale_dependent_pair(const ScaleDependentPlan& plan, std::uint64_t seed,
                                           std::uint64_t stream = 0) {
  const std::size_t n = plan.length;
  const int levels = static_cast<int>(plan.targets.size());
  CounterRng rng(seed, stream);
  std::vector<double> a(n);
  std::vector<double> b(n);
  for (std::size_t t = 0; t < n; ++t) {
    a[t] = rng.normal();
    b[t] = rng.normal();
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fa;
  std::vector<std::complex<double>> fb;
  fft.fwd(fa, a);
  fft.fwd(fb, b);
  // Normalize the weights so both outputs have unit variance.
  double mean_weight = 0.0;
  for (std::size_t m = 0; m < n; ++m) mean_weight += plan.band_weights[static_cast<std::size_t>(detail::dyadic_band(m, n, levels) - 1)];
  mean_weight /= static_cast<double>(n);
  std::vector<std::complex<double>> fx(n);
  std::vector<std::complex<double>> fy(n);
  for (std::size_t m = 0; m < n; ++m) {
    const auto band = static_cast<std::size_t>(detail::dyadic_band(m, n, levels) - 1);
    const double gain = std::sqrt(plan.band_weights[band] / mean_weight);
    const double rho = plan.band_correlation[band];
    fx[m] = gain * fa[m];
    fy[m] = gain * (rho * fa[m] + std::sqrt(1.0 - rho * rho) * fb[m]);
  }
  SeriesPair out;
  fft.inv(out.x, fx);
  fft.inv(out.y, fy);
  return out;
}

inline SeriesPair gen_scale_dependent_pair(std::size_t n, std::span<const double> rho_per_scale, FilterFamily family,
                                           std::uint64_t seed, std::uint64_t stream = 0,
                                           std::span<const double> band_weights = {}) {
  const auto plan = plan_scale_dependent(n, rho_per_scale, family, rho_per_scale.back(), band_weights);
  return gen_scale_dependent_pair(plan, seed, stream);
}

// ---------------------------------------------------------------------------
// GARCH / DCC

struct GarchParams {
  double omega;
  double alpha;
  double beta;
};

struct GarchPath {
  std::vector<double> returns;
  std::vector<double> variance;
};

inline void check_garch_params(const GarchParams& p) {
  require(p.omega > 0.0 && p.alpha >= 0.0 && p.beta >= 0.0 && p.alpha + p.beta < 1.0, ErrorCode::InvalidParameters,
          "GARCH(1,1) parameters violate omega > 0, alpha, beta >= 0, alpha + beta < 1");
}

/// Forward recursion h_t = omega + alpha r_{t-1}^2 + beta h_{t-1}, h_1 at the
/// unconditional variance.
inline GarchPath gen_garch11(const GarchParams& p, std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) {
  check_garch_params(p);
  CounterRng rng(seed, stream);
  GarchPath out{std::vector<double>(n), std::vector<double>(n)};
  double h = p.omega / (1.0 - p.alpha - p.beta);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) h = p.omega + p.alpha * out.returns[t - 1] * out.returns[t - 1] + p.beta * h;
    out.variance[t] = h;
    out.returns[t] = std::sqrt(h) * rng.normal();
  }
  return out;
}

struct DccParams {
  double a;
  double b;
  Eigen::MatrixXd qbar;             // target correlation matrix
  std::vector<GarchParams> margins;  // one per asset
};

struct DccPath {
  Eigen::MatrixXd returns;  // T x n
  Eigen::MatrixXd eta;      // standardized innovations, T x n
  std::vector<Eigen::MatrixXd> correlation;
};

inline DccPath gen_dcc(const DccParams& p, std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) {
  const auto assets = static_cast<Eigen::Index>(p.margins.size());
  require(assets >= 2 && p.qbar.rows() == assets && p.qbar.cols() == assets, ErrorCode::InvalidParameters,
          "DCC needs >= 2 assets and a matching Qbar");
  require(p.a >= 0.0 && p.b >= 0.0 && p.a + p.b < 1.0, ErrorCode::InvalidParameters,
          "DCC parameters violate a, b >= 0, a + b < 1");
  for (const auto& m : p.margins) check_garch_params(m);
  Eigen::LLT<Eigen::MatrixXd> qbar_chol(p.qbar);
  require(qbar_chol.info() == Eigen::Success, ErrorCode::InvalidParameters, "Qbar must be positive definite");

  CounterRng rng(seed, stream);
  DccPath out{Eigen::MatrixXd(n, assets), Eigen::MatrixXd(n, assets), {}};
  out.correlation.reserve(n);
  Eigen::MatrixXd q = p.qbar;
  Eigen::VectorXd h(assets);
  for (Eigen::Index i = 0; i < assets; ++i) {
    const auto& m = p.margins[static_cast<std::size_t>(i)];
    h(i) = m.omega / (1.0 - m.alpha - m.beta);
  }
  Eigen::VectorXd z(assets);
  for (std::size_t t = 0; t < n; ++t) {
    const Eigen::VectorXd d = q.diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd r = d.asDiagonal() * q * d.asDiagonal();
    out.correlation.push_back(r);
    for (Eigen::Index i = 0; i < assets; ++i) z(i) = rng.normal();
    const Eigen::VectorXd e = r.llt().matrixL() * z;
    out.eta.row(static_cast<Eigen::Index>(t)) = e.transpose();
    for (Eigen::Index i = 0; i < assets; ++i) {
      const auto& m = p.margins[static_cast<std::size_t>(i)];
      if (t > 0) {
        const double prev = out.returns(static_cast<Eigen::Index>(t) - 1, i);
        h(i) = m.omega + m.alpha * prev * prev + m.beta * h(i);
      }
      out.returns(static_cast<Eigen::Index>(t), i) = std::sqrt(h(i)) * e(i);
    }
    q = (1.0 - p.a - p.b) * p.qbar + p.a * e * e.transpose() + p.b * q;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Unit-root pairs

struct RandomWalkParams {
  double drift_x = 0.0;
  double drift_y = 0.0;
  double sd = 1.0;
};

inline SeriesPair gen_random_walks(std::size_t n, const RandomWalkParams& p, std::uint64_t seed,
                                   std::uint64_t stream = 0) {
  require(n >= 200, ErrorCode::InvalidParameters, "random walks need n >= 200");
  CounterRng rng(seed, stream);
  SeriesPair out{std::vector<double>(n), std::vector<double>(n)};
  double x = 0.0;
  double y = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    x += p.drift_x + p.sd * rng.normal();
    y += p.drift_y + p.sd * rng.normal();
    out.x[t] = x;
    out.y[t] = y;
  }
  return out;
}

struct CointegrationParams {
  double beta = 1.0;        // y = beta x + u
  double ar = 0.5;          // u_t = ar u_{t-1} + e_t
  double noise_sd = 1.0;    // sd of e_t
  double drift = 0.0;       // drift of the common trend x
  double trend_sd = 1.0;    // innovation sd of x
};

inline SeriesPair gen_cointegrated_pair(std::size_t n, const CointegrationParams& p, std::uint64_t seed,
                                        std::uint64_t stream = 0) {
  require(n >= 200, ErrorCode::InvalidParameters, "cointegrated pair needs n >= 200");
  require(std::abs(p.ar) < 1.0, ErrorCode::InvalidParameters, "error process must be stationary (|ar| < 1)");
  CounterRng rng(seed, stream);
  SeriesPair out{std::vector<double>(n), std::vector<double>(n)};
  double x = 0.0;
  double u = p.noise_sd / std::sqrt(1.0 - p.ar * p.ar) * rng.normal();
  for (std::size_t t = 0; t < n; ++t) {
    x += p.drift + p.trend_sd * rng.normal();
    if (t > 0) u = p.ar * u + p.noise_sd * rng.normal();
    out.x[t] = x;
    out.y[t] = p.beta * x + u;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Break scenarios

struct GaussianPairSpec {
  double rho = 0.0;
  double mean_x = 0.0;
  double mean_y = 0.0;
  double sd_x = 1.0;
  double sd_y = 1.0;
};

struct BreakScenario {
  SeriesPair data;
  std::size_t break_index;  // first observation of the post-break regime
};

inline BreakScenario gen_break_scenario(const GaussianPairSpec& pre, std::size_t n, std::size_t break_index,
                                        const GaussianPairSpec& post, std::uint64_t seed, std::uint64_t stream = 0) {
  require(break_index > 0 && break_index < n, ErrorCode::InvalidBreakIndex,
          "break index " + std::to_string(break_index) + " not strictly inside 0.." + std::to_string(n));
  for (const auto* s : {&pre, &post}) {
    require(std::abs(s->rho) <= 1.0, ErrorCode::InvalidParameters, "correlation outside [-1, 1]");
  }
  CounterRng rng(seed, stream);
  BreakScenario out{{std::vector<double>(n), std::vector<double>(n)}, break_index};
  for (std::size_t t = 0; t < n; ++t) {
    const auto& s = t < break_index ? pre : post;
    const double a = rng.normal();
    const double b = rng.normal();
    out.data.x[t] = s.mean_x + s.sd_x * a;
    out.data.y[t] = s.mean_y + s.sd_y * (s.rho * a + std::sqrt(1.0 - s.rho * s.rho) * b);
  }
  return out;
}


/// Pair whose error y - beta x is a random walk before `break_index` and the
/// stationary AR(1) of `p` from then on, so it is cointegrated only after the break.
inline BreakScenario gen_cointegration_switch(std::size_t n, std::size_t break_index, const CointegrationParams& p,
                                              std::uint64_t seed, std::uint64_t stream = 0) {
  require(n >= 200, ErrorCode::InvalidParameters, "cointegration switch needs n >= 200");
  require(break_index > 0 && break_index < n, ErrorCode::InvalidBreakIndex,
          "break index " + std::to_string(break_index) + " not strictly inside 0.." + std::to_string(n));
  require(std::abs(p.ar) < 1.0, ErrorCode::InvalidParameters, "error process must be stationary (|ar| < 1)");
  CounterRng rng(seed, stream);
  BreakScenario out{{std::vector<double>(n), std::vector<double>(n)}, break_index};
  double x = 0.0;
  double u = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    x += p.drift + p.trend_sd * rng.normal();
    u = (t < break_index ? 1.0 : p.ar) * u + p.noise_sd * rng.normal();
    out.data.x[t] = x;
    out.data.y[t] = p.beta * x + u;
  }
  return out;
}

}  // namespace wavecorr
