#pragma once

// Two-stage Gaussian QML: univariate GARCH(1,1) margins, then the scalar
// DCC(1,1) correlation recursion on the standardized residuals.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wavecorr/error.hpp"

namespace wavecorr {

// ---------------------------------------------------------------------------
// Nelder-Mead

struct SimplexResult {
  std::vector<double> x;
  double value;
  int evaluations;
  bool converged;
};

/// Minimizes f from x0 with initial edge `step`. Stops when the spread of the
/// simplex values falls below tol * max(1, |best|) and no vertex is farther
/// than xtol from the best one in any coordinate.
inline SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                                 double step, double tol = 1e-8, int max_evals = 4000, double xtol = 1e-7) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
  std::vector<double> val(n + 1);
  int evals = 0;
  auto eval = [&](const std::vector<double>& p) {
    ++evals;
    const double v = f(p);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 0; i <= n; ++i) val[i] = eval(pts[i]);
  std::vector<std::size_t> order(n + 1);
  bool converged = false;
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const double best = val[order.front()];
    const double worst = val[order.back()];
    double diameter = 0.0;
    for (std::size_t k = 1; k <= n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        diameter = std::max(diameter, std::abs(pts[order[k]][i] - pts[order.front()][i]));
    if (std::isfinite(worst) && worst - best <= tol * std::max(1.0, std::abs(best)) && diameter <= xtol) {
      converged = true;
      break;
    }
    std::vector<double> centroid(n, 0.0);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i) centroid[i] += pts[order[k]][i] / static_cast<double>(n);
    const auto along = [&](double t) {
      std::vector<double> p(n);
      for (std::size_t i = 0; i < n; ++i) p[i] = centroid[i] + t * (pts[order.back()][i] - centroid[i]);
      return p;
    };
    const auto reflected = along(-1.0);
    const double fr = eval(reflected);
    const double second_worst = val[order[n - 1]];
    if (fr < best) {
      const auto expanded = along(-2.0);
      const double fe = eval(expanded);
      if (fe < fr) {
        pts[order.back()] = expanded;
        val[order.back()] = fe;
      } else {
        pts[order.back()] = reflected;
        val[order.back()] = fr;
      }
      continue;
    }
    if (fr < second_worst) {
      pts[order.back()] = reflected;
      val[order.back()] = fr;
      continue;
    }
    const bool outside = fr < worst;
    const auto contracted = along(outside ? -0.5 : 0.5);
    const double fc = eval(contracted);
    if (fc < (outside ? fr : worst)) {
      pts[order.back()] = contracted;
      val[order.back()] = fc;
      continue;
    }
    const auto& anchor = pts[order.front()];
    for (std::size_t k = 1; k <= n; ++k) {
      auto& p = pts[order[k]];
      for (std::size_t i = 0; i < n; ++i) p[i] = anchor[i] + 0.5 * (p[i] - anchor[i]);
      val[order[k]] = eval(p);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  return {pts[best], val[best], evals, converged};
}

namespace detail {

inline double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

constexpr double kPersistenceCap = 1.0 - 1e-6;

// (persistence, share) <-> (first, second) with first + second <= cap.
inline std::array<double, 2> split_persistence(double u_persist, double u_share) {
  const double p = kPersistenceCap * logistic(u_persist);
  const double first = p * logistic(u_share);
  return {first, p - first};
}

inline std::array<double, 2> join_persistence(double first, double second) {
  const double p = first + second;
  return {logit(p / kPersistenceCap), logit(first / p)};
}

// Runs the simplex from the `keep` best grid points, restarting once from each
// optimum, and returns the overall best.
inline SimplexResult multistart(const std::function<double(std::span<const double>)>& f,
                                const std::vector<std::vector<double>>& grid, std::size_t keep) {
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < grid.size(); ++i) ranked.emplace_back(f(grid[i]), i);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  SimplexResult best{grid[ranked.front().second], ranked.front().first, 0, false};
  int evaluations = static_cast<int>(grid.size());
  for (std::size_t k = 0; k < std::min(keep, ranked.size()); ++k) {
    const auto run = nelder_mead(f, grid[ranked[k].second], 0.5);
    auto again = nelder_mead(f, run.x, 0.1);
    evaluations += run.evaluations + again.evaluations;
    again.converged = again.converged && run.converged;
    if (k == 0 || again.value < best.value) best = again;
  }
  best.evaluations = evaluations;
  return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// GARCH(1,1)

struct GarchFit {
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double mean = 0.0;
  std::vector<double> h;
  std::vector<double> eta;
  double loglik = 0.0;  // -1/2 sum(log h_t + e_t^2 / h_t)
  bool converged = false;
  int evaluations = 0;
};

namespace detail {

inline double garch_loglik(std::span<const double> e, double h1, double omega, double alpha, double beta,
                           std::vector<double>* h_out = nullptr) {
  double h = h1;
  double ll = 0.0;
  for (std::size_t t = 0; t < e.size(); ++t) {
    if (t > 0) h = omega + alpha * e[t - 1] * e[t - 1] + beta * h;
    if (!(h > 0.0)) return -std::numeric_limits<double>::infinity();
    ll += std::log(h) + e[t] * e[t] / h;
    if (h_out) (*h_out)[t] = h;
  }
  return -0.5 * ll;
}

}  // namespace detail

/// Gaussian QML over {omega > 0, alpha, beta >= 0, alpha + beta <= 1 - 1e-6};
/// returns are demeaned first and h_1 is the sample variance.
inline GarchFit garch11_fit(std::span<const double> r) {
  require(r.size() >= 250, ErrorCode::SeriesTooShort, "GARCH fit needs at least 250 observations");
  GarchFit fit;
  for (double x : r) {
    require(std::isfinite(x), ErrorCode::NonFiniteInput, "non-finite return");
    fit.mean += x;
  }
  fit.mean /= static_cast<double>(r.size());
  std::vector<double> e(r.size());
  double var = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t) {
    e[t] = r[t] - fit.mean;
    var += e[t] * e[t];
  }
  var /= static_cast<double>(r.size());
  const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
  require(var > 0.0 && *lo != *hi, ErrorCode::DegenerateData, "returns have zero variance");

  const auto objective = [&](std::span<const double> u) {
    const auto [alpha, beta] = detail::split_persistence(u[1], u[2]);
    return -detail::garch_loglik(e, var, std::exp(u[0]), alpha, beta);
  };
  std::vector<std::vector<double>> grid;
  for (double persist : {0.3, 0.85, 0.97})
    for (double share : {0.05, 0.15, 0.35})
      for (double level : {0.5, 1.0, 2.0}) {
        const auto u = detail::join_persistence(persist * share, persist * (1.0 - share));
        grid.push_back({std::log(var * (1.0 - persist) * level), u[0], u[1]});
      }
  const auto best = detail::multistart(objective, grid, 3);
  fit.omega = std::exp(best.x[0]);
  const auto ab = detail::split_persistence(best.x[1], best.x[2]);
  fit.alpha = ab[0];
  fit.beta = ab[1];
  fit.converged = best.converged;
  fit.evaluations = best.evaluations;
  fit.h.assign(r.size(), 0.0);
  fit.loglik = detail::garch_loglik(e, var, fit.omega, fit.alpha, fit.beta, &fit.h);
  fit.eta.resize(r.size());
  for (std::size_t t = 0; t < r.size(); ++t) fit.eta[t] = e[t] / std::sqrt(fit.h[t]);
  return fit;
}

// ---------------------------------------------------------------------------
// DCC(1,1)

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

struct DccFit {
  double a = 0.0;
  double b = 0.0;
  Eigen::MatrixXd qbar;
  std::vector<Eigen::MatrixXd> q;
  std::vector<Eigen::MatrixXd> r;
  double loglik = 0.0;  // -1/2 sum(log|R_t| + eta' R_t^-1 eta - eta' eta)
  bool converged = false;
  bool degenerate = false;  // Qbar singular (perfectly collinear residuals); a = b = 0 and R_t = R(Qbar)
  int evaluations = 0;

  std::size_t assets() const { return static_cast<std::size_t>(qbar.rows()); }
  std::size_t length() const { return r.size(); }
};

namespace detail {

// R = diag(Q)^-1/2 Q diag(Q)^-1/2, symmetrized and with the diagonal pinned to one so the
// invariants hold exactly rather than to rounding.
template <typename M>
M normalize_q(const M& q) {
  const auto n = q.rows();
  M r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index k = 0; k < i; ++k) {
      const double v = std::clamp(q(i, k) / std::sqrt(q(i, i) * q(k, k)), -1.0, 1.0);
      r(i, k) = v;
      r(k, i) = v;
    }
  }
  return r;
}

// Stage-2 log-likelihood; optionally records the Q and R paths.
inline double dcc_loglik(const Eigen::MatrixXd& eta, const SmallMatrix& qbar, double a, double b,
                         std::vector<Eigen::MatrixXd>* q_path = nullptr,
                         std::vector<Eigen::MatrixXd>* r_path = nullptr) {
  const auto n = eta.cols();
  SmallMatrix q = qbar;
  SmallMatrix rt(n, n);
  double ll = 0.0;
  for (Eigen::Index t = 0; t < eta.rows(); ++t) {
    if (t > 0) {
      const auto prev = eta.row(t - 1).transpose();
      q = (1.0 - a - b) * qbar + a * (prev * prev.transpose()) + b * q;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(q(i, i) > 0.0)) fail(ErrorCode::SingularQ, "DCC recursion produced a nonpositive q_ii");
    }
    rt = normalize_q(q);
    const Eigen::LLT<SmallMatrix> chol(rt);
    if (chol.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd e = eta.row(t).transpose();
    const Eigen::VectorXd z = chol.matrixL().solve(e);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(chol.matrixL()(i, i));
    ll += logdet + z.squaredNorm() - e.squaredNorm();
    if (q_path) q_path->push_back(q);
    if (r_path) r_path->push_back(rt);
  }
  return -0.5 * ll;
}

}  // namespace detail

/// eta is T x n (n = 2 or 3) standardized residuals.
inline DccFit dcc_fit(const Eigen::MatrixXd& eta) {
  const auto n = eta.cols();
  const auto big_t = eta.rows();
  require(n >= 2 && n <= 3, ErrorCode::InvalidArgument, "DCC supports 2 or 3 assets");
  require(big_t >= 250, ErrorCode::SeriesTooShort, "DCC fit needs at least 250 observations");
  require(eta.allFinite(), ErrorCode::NonFiniteInput, "non-finite standardized residual");
  DccFit fit;
  fit.qbar = (eta.transpose() * eta) / static_cast<double>(big_t);
  fit.qbar = (0.5 * (fit.qbar + fit.qbar.transpose())).eval();
  for (Eigen::Index i = 0; i < n; ++i) {
    require(std::abs(fit.qbar(i, i) - 1.0) <= 0.2, ErrorCode::InvalidArgument,
            "standardized residual column " + std::to_string(i) + " has variance " +
                std::to_string(fit.qbar(i, i)) + ", expected 1 within 20%");
  }
  const SmallMatrix qbar = fit.qbar;
  {
    const Eigen::MatrixXd normalized = detail::normalize_q(fit.qbar);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normalized);
    if (eig.eigenvalues().minCoeff() <= 1e-12) {
      // Every Q_t is then proportional to Qbar, so R_t is fixed and the
      // likelihood carries no information about (a, b).
      fit.degenerate = true;
      fit.converged = true;
      fit.q.assign(static_cast<std::size_t>(big_t), fit.qbar);
      fit.r.assign(static_cast<std::size_t>(big_t), normalized);
      fit.loglik = std::numeric_limits<double>::quiet_NaN();
      return fit;
    }
  }
  const auto objective = [&](std::span<const double> u) {
    const auto [a, b] = detail::split_persistence(u[0], u[1]);
    return -detail::dcc_loglik(eta, qbar, a, b);
  };
  std::vector<std::vector<double>> grid;
  for (double persist : {0.5, 0.9, 0.98})
    for (double share : {0.02, 0.06, 0.2}) {
      const auto u = detail::join_persistence(persist * share, persist * (1.0 - share));
      grid.push_back({u[0], u[1]});
    }
  const auto best = detail::multistart(objective, grid, 3);
  const auto ab = detail::split_persistence(best.x[0], best.x[1]);
  fit.a = ab[0];
  fit.b = ab[1];
  // The interior parametrization cannot reach a = b = 0 exactly.
  if (-detail::dcc_loglik(eta, qbar, 0.0, 0.0) <= best.value) {
    fit.a = 0.0;
    fit.b = 0.0;
  }
  fit.converged = best.converged;
  fit.evaluations = best.evaluations;
  fit.q.reserve(static_cast<std::size_t>(big_t));
  fit.r.reserve(static_cast<std::size_t>(big_t));
  fit.loglik = detail::dcc_loglik(eta, qbar, fit.a, fit.b, &fit.q, &fit.r);
  return fit;
}

/// Stage 1 on every column of a T x n return matrix, then stage 2.
struct DccGarchFit {
  std::vector<GarchFit> margins;
  DccFit dcc;
  bool converged() const {
    return dcc.converged && std::all_of(margins.begin(), margins.end(), [](const auto& m) { return m.converged; });
  }
};

inline DccGarchFit dcc_garch_fit(const Eigen::MatrixXd& returns) {
  DccGarchFit out;
  Eigen::MatrixXd eta(returns.rows(), returns.cols());
  for (Eigen::Index k = 0; k < returns.cols(); ++k) {
    const Eigen::VectorXd col = returns.col(k);
    out.margins.push_back(garch11_fit(std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
    eta.col(k) = Eigen::Map<const Eigen::VectorXd>(out.margins.back().eta.data(), returns.rows());
  }
  out.dcc = dcc_fit(eta);
  return out;
}

inline std::vector<double> dcc_correlation_path(const DccFit& fit, std::size_t i, std::size_t k) {
  require(i != k && i < fit.assets() && k < fit.assets(), ErrorCode::IndexOutOfRange,
          "asset indices must differ and lie below " + std::to_string(fit.assets()));
  std::vector<double> out;
  out.reserve(fit.r.size());
  for (const auto& rt : fit.r)
    out.push_back(rt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
  return out;
}

}  // namespace wavecorr
