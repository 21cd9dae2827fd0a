#pragma once

// CES household preferences and the substitution-elasticity regression.
//
// The household price index is psi(p) = (sum_i mu_i p_i^lambda)^(1/lambda)
// with the Cobb-Douglas log-limit at |lambda| < kGammaEps; expenditure
// shares follow as b_i = mu_i (p_i / psi)^lambda.  Taking first differences
// of the log share equation across the two periods,
//
//   dln b_i = const + lambda dln p_i + dln error_i ,
//
// lambda is estimated by weighted two-stage least squares: prices are
// endogenous to taste shocks, so dln p_i is instrumented by the item's
// productivity growth dln tau_i and its exponential.  Observations are
// weighted by 1/nu_i with nu_i^2 = 1/b_i1^2 + 1/b_i0^2 (items measured
// noisily on tiny shares carry less weight).

#include "cascade_ge/common.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace cascade_ge {

struct HouseholdModel {
  Vec mu;             // item weights; calibrated as reference-period shares
  double lambda = 0;  // substitution exponent of the expenditure system
};

// Calibrate weights to the reference-period expenditure shares.
inline HouseholdModel make_household(const Vec& b1, double lambda) {
  if (b1.minCoeff() < 0.0)
    throw ValidationError("make_household: negative expenditure share");
  const double total = b1.sum();
  if (!(total > 0.0))
    throw ValidationError("make_household: shares sum to zero");
  HouseholdModel hh;
  hh.mu = b1 / total;
  hh.lambda = lambda;
  return hh;
}

inline double price_index(const Vec& p, const HouseholdModel& hh) {
  if (p.size() != hh.mu.size())
    throw ValidationError("price_index: dimension mismatch");
  if (p.minCoeff() <= 0.0)
    throw ValidationError("price_index: prices must be positive");
  if (std::abs(hh.lambda) < kGammaEps)
    return std::exp(hh.mu.dot(p.array().log().matrix()));
  double u = 0.0;
  for (int i = 0; i < p.size(); ++i)
    u += hh.mu[i] * std::expm1(hh.lambda * std::log(p[i]));
  return std::exp(std::log1p(u) / hh.lambda);
}

inline Vec expenditure_shares(const Vec& p, const HouseholdModel& hh) {
  const double psi = price_index(p, hh);
  if (std::abs(hh.lambda) < kGammaEps) return hh.mu;
  Vec b(p.size());
  for (int i = 0; i < p.size(); ++i)
    b[i] = hh.mu[i] * std::pow(p[i] / psi, hh.lambda);
  return b;
}

struct LambdaEstimate {
  double lambda = 0.0;
  double intercept = 0.0;
  double se_lambda = 0.0;
  double se_intercept = 0.0;
  int n_used = 0;
  std::vector<int> dropped;  // input indices excluded for zero consumption

  // Weighted-2SLS diagnostics (statistic plus degrees of freedom).
  double first_stage_f = 0.0;
  int f_df1 = 0, f_df2 = 0;
  double sargan = 0.0;    // chi-square, overid_df
  double basmann = 0.0;   // chi-square, overid_df
  int overid_df = 0;
  double durbin = 0.0;    // chi-square(1)
  double wu_hausman = 0.0;
  int wh_df1 = 0, wh_df2 = 0;
};

// Weighted 2SLS of dln b on dln p with instruments (dln tau, exp(dln tau)).
// Items with zero consumption in either period are dropped with a warning.
inline LambdaEstimate estimate_lambda(const Vec& b0, const Vec& b1,
                                      const Vec& p0, const Vec& p1,
                                      const Vec& dln_tau) {
  const int n_all = static_cast<int>(b0.size());
  if (b1.size() != n_all || p0.size() != n_all || p1.size() != n_all ||
      dln_tau.size() != n_all)
    throw ValidationError("estimate_lambda: input lengths differ");
  LambdaEstimate est;
  std::vector<int> keep;
  for (int i = 0; i < n_all; ++i) {
    if (b0[i] > 0.0 && b1[i] > 0.0) {
      if (!(p0[i] > 0.0 && p1[i] > 0.0))
        throw ValidationError("estimate_lambda: non-positive price at item " +
                              std::to_string(i));
      keep.push_back(i);
    } else {
      est.dropped.push_back(i);
    }
  }
  if (!est.dropped.empty())
    warn("estimate_lambda: dropped " + std::to_string(est.dropped.size()) +
         " item(s) with zero consumption in some period");
  const int n = static_cast<int>(keep.size());
  est.n_used = n;
  if (n < 4)
    throw ValidationError(
        "estimate_lambda: need at least 4 usable items for the "
        "overidentification diagnostics, have " +
        std::to_string(n));

  Vec y(n), x(n), wgt(n);
  Mat Z(n, 3), X(n, 2);
  for (int k = 0; k < n; ++k) {
    const int i = keep[k];
    y[k] = std::log(b1[i]) - std::log(b0[i]);
    x[k] = std::log(p1[i]) - std::log(p0[i]);
    const double nu =
        std::sqrt(1.0 / (b1[i] * b1[i]) + 1.0 / (b0[i] * b0[i]));
    wgt[k] = 1.0 / nu;
    X(k, 0) = wgt[k];
    X(k, 1) = wgt[k] * x[k];
    Z(k, 0) = wgt[k];
    Z(k, 1) = wgt[k] * dln_tau[i];
    Z(k, 2) = wgt[k] * std::exp(dln_tau[i]);
  }
  y = wgt.cwiseProduct(y);

  // Instrument cross-products and the projection onto span(Z).
  Eigen::ColPivHouseholderQR<Mat> zqr(Z);
  if (zqr.rank() < 3)
    throw ValidationError(
        "estimate_lambda: instrument matrix is rank-deficient");
  auto project = [&](const Vec& v) -> Vec { return Z * zqr.solve(v); };

  Mat Xh(n, 2);
  Xh.col(0) = project(X.col(0));
  Xh.col(1) = project(X.col(1));
  const Mat G = Xh.transpose() * Xh;  // = X' P X
  Eigen::FullPivLU<Mat> glu(G);
  if (!glu.isInvertible() || glu.rcond() < 1e-12)
    throw ValidationError(
        "estimate_lambda: regressor has no usable variation (X'PX singular)");
  const Vec beta = glu.solve(Xh.transpose() * y);
  est.intercept = beta[0];
  est.lambda = beta[1];
  const Vec resid = y - X * beta;
  const double sigma2 = resid.squaredNorm() / (n - 2);
  const Mat vcov = sigma2 * glu.inverse();
  est.se_intercept = std::sqrt(std::max(0.0, vcov(0, 0)));
  est.se_lambda = std::sqrt(std::max(0.0, vcov(1, 1)));

  // First-stage F of the excluded instruments.
  const Vec delta = zqr.solve(X.col(1));
  const Vec v_hat = X.col(1) - Z * delta;  // first-stage residuals
  const double rss_u = v_hat.squaredNorm();
  const double cw = X.col(1).dot(Z.col(0)) / Z.col(0).squaredNorm();
  const double rss_r = (X.col(1) - cw * Z.col(0)).squaredNorm();
  est.f_df1 = 2;
  est.f_df2 = n - 3;
  est.first_stage_f =
      rss_u > 0.0 ? ((rss_r - rss_u) / 2.0) / (rss_u / (n - 3)) : 0.0;

  // Overidentification: Sargan's n R^2 of the 2SLS residuals on the
  // instruments, and Basmann's small-sample variant.
  est.overid_df = 1;  // 2 excluded instruments, 1 endogenous regressor
  const double ee = resid.squaredNorm();
  if (ee > 0.0) {
    const double epe = project(resid).squaredNorm();
    est.sargan = n * epe / ee;
    est.basmann = (ee - epe) > 0.0 ? (n - 3) * epe / (ee - epe) : 0.0;
  }

  // Endogeneity: control-function regression y on [X, v_hat].
  Mat A(n, 3);
  A.leftCols(2) = X;
  A.col(2) = v_hat;
  const Vec bu = (A.transpose() * A).fullPivLu().solve(A.transpose() * y);
  const double rss_cf_u = (y - A * bu).squaredNorm();
  const Vec br = (X.transpose() * X).fullPivLu().solve(X.transpose() * y);
  const double rss_cf_r = (y - X * br).squaredNorm();
  est.wh_df1 = 1;
  est.wh_df2 = n - 3;
  est.wu_hausman =
      rss_cf_u > 0.0 ? (rss_cf_r - rss_cf_u) / (rss_cf_u / (n - 3)) : 0.0;
  est.durbin = rss_cf_r > 0.0 ? n * (rss_cf_r - rss_cf_u) / rss_cf_r : 0.0;
  return est;
}

}  // namespace cascade_ge
