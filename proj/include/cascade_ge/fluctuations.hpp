#pragma once

// Monte Carlo aggregate fluctuations.
//
// Sector log productivities are drawn iid N(0, sigma^2 * ell) -- sigma on
// an annual scale, ell the sampling interval in years -- and pushed through
// an economy's price response.  The aggregate (welfare-relevant) fluctuation
// of draw d is the negative mean log price,
//
//   F_d = -(1/J) sum_j ln p_j(tau_d),
//
// which reduces to the mean log shock for the Simple economy and to a fixed
// linear map of the shocks for Cobb-Douglas (hence exactly normal output).
// Leontief and CCES responses are nonlinear, so their distributions pick up
// skewness and excess kurtosis; moments are usually reported on the
// difference series against the Cobb-Douglas benchmark.

#include "cascade_ge/common.hpp"
#include "cascade_ge/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace cascade_ge {

// Default shock scale: 10% annual volatility observed at hourly frequency
// (8760 hours per year), about 1068 ppm per step.
inline constexpr double kDefaultSigma = 0.10;
inline constexpr double kHoursPerYear = 8760.0;
inline constexpr int kDefaultDraws = 300;

struct ShockMatrix {
  Mat ln_tau;  // D x J
  double sigma = kDefaultSigma;
  double ell = 1.0 / kHoursPerYear;  // years
  std::uint64_t seed = 0;

  int draws() const { return static_cast<int>(ln_tau.rows()); }
  int sectors() const { return static_cast<int>(ln_tau.cols()); }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

// Deterministic independent substream per draw: draw d is generated by a
// fresh engine keyed on (seed, d), so the matrix does not depend on thread
// count and any draw can be reproduced in isolation.
inline ShockMatrix draw_shocks(int J, int D, double sigma, double ell,
                               std::uint64_t seed) {
  if (J < 1 || D < 1) throw ValidationError("draw_shocks: J and D must be positive");
  if (sigma < 0.0 || ell <= 0.0)
    throw ValidationError("draw_shocks: sigma must be >= 0 and ell > 0");
  ShockMatrix sh;
  sh.sigma = sigma;
  sh.ell = ell;
  sh.seed = seed;
  sh.ln_tau.resize(D, J);
  const double sd = sigma * std::sqrt(ell);
  parallel_for(D, [&](int d) {
    std::mt19937_64 eng(detail::splitmix64(seed ^ detail::splitmix64(d + 1)));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int j = 0; j < J; ++j) sh.ln_tau(d, j) = sd * normal(eng);
  });
  return sh;
}

struct FluctuationSeries {
  Kind kind = Kind::Simple;
  Vec values;                    // length D; NaN where the solver failed
  std::vector<int> failed;       // indices of failed draws

  int draws() const { return static_cast<int>(values.size()); }
};

// Aggregate fluctuation series of one economy kind under a shared shock
// matrix.  Cobb-Douglas and Leontief use their closed forms (their fixed
// points are linear-algebraic); CCES solves the fixed point per draw.
// Failed draws (Neumann violations, non-convergence) are recorded and
// excluded from moments, never silently dropped.
inline FluctuationSeries simulate_aggregate(const Economy& econ,
                                            const ShockMatrix& shocks,
                                            const SolverConfig& cfg = {}) {
  const int D = shocks.draws();
  const int J = shocks.sectors();
  if (econ.J != J)
    throw ValidationError("simulate_aggregate: economy and shocks disagree on J");
  FluctuationSeries out;
  out.kind = econ.kind;
  out.values = Vec::Constant(D, std::numeric_limits<double>::quiet_NaN());
  switch (econ.kind) {
    case Kind::Simple:
      out.values = shocks.ln_tau.rowwise().mean();
      break;
    case Kind::CobbDouglas: {
      // F_d = ln tau_d . c with (I - A) c = 1/J (row-vector convention).
      if (detail::spectral_radius_nonneg(econ.reference.s) >= 1.0 - 1e-12)
        throw SingularSystemError(
            "simulate_aggregate: spectral radius of A is not below one");
      const Mat m = Mat::Identity(J, J) - econ.reference.s;
      const Vec c = m.partialPivLu().solve(Vec::Constant(J, 1.0 / J));
      out.values = shocks.ln_tau * c;
      break;
    }
    case Kind::Leontief: {
      std::vector<std::uint8_t> ok(D, 0);
      parallel_for(D, [&](int d) {
        const Vec tau = shocks.ln_tau.row(d).array().exp();
        try {
          const Vec p = closed_form_prices(econ, tau);
          out.values[d] = -p.array().log().mean();
          ok[d] = 1;
        } catch (const SingularSystemError&) {
          // leave NaN
        }
      });
      for (int d = 0; d < D; ++d)
        if (!ok[d]) out.failed.push_back(d);
      break;
    }
    case Kind::CCES: {
      std::vector<std::uint8_t> ok(D, 0);
      parallel_for(D, [&](int d) {
        const Vec tau = shocks.ln_tau.row(d).array().exp();
        const EquilibriumState st = solve_equilibrium(econ, tau, 1.0, 1.0, cfg);
        if (st.converged) {
          out.values[d] = -st.p.array().log().mean();
          ok[d] = 1;
        }
      });
      for (int d = 0; d < D; ++d)
        if (!ok[d]) out.failed.push_back(d);
      break;
    }
  }
  return out;
}

struct Moments {
  int n_used = 0;
  int excluded = 0;
  double mean = 0.0;
  double sd = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

struct Summary {
  Moments moments;
  // (theoretical normal quantile, sample quantile) pairs, sample sorted.
  std::vector<std::array<double, 2>> qq;
};

// Inverse standard normal CDF (Acklam's rational approximation, relative
// error below 1.2e-9 -- ample for QQ coordinates).
inline double norm_quantile(double u) {
  if (!(u > 0.0 && u < 1.0))
    throw ValidationError("norm_quantile: argument must be in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double q, r;
  if (u < plow) {
    q = std::sqrt(-2.0 * std::log(u));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (u > phigh) {
    q = std::sqrt(-2.0 * std::log(1.0 - u));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = u - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Population moments and normal QQ pairs.  When a reference series is
// given, statistics are taken on the per-draw difference (series minus
// reference); draws failed in either series are excluded and counted.
inline Summary summarize(const FluctuationSeries& series,
                         const FluctuationSeries* reference = nullptr) {
  if (reference && reference->draws() != series.draws())
    throw ValidationError("summarize: series lengths differ");
  std::vector<double> x;
  x.reserve(series.draws());
  int excluded = 0;
  for (int d = 0; d < series.draws(); ++d) {
    double v = series.values[d];
    if (reference) v -= reference->values[d];
    if (std::isnan(v))
      ++excluded;
    else
      x.push_back(v);
  }
  Summary out;
  out.moments.excluded = excluded;
  out.moments.n_used = static_cast<int>(x.size());
  if (x.empty()) return out;
  const int n = out.moments.n_used;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double e = v - mean;
    m2 += e * e;
    m3 += e * e * e;
    m4 += e * e * e * e;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  out.moments.mean = mean;
  out.moments.sd = std::sqrt(m2);
  out.moments.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  out.moments.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  std::sort(x.begin(), x.end());
  out.qq.reserve(n);
  for (int i = 0; i < n; ++i)
    out.qq.push_back({norm_quantile((i + 0.5) / n), x[i]});
  return out;
}

}  // namespace cascade_ge
