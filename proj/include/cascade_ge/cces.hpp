#pragma once

// Cascaded-CES (CCES) unit cost functions, first-order-condition cost
// shares, exact two-period estimation, multi-period least squares, and the
// Sato-Vartia compound price index.
//
// A sector's technology is a chain of binary CES nests.  Nest 0 aggregates
// the primary factors, capital (price r, weight alpha[0]) against labor
// (price w), into a compound with price pi_1.  Nest n >= 1 then aggregates
// the n-th intermediate factor (ordered most upstream first) against the
// previous compound:
//
//   pi_{n+1} = ( alpha_n p_n^gamma_n + (1-alpha_n) pi_n^gamma_n )^(1/gamma_n)
//
// with the log-linear (Cobb-Douglas) limit p^alpha pi^(1-alpha) taken when
// |gamma| < kGammaEps.  The unit cost of output is the final compound price
// divided by the sector's productivity level tau; the elasticity of
// substitution at nest n is 1 - gamma_n.

#include "cascade_ge/common.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace cascade_ge {

struct CcesTechnology {
  // Indices of the active intermediate factors into whatever price vector
  // the technology is evaluated against, innermost (most upstream) first.
  std::vector<int> factors;
  // Flags over the factor universe offered at estimation time; factors
  // absent in both periods are deactivated rather than given a nest.
  std::vector<std::uint8_t> active;
  // Per-nest parameters, entry 0 = the primary (K,L) nest.
  Vec alpha;
  Vec gamma;

  int nests() const { return static_cast<int>(alpha.size()); }
  int n_factors() const { return static_cast<int>(factors.size()); }
};

// Prices faced by one sector: intermediate factor prices are read out of
// `p` at the technology's factor indices.
struct UnitCost {
  double q = 0.0;      // unit cost C(p, r, w) / tau
  double ln_final = 0.0;  // ln pi_N (before dividing by tau)
  Vec pi;              // compound prices pi_1 .. pi_N
};

// Cost shares of one sector implied by Shephard's lemma, aligned with the
// technology's factor list; s, s_cap, and s_lab sum to one.
struct SectorShares {
  Vec s;
  double s_cap = 0.0;
  double s_lab = 0.0;
};

// One CES nest in price space.  The expm1/log1p form keeps full relative
// accuracy through the gamma -> 0 crossover.
inline double ces_ln_nest(double ln_p, double ln_pi, double alpha,
                          double gamma) {
  if (std::abs(gamma) < kGammaEps)
    return alpha * ln_p + (1.0 - alpha) * ln_pi;
  const double a = gamma * ln_p;
  const double b = gamma * ln_pi;
  if (std::max(std::abs(a), std::abs(b)) > 50.0) {
    // Shifted evaluation for extreme exponents (max-like nests): factor out
    // the dominant term so neither exp can overflow.
    const double m = std::max(a, b);
    return (m + std::log(alpha * std::exp(a - m) +
                         (1.0 - alpha) * std::exp(b - m))) /
           gamma;
  }
  const double u = alpha * std::expm1(a) + (1.0 - alpha) * std::expm1(b);
  return std::log1p(u) / gamma;
}

// Single-nest unit cost c(p, pi; alpha, gamma).
inline double ces_unit_cost(double p, double pi, double alpha, double gamma) {
  if (!(p > 0.0) || !(pi > 0.0))
    throw ValidationError("ces_unit_cost: prices must be positive");
  return std::exp(ces_ln_nest(std::log(p), std::log(pi), alpha, gamma));
}

namespace detail {

// Log compound prices along the cascade: entry 0 is ln w (the base of the
// chain), entry n >= 1 is ln pi_n.
template <class PriceAt>
Vec compound_ln(const CcesTechnology& tech, PriceAt&& price_at, double r,
                double w) {
  const int N = tech.nests();
  Vec ln_pi(N + 1);
  ln_pi[0] = std::log(w);
  double cur = ln_pi[0];
  for (int n = 0; n < N; ++n) {
    const double pn = n == 0 ? r : price_at(tech.factors[n - 1]);
    if (!(pn > 0.0))
      throw ValidationError("cces: non-positive factor price in nest " +
                            std::to_string(n));
    cur = ces_ln_nest(std::log(pn), cur, tech.alpha[n], tech.gamma[n]);
    ln_pi[n + 1] = cur;
  }
  return ln_pi;
}

}  // namespace detail

inline UnitCost cces_unit_cost(const CcesTechnology& tech, const Vec& p,
                               double r, double w, double tau = 1.0) {
  const Vec ln_pi =
      detail::compound_ln(tech, [&](int i) { return p[i]; }, r, w);
  UnitCost out;
  out.ln_final = ln_pi[tech.nests()];
  out.q = std::exp(out.ln_final) / tau;
  out.pi = ln_pi.tail(tech.nests()).array().exp();
  return out;
}

// Shephard's lemma shares.  Within nest n the factor takes
//   phi_n  = alpha_n (p_n / pi_{n+1})^gamma_n
// and the compound keeps phi'_n = 1 - phi_n; the factor's overall share is
// phi_n times the product of the outer nests' compound shares.
inline SectorShares foc_shares(const CcesTechnology& tech, const Vec& p,
                               double r, double w) {
  const int N = tech.nests();
  const Vec ln_pi =
      detail::compound_ln(tech, [&](int i) { return p[i]; }, r, w);
  Vec phi(N);
  for (int n = 0; n < N; ++n) {
    if (std::abs(tech.gamma[n]) < kGammaEps) {
      phi[n] = tech.alpha[n];
    } else {
      const double ln_pn =
          n == 0 ? std::log(r) : std::log(p[tech.factors[n - 1]]);
      const double e = tech.gamma[n] * (ln_pn - ln_pi[n + 1]);
      // The log-space form avoids 0 * inf when extreme parameters push the
      // exponential past the double range.
      phi[n] = e > 700.0 ? std::exp(std::log(tech.alpha[n]) + e)
                         : tech.alpha[n] * std::exp(e);
    }
  }
  SectorShares out;
  out.s.resize(tech.n_factors());
  double tail = 1.0;  // product of compound shares of nests outer than n
  for (int n = N - 1; n >= 0; --n) {
    const double share = phi[n] * tail;
    if (n == 0)
      out.s_cap = share;
    else
      out.s[n - 1] = share;
    // Compound share phi'_n computed as the exact complement so the column
    // telescopes to one.
    tail *= 1.0 - phi[n];
  }
  out.s_lab = tail;
  return out;
}

// ---------------------------------------------------------------------------
// Observed sector data

// Shares and prices of one sector in two linked periods.  Intermediate
// factors must already be arranged in cascading order (innermost first);
// labor's share is the residual 1 - sum(share) - s_cap.
struct TwoPeriodSectorData {
  std::array<Vec, 2> share;   // intermediate-factor cost shares
  std::array<Vec, 2> price;   // factor prices, same alignment
  std::array<double, 2> s_cap{}, r{}, w{}, q{};

  int n_factors() const { return static_cast<int>(share[0].size()); }
};

// T-period generalization used by the least-squares fit.
struct MultiPeriodSectorData {
  Mat share;  // T x m
  Mat price;  // T x m
  Vec s_cap, r, w, q;

  int periods() const { return static_cast<int>(share.rows()); }
  int n_factors() const { return static_cast<int>(share.cols()); }

  static MultiPeriodSectorData from(const TwoPeriodSectorData& d) {
    MultiPeriodSectorData md;
    const int m = d.n_factors();
    md.share.resize(2, m);
    md.price.resize(2, m);
    md.s_cap.resize(2);
    md.r.resize(2);
    md.w.resize(2);
    md.q.resize(2);
    for (int t = 0; t < 2; ++t) {
      md.share.row(t) = d.share[t].transpose();
      md.price.row(t) = d.price[t].transpose();
      md.s_cap[t] = d.s_cap[t];
      md.r[t] = d.r[t];
      md.w[t] = d.w[t];
      md.q[t] = d.q[t];
    }
    return md;
  }
};

namespace detail {

// Pre-digested share structure for the estimators: active factors only,
// single-period zeros floored, and the nested denominators
//   D_n = 1 - sum of shares from nest n outward
// so that phi_n = s_n / D_{n+1}, phi'_n = D_n / D_{n+1}.
struct NestedShares {
  std::vector<int> active_pos;     // positions of active factors in the input
  std::vector<std::uint8_t> active;
  Mat s;       // T x (nests): column 0 = capital, then active factors
  Mat ln_p;    // T x (nests): ln r, then active factor log prices
  Mat D;       // T x (nests+1): D[n] as above; D[nests] = 1 - nothing outward
  Vec ln_w;    // T
  int nests = 0;
  bool cap_active = true;  // capital share positive in some period
  bool lab_active = true;  // residual labor share positive in some period

  double phi(int t, int n) const { return s(t, n) / D(t, n + 1); }
  double phi_comp(int t, int n) const { return D(t, n) / D(t, n + 1); }
  double phi_ratio(int t, int n) const { return s(t, n) / D(t, n); }
};

inline NestedShares digest_shares(const MultiPeriodSectorData& d,
                                  int sector_label) {
  const int T = d.periods();
  const int m = d.n_factors();
  const std::string who =
      sector_label >= 0 ? "sector " + std::to_string(sector_label) : "sector";
  NestedShares ns;
  ns.active.assign(m, 0);
  for (int i = 0; i < m; ++i) {
    bool any = false, all = true;
    for (int t = 0; t < T; ++t) {
      if (d.share(t, i) > 0.0)
        any = true;
      else
        all = false;
      if (d.share(t, i) < 0.0)
        throw ValidationError(who + ": negative cost share");
    }
    if (any) {
      ns.active[i] = 1;
      ns.active_pos.push_back(i);
      if (!all)
        warn(who + ", factor " + std::to_string(i) +
             ": zero share in one period floored at 1e-9");
    }
  }
  const int n_act = static_cast<int>(ns.active_pos.size());
  ns.nests = n_act + 1;
  ns.s.resize(T, ns.nests);
  ns.ln_p.resize(T, ns.nests);
  ns.D.resize(T, ns.nests + 1);
  ns.ln_w.resize(T);
  bool cap_any = false;
  for (int t = 0; t < T; ++t)
    if (d.s_cap[t] > 0.0) cap_any = true;
  ns.cap_active = cap_any;
  for (int t = 0; t < T; ++t) {
    if (d.s_cap[t] < 0.0) throw ValidationError(who + ": negative capital share");
    double s_kt = d.s_cap[t];
    if (cap_any && s_kt == 0.0) {
      warn(who + ": zero capital share in one period floored at 1e-9");
      s_kt = kShareFloor;
    }
    ns.s(t, 0) = s_kt;
    ns.ln_p(t, 0) = std::log(d.r[t]);
    for (int k = 0; k < n_act; ++k) {
      double sv = d.share(t, ns.active_pos[k]);
      if (sv == 0.0) sv = kShareFloor;
      ns.s(t, k + 1) = sv;
      ns.ln_p(t, k + 1) = std::log(d.price(t, ns.active_pos[k]));
    }
    ns.ln_w[t] = std::log(d.w[t]);
    ns.D(t, ns.nests) = 1.0;
    for (int n = ns.nests - 1; n >= 0; --n)
      ns.D(t, n) = ns.D(t, n + 1) - ns.s(t, n);
    if (ns.D(t, 0) < 0.0)
      throw ValidationError(who + ": cost shares sum beyond one (labor share < 0)");
  }
  // Labor is the base of the chain; a labor share that vanishes in every
  // period turns the primary nest into capital alone (alpha_0 = 1), while a
  // single-period zero is floored like any other share.
  bool lab_any = false;
  for (int t = 0; t < T; ++t)
    if (ns.D(t, 0) > 0.0) lab_any = true;
  ns.lab_active = lab_any;
  if (!cap_any && !lab_any)
    throw ValidationError(who + ": no primary factor share in any period");
  for (int t = 0; t < T; ++t) {
    if (lab_any && ns.D(t, 0) == 0.0) {
      warn(who + ": zero labor share in one period floored at 1e-9");
      ns.D(t, 0) = kShareFloor;
    }
  }
  return ns;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Exact two-period estimation
//
// With two observations each nest's CES pair (alpha_n, gamma_n) is exactly
// identified from the share-ratio line
//
//   ln[ s_n / (1 - sum_{k>=n} s_k) ] = ln(alpha_n/(1-alpha_n))
//                                      + gamma_n ln(p_n / pi_n)
//
// solved nest by nest from the inside out, the compound price pi_n being
// rebuilt from the already-estimated inner nests.  By construction the
// fitted technology reproduces both periods' share columns exactly.

inline CcesTechnology estimate_two_point(const TwoPeriodSectorData& data,
                                         int sector_label = -1) {
  const auto ns = detail::digest_shares(MultiPeriodSectorData::from(data),
                                        sector_label);
  const int N = ns.nests;
  CcesTechnology tech;
  tech.active = ns.active;
  tech.factors = ns.active_pos;
  tech.alpha.resize(N);
  tech.gamma.resize(N);
  std::array<double, 2> ln_pi{ns.ln_w[0], ns.ln_w[1]};
  constexpr double kDegenEps = 1e-12;
  for (int n = 0; n < N; ++n) {
    if (n == 0 && (!ns.cap_active || !ns.lab_active)) {
      // Degenerate primary nest: one primary factor carries the whole base.
      tech.alpha[0] = ns.cap_active ? 1.0 : 0.0;
      tech.gamma[0] = 0.0;
      for (int t = 0; t < 2; ++t)
        ln_pi[t] = ns.cap_active ? ns.ln_p(t, 0) : ln_pi[t];
      continue;
    }
    const double x0 = ns.ln_p(0, n) - ln_pi[0];
    const double x1 = ns.ln_p(1, n) - ln_pi[1];
    const double y0 = std::log(ns.phi_ratio(0, n));
    const double y1 = std::log(ns.phi_ratio(1, n));
    double alpha, gamma;
    if (std::abs(x1 - x0) < kDegenEps) {
      if (std::abs(y1 - y0) < kDegenEps) {
        // Relative price and share ratio both unchanged: the nest is
        // underdetermined; fall back to the Cobb-Douglas pair that still
        // restores both periods.
        gamma = 0.0;
        alpha = ns.phi(1, n);
      } else {
        throw DegenerateNestError(
            sector_label, n,
            "nest " + std::to_string(n) +
                ": share ratio moved while the relative price did not; no CES "
                "pair rationalizes the data");
      }
    } else {
      gamma = (y1 - y0) / (x1 - x0);
      const double logit = (x1 * y0 - x0 * y1) / (x1 - x0);
      alpha = 1.0 / (1.0 + std::exp(-logit));
    }
    tech.alpha[n] = alpha;
    tech.gamma[n] = gamma;
    for (int t = 0; t < 2; ++t)
      ln_pi[t] = ces_ln_nest(ns.ln_p(t, n), ln_pi[t], alpha, gamma);
  }
  return tech;
}

// ---------------------------------------------------------------------------
// Multi-period least squares
//
// With T > 2 observations the share-ratio equations are overdetermined; the
// parameters minimize the stacked squared residuals, with the compound
// prices rebuilt from the current parameters inside the objective.  alpha
// is optimized through a logit transform to stay inside (0,1).

struct MultipointOptions {
  int max_iter = 500;
  double grad_tol = 1e-10;
};

struct MultipointResult {
  CcesTechnology tech;
  double ssr = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double clamp_logit(double a) {
  const double eps = 1e-12;
  return std::log(std::min(1.0 - eps, std::max(eps, a)) /
                  (1.0 - std::min(1.0 - eps, std::max(eps, a))));
}

inline double multipoint_ssr(const NestedShares& ns, const Vec& theta) {
  const int T = static_cast<int>(ns.ln_w.size());
  const int N = ns.nests;
  const bool core_fixed = !ns.cap_active || !ns.lab_active;
  double ssr = 0.0;
  for (int t = 0; t < T; ++t) {
    double ln_pi = ns.ln_w[t];
    for (int n = 0; n < N; ++n) {
      if (n == 0 && core_fixed) {
        if (ns.cap_active) ln_pi = ns.ln_p(t, 0);
        continue;
      }
      const double z = theta[2 * n];
      const double gamma = theta[2 * n + 1];
      const double alpha = 1.0 / (1.0 + std::exp(-z));
      const double x = ns.ln_p(t, n) - ln_pi;
      const double resid = std::log(ns.phi_ratio(t, n)) - z - gamma * x;
      ssr += resid * resid;
      ln_pi = ces_ln_nest(ns.ln_p(t, n), ln_pi, alpha, gamma);
    }
  }
  return ssr;
}

}  // namespace detail

// Nest-by-nest initializer: ordinary least squares on each nest's share
// ratio line, compound prices carried forward from the inner fits.  This is
// the "independent fits" benchmark; the joint minimization below can only
// improve on its SSR.
inline MultipointResult nestwise_ols(const MultiPeriodSectorData& data,
                                     int sector_label = -1) {
  const auto ns = detail::digest_shares(data, sector_label);
  const int T = data.periods();
  const int N = ns.nests;
  MultipointResult out;
  out.tech.active = ns.active;
  out.tech.factors = ns.active_pos;
  out.tech.alpha.resize(N);
  out.tech.gamma.resize(N);
  Vec ln_pi = ns.ln_w;
  for (int n = 0; n < N; ++n) {
    if (n == 0 && (!ns.cap_active || !ns.lab_active)) {
      out.tech.alpha[0] = ns.cap_active ? 1.0 : 0.0;
      out.tech.gamma[0] = 0.0;
      if (ns.cap_active)
        for (int t = 0; t < T; ++t) ln_pi[t] = ns.ln_p(t, 0);
      continue;
    }
    Vec x(T), y(T);
    for (int t = 0; t < T; ++t) {
      x[t] = ns.ln_p(t, n) - ln_pi[t];
      y[t] = std::log(ns.phi_ratio(t, n));
    }
    const double xm = x.mean(), ym = y.mean();
    const double vxx = (x.array() - xm).square().sum();
    double gamma, logit;
    if (vxx < 1e-24) {
      gamma = 0.0;
      logit = ym;
    } else {
      gamma = ((x.array() - xm) * (y.array() - ym)).sum() / vxx;
      logit = ym - gamma * xm;
    }
    const double alpha = 1.0 / (1.0 + std::exp(-logit));
    out.tech.alpha[n] = alpha;
    out.tech.gamma[n] = gamma;
    out.ssr += (y.array() - logit - gamma * x.array()).square().sum();
    for (int t = 0; t < T; ++t)
      ln_pi[t] = ces_ln_nest(ns.ln_p(t, n), ln_pi[t], alpha, gamma);
  }
  out.converged = true;
  return out;
}

inline MultipointResult estimate_multipoint(const MultiPeriodSectorData& data,
                                            const CcesTechnology& init,
                                            const MultipointOptions& opt = {},
                                            int sector_label = -1) {
  const auto ns = detail::digest_shares(data, sector_label);
  const int N = ns.nests;
  if (init.nests() != N)
    throw ValidationError(
        "estimate_multipoint: init has " + std::to_string(init.nests()) +
        " nests, data implies " + std::to_string(N));
  Vec theta(2 * N);
  for (int n = 0; n < N; ++n) {
    theta[2 * n] = detail::clamp_logit(init.alpha[n]);
    theta[2 * n + 1] = init.gamma[n];
  }
  MinimizeOptions mopt;
  mopt.max_iter = opt.max_iter;
  mopt.grad_tol = opt.grad_tol;
  const auto res = minimize_bfgs(
      [&](const Vec& th) { return detail::multipoint_ssr(ns, th); }, theta,
      mopt);
  MultipointResult out;
  out.tech.active = ns.active;
  out.tech.factors = ns.active_pos;
  out.tech.alpha.resize(N);
  out.tech.gamma.resize(N);
  for (int n = 0; n < N; ++n) {
    out.tech.alpha[n] = 1.0 / (1.0 + std::exp(-res.x[2 * n]));
    out.tech.gamma[n] = res.x[2 * n + 1];
  }
  if (!ns.cap_active || !ns.lab_active) {
    out.tech.alpha[0] = ns.cap_active ? 1.0 : 0.0;
    out.tech.gamma[0] = 0.0;
  }
  out.ssr = res.value;
  out.iterations = res.iterations;
  out.converged = res.converged;
  return out;
}

// ---------------------------------------------------------------------------
// Sato-Vartia compound price index
//
// The log change of the final compound price aggregated with logarithmic
// mean weights of the within-nest shares:
//
//   w_n = L(phi_n1, phi_n0) / [ L(phi_n1, phi_n0) + L(phi'_n1, phi'_n0) ]
//   dln pi_{n+1} = w_n dln p_n + (1 - w_n) dln pi_n
//
// For data generated by (or exactly fitted to) a CCES technology this
// reproduces dln C exactly, which is what makes the two-period estimator a
// superlative index.

inline double sato_vartia_index(const TwoPeriodSectorData& data,
                                int sector_label = -1) {
  const auto ns = detail::digest_shares(MultiPeriodSectorData::from(data),
                                        sector_label);
  double dln_pi = ns.ln_w[1] - ns.ln_w[0];
  for (int n = 0; n < ns.nests; ++n) {
    double wgt;
    if (n == 0 && (!ns.cap_active || !ns.lab_active))
      wgt = ns.cap_active ? 1.0 : 0.0;  // degenerate primary nest
    else {
      const double lf = log_mean(ns.phi(1, n), ns.phi(0, n));
      const double lc = log_mean(ns.phi_comp(1, n), ns.phi_comp(0, n));
      wgt = lf / (lf + lc);
    }
    dln_pi = wgt * (ns.ln_p(1, n) - ns.ln_p(0, n)) + (1.0 - wgt) * dln_pi;
  }
  return dln_pi;
}

// ---------------------------------------------------------------------------
// TFP growth

// Superlative measurement under the restoring CCES: the compound price of
// the input bundle moves with dln pi_N; productivity growth is what the
// output price fails to follow.
inline double tfpg_cces(const TwoPeriodSectorData& data,
                        int sector_label = -1) {
  return sato_vartia_index(data, sector_label) -
         (std::log(data.q[1]) - std::log(data.q[0]));
}

// Conventional Tornqvist/translog benchmark with arithmetic-mean shares.
inline double tfpg_translog(const TwoPeriodSectorData& data) {
  double index = 0.0;
  for (int i = 0; i < data.n_factors(); ++i) {
    const double sbar = 0.5 * (data.share[1][i] + data.share[0][i]);
    if (sbar > 0.0)
      index += sbar * (std::log(data.price[1][i]) - std::log(data.price[0][i]));
  }
  const double sk = 0.5 * (data.s_cap[1] + data.s_cap[0]);
  const double sl0 = 1.0 - data.share[0].sum() - data.s_cap[0];
  const double sl1 = 1.0 - data.share[1].sum() - data.s_cap[1];
  index += sk * (std::log(data.r[1]) - std::log(data.r[0]));
  index += 0.5 * (sl0 + sl1) * (std::log(data.w[1]) - std::log(data.w[0]));
  return index - (std::log(data.q[1]) - std::log(data.q[0]));
}

}  // namespace cascade_ge
