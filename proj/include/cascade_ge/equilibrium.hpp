#pragma once

// Production economies and their price equilibria.
//
// An economy is J sectors, each producing one commodity with unit cost
// C_j(p, r, w); under marginal-cost pricing and sectoral productivity tau_j
// equilibrium prices solve the fixed point
//
//   p_j = C_j(p, r, w) / tau_j .
//
// Four technology kinds share this interface: the restoring CCES (estimated
// nest by nest from a linked table), Cobb-Douglas and Leontief benchmarks
// pinned to the same reference cost shares, and the non-interacting Simple
// economy p = 1/tau.  Cobb-Douglas and Leontief admit closed forms in the
// log and level domains respectively, which double as oracles for the
// iterative solver.

#include "cascade_ge/cascade.hpp"
#include "cascade_ge/cces.hpp"
#include "cascade_ge/common.hpp"
#include "cascade_ge/iotable.hpp"

#include <array>
#include <string>
#include <vector>

namespace cascade_ge {

enum class Kind { CCES, CobbDouglas, Leontief, Simple };

inline std::string to_string(Kind k) {
  switch (k) {
    case Kind::CCES: return "cces";
    case Kind::CobbDouglas: return "cd";
    case Kind::Leontief: return "leontief";
    case Kind::Simple: return "simple";
  }
  return "?";
}

inline Kind kind_from_string(const std::string& s) {
  if (s == "cces") return Kind::CCES;
  if (s == "cd" || s == "cobb-douglas") return Kind::CobbDouglas;
  if (s == "leontief") return Kind::Leontief;
  if (s == "simple") return Kind::Simple;
  throw ValidationError("unknown economy kind '" + s + "'");
}

struct Economy {
  Kind kind = Kind::CCES;
  int J = 0;
  std::vector<CcesTechnology> techs;  // CCES only; factor indices are global
  ShareMatrix reference;              // reference-period cost shares

  int size() const { return J; }

  static Economy cces(std::vector<CcesTechnology> techs, ShareMatrix ref) {
    Economy e;
    e.kind = Kind::CCES;
    e.J = ref.size();
    e.techs = std::move(techs);
    e.reference = std::move(ref);
    return e;
  }
  static Economy cobb_douglas(ShareMatrix ref) {
    Economy e;
    e.kind = Kind::CobbDouglas;
    e.J = ref.size();
    e.reference = std::move(ref);
    return e;
  }
  static Economy leontief(ShareMatrix ref) {
    Economy e;
    e.kind = Kind::Leontief;
    e.J = ref.size();
    e.reference = std::move(ref);
    return e;
  }
  static Economy simple(int J) {
    Economy e;
    e.kind = Kind::Simple;
    e.J = J;
    return e;
  }
};

struct SolverConfig {
  double tol = 1e-12;   // sup-norm fixed-point defect in logs
  int max_iter = 10000;
  double omega = 1.0;   // damping; auto-halved on oscillation (<= 6 times)
};

struct EquilibriumState {
  Vec p;
  int iterations = 0;
  double residual = 0.0;  // sup_j |ln p_j - ln(C_j/tau_j)| at the returned p
  bool converged = false;
  ShareMatrix S;          // cost shares at the returned prices
};

// Unit cost of sector j at prices (p, r, w); tau not applied.
inline double unit_cost(const Economy& econ, int j, const Vec& p, double r,
                        double w) {
  switch (econ.kind) {
    case Kind::CCES:
      return cces_unit_cost(econ.techs[j], p, r, w).q;
    case Kind::CobbDouglas: {
      double ln_c = econ.reference.s_cap[j] * std::log(r) +
                    econ.reference.s_lab[j] * std::log(w);
      for (int i = 0; i < econ.J; ++i) {
        const double a = econ.reference.s(i, j);
        if (a > 0.0) ln_c += a * std::log(p[i]);
      }
      return std::exp(ln_c);
    }
    case Kind::Leontief:
      return econ.reference.s.col(j).dot(p) + econ.reference.s_cap[j] * r +
             econ.reference.s_lab[j] * w;
    case Kind::Simple:
      return 1.0;
  }
  return 0.0;
}

inline Vec unit_costs(const Economy& econ, const Vec& p, double r, double w) {
  Vec c(econ.J);
  for (int j = 0; j < econ.J; ++j) c[j] = unit_cost(econ, j, p, r, w);
  return c;
}

// Cost shares of every sector at arbitrary prices:
//   S = <p, r, w> grad C <tau>^-1 <p>^-1 ,
// which reduces to the Shephard shares once p is an equilibrium of tau (the
// scale C_j/(tau_j p_j) is then one, so columns sum to one).
inline ShareMatrix network_shares(const Economy& econ, const Vec& p, double r,
                                  double w, const Vec& tau) {
  if (econ.kind == Kind::Simple)
    throw ValidationError("simple economy has no cost structure");
  const int J = econ.J;
  ShareMatrix sm;
  sm.s = Mat::Zero(J, J);
  sm.s_cap = Vec::Zero(J);
  sm.s_lab = Vec::Zero(J);
  for (int j = 0; j < J; ++j) {
    const double scale = unit_cost(econ, j, p, r, w) / (tau[j] * p[j]);
    switch (econ.kind) {
      case Kind::CCES: {
        const SectorShares sh = foc_shares(econ.techs[j], p, r, w);
        for (int k = 0; k < econ.techs[j].n_factors(); ++k)
          sm.s(econ.techs[j].factors[k], j) = sh.s[k] * scale;
        sm.s_cap[j] = sh.s_cap * scale;
        sm.s_lab[j] = sh.s_lab * scale;
        break;
      }
      case Kind::CobbDouglas:
        sm.s.col(j) = econ.reference.s.col(j) * scale;
        sm.s_cap[j] = econ.reference.s_cap[j] * scale;
        sm.s_lab[j] = econ.reference.s_lab[j] * scale;
        break;
      case Kind::Leontief:
        // grad C is the coefficient column itself.
        sm.s.col(j) = econ.reference.s.col(j).cwiseProduct(p) / (tau[j] * p[j]);
        sm.s_cap[j] = econ.reference.s_cap[j] * r / (tau[j] * p[j]);
        sm.s_lab[j] = econ.reference.s_lab[j] * w / (tau[j] * p[j]);
        break;
      case Kind::Simple:
        break;
    }
  }
  return sm;
}

// Damped fixed-point iteration from p = 1.  The convergence criterion is
// the defect of the *returned* iterate, so the post-condition
// sup|ln p - ln(C/tau)| < tol holds exactly on success.
inline EquilibriumState solve_equilibrium(const Economy& econ, const Vec& tau,
                                          double r, double w,
                                          const SolverConfig& cfg = {}) {
  const int J = econ.J;
  if (tau.size() != J)
    throw ValidationError("solve_equilibrium: tau has wrong length");
  if (tau.minCoeff() <= 0.0 || r <= 0.0 || w <= 0.0)
    throw ValidationError("solve_equilibrium: prices and tau must be positive");
  EquilibriumState st;
  if (econ.kind == Kind::Simple) {
    st.p = tau.cwiseInverse();
    st.converged = true;
    return st;
  }
  Vec p = Vec::Ones(J);
  Vec best_p = p;
  double best_defect = std::numeric_limits<double>::infinity();
  double omega = cfg.omega;
  double prev_defect = std::numeric_limits<double>::infinity();
  int rising = 0, halvings = 0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Vec target = unit_costs(econ, p, r, w).cwiseQuotient(tau);
    const double defect =
        (p.array().log() - target.array().log()).abs().maxCoeff();
    st.iterations = it;
    if (defect < best_defect) {
      best_defect = defect;
      best_p = p;
    }
    if (defect < cfg.tol) {
      st.converged = true;
      break;
    }
    if (defect > prev_defect && ++rising >= 2 && halvings < 6) {
      omega *= 0.5;  // oscillation guard
      ++halvings;
      rising = 0;
    }
    prev_defect = defect;
    p = (1.0 - omega) * p + omega * target;
  }
  st.p = st.converged ? p : best_p;
  st.residual = st.converged
                    ? (st.p.array().log() -
                       unit_costs(econ, st.p, r, w).cwiseQuotient(tau).array().log())
                          .abs()
                          .maxCoeff()
                    : best_defect;
  st.S = network_shares(econ, st.p, r, w, tau);
  return st;
}

namespace detail {

// Perron root of a nonnegative matrix by power iteration; exact enough for
// the Neumann-series checks.
inline double spectral_radius_nonneg(const Mat& m) {
  const int n = static_cast<int>(m.rows());
  if (n == 0) return 0.0;
  Vec v = Vec::Ones(n);
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vec w = m * v;
    const double norm = w.lpNorm<Eigen::Infinity>();
    if (norm == 0.0) return 0.0;
    w /= norm;
    const double delta = (w - v).lpNorm<Eigen::Infinity>();
    lambda = norm;
    v = w;
    if (delta < 1e-14) break;
  }
  return lambda;
}

}  // namespace detail

// Closed-form equilibrium prices.
//
//   Cobb-Douglas:  ln p = (-ln tau + a_K ln r + a_L ln w) [I - A]^-1
//   Leontief:      p (<tau> - A) = a_K r + a_L w
//
// in the row-vector convention (A is the reference intermediate block).
// Both require the Neumann-series condition (spectral radius of A, resp. of
// A <tau>^-1, below one); violations throw SingularSystemError.
inline Vec closed_form_prices(const Economy& econ, const Vec& tau,
                              double r = 1.0, double w = 1.0) {
  const int J = econ.J;
  if (tau.size() != J)
    throw ValidationError("closed_form_prices: tau has wrong length");
  switch (econ.kind) {
    case Kind::Simple:
      return tau.cwiseInverse();
    case Kind::CobbDouglas: {
      if (detail::spectral_radius_nonneg(econ.reference.s) >= 1.0 - 1e-12)
        throw SingularSystemError(
            "cobb-douglas closed form: spectral radius of A is not below one");
      const Vec b = -tau.array().log() +
                    econ.reference.s_cap.array() * std::log(r) +
                    econ.reference.s_lab.array() * std::log(w);
      const Mat m = Mat::Identity(J, J) - econ.reference.s;
      const Vec ln_p = m.transpose().partialPivLu().solve(b);
      return ln_p.array().exp();
    }
    case Kind::Leontief: {
      const Mat a_scaled =
          econ.reference.s * tau.cwiseInverse().asDiagonal();
      if (detail::spectral_radius_nonneg(a_scaled) >= 1.0 - 1e-12)
        throw SingularSystemError(
            "leontief closed form: Neumann condition violated (spectral "
            "radius of A <tau>^-1 is not below one)");
      const Vec rhs = econ.reference.s_cap * r + econ.reference.s_lab * w;
      const Mat m =
          Mat(tau.asDiagonal()) - econ.reference.s;
      const Vec p = m.transpose().partialPivLu().solve(rhs);
      if (p.minCoeff() <= 0.0)
        throw SingularSystemError(
            "leontief closed form: solution is not positive");
      return p;
    }
    case Kind::CCES:
      throw ValidationError("no closed form for the CCES economy");
  }
  throw ValidationError("unreachable");
}

// ---------------------------------------------------------------------------
// Estimation of a restoring CCES economy from a linked table

// Cascade-ordered active-factor view of one sector's two-period data.
struct SectorDataView {
  TwoPeriodSectorData data;
  std::vector<int> global;  // data factor k -> commodity index
};

inline SectorDataView sector_two_period_data(const LinkedIoTable& tab, int j,
                                             const std::vector<int>& perm) {
  const ShareMatrix s0 = cost_shares(tab, 0);
  const ShareMatrix s1 = cost_shares(tab, 1);
  SectorDataView view;
  for (int i : perm)
    if (s0.s(i, j) > 0.0 || s1.s(i, j) > 0.0) view.global.push_back(i);
  const int m = static_cast<int>(view.global.size());
  for (int t = 0; t < 2; ++t) {
    const ShareMatrix& sm = t == 0 ? s0 : s1;
    view.data.share[t].resize(m);
    view.data.price[t].resize(m);
    for (int k = 0; k < m; ++k) {
      view.data.share[t][k] = sm.s(view.global[k], j);
      view.data.price[t][k] = tab.p[t][view.global[k]];
    }
    view.data.s_cap[t] = sm.s_cap[j];
    view.data.r[t] = tab.r[t];
    view.data.w[t] = tab.w[t];
    view.data.q[t] = tab.p[t][j];
  }
  return view;
}

// Estimate every sector's technology with the exact two-period estimator,
// nesting factors in the global cascading order restricted to each sector's
// active factors.
inline Economy estimate_economy(const LinkedIoTable& tab,
                                const CascadingOrder& order) {
  const int J = tab.size();
  std::vector<CcesTechnology> techs(J);
  parallel_for(J, [&](int j) {
    SectorDataView view = sector_two_period_data(tab, j, order.perm);
    CcesTechnology tech = estimate_two_point(view.data, j);
    std::vector<int> global_factors;
    global_factors.reserve(tech.factors.size());
    for (int local : tech.factors) global_factors.push_back(view.global[local]);
    tech.factors = std::move(global_factors);
    std::vector<std::uint8_t> active(J, 0);
    for (int gi : tech.factors) active[gi] = 1;
    tech.active = std::move(active);
    techs[j] = std::move(tech);
  });
  return Economy::cces(std::move(techs), cost_shares(tab, 1));
}

// Productivity levels that make the estimated economy reproduce the table's
// prices: tau_jt = C_j(p_t, r_t, w_t) / p_jt.  Row t of the result is the
// period-t vector.
inline Mat restoring_tau(const Economy& econ, const LinkedIoTable& tab) {
  Mat tau(2, econ.J);
  for (int t = 0; t < 2; ++t) {
    const Vec c = unit_costs(econ, tab.p[t], tab.r[t], tab.w[t]);
    tau.row(t) = c.cwiseQuotient(tab.p[t]).transpose();
  }
  return tau;
}

struct RestorationReport {
  std::array<EquilibriumState, 2> state;
  std::array<double, 2> price_gap{};  // sup |p_solved - p_table|
  std::array<double, 2> share_gap{};  // sup |S_solved - S_table| entrywise
  bool converged() const { return state[0].converged && state[1].converged; }
};

// Re-solve both periods at the given productivity levels and report how far
// the model economy is from the observed prices and share columns.
inline RestorationReport verify_restoring(const Economy& econ,
                                          const LinkedIoTable& tab,
                                          const Mat& tauhat,
                                          const SolverConfig& cfg = {}) {
  if (tauhat.rows() != 2 || tauhat.cols() != econ.J)
    throw ValidationError("verify_restoring: tauhat must be 2 x J");
  RestorationReport rep;
  for (int t = 0; t < 2; ++t) {
    rep.state[t] =
        solve_equilibrium(econ, tauhat.row(t).transpose(), tab.r[t], tab.w[t], cfg);
    rep.price_gap[t] = (rep.state[t].p - tab.p[t]).lpNorm<Eigen::Infinity>();
    const Mat gap =
        rep.state[t].S.stacked() - cost_shares(tab, t).stacked();
    rep.share_gap[t] = gap.cwiseAbs().maxCoeff();
  }
  return rep;
}

}  // namespace cascade_ge
