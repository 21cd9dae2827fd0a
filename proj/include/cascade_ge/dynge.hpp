#pragma once

// Two-period dynamic general equilibrium: capital calibration, the
// counterfactual (alternative) equilibrium under modified productivity, the
// social rate of profit (SROP) of sectoral productivity increments, and the
// synergy decomposition of simultaneous increments.
//
// Calibration.  With observed investment G_t, capital services K_t, and the
// stock/service ratio rho, the capital price z_t satisfies
// z_t rho (K_{t+1} - (1-delta) K_t) = G_t, and the household Euler equation
// ties the two periods together:
//
//   beta (z_1 rho (1-delta) + r_1) / (z_0 rho) = psi(p_1)/psi(p_0) .
//
// That pins z_0 rho, z_1 rho, and K_2; the arc elasticity of investment to
// the capital price,
//
//   eta_K = [ (K_2-(1-delta)K_1) - (K_1-(1-delta)K_0) ] / (z_1 rho - z_0 rho)
//           * z_0 rho / (K_1-(1-delta)K_0) ,
//
// is undefined (0/0) in a steady state and reported as such.
//
// Counterfactual.  Holding r, w, monetary net exports, and the capital-good
// composition fixed, an alternative productivity vector tau moves prices to
// p = E(tau; r_1, w_1), the capital price through the Euler equation, the
// investment level through eta_K, and household income through the economy's
// labor content of final demand; household expenditure H is iterated to the
// fixed point of the budget identity
//
//   H + G + M = r_1 K_1 + w_1 L .
//
// SROP(j) = (Benefit - Cost)/theta with tau_j = 1 + theta/(p_j y_j), Benefit
// the equivalent-variation gain of the household and Cost the extra labor
// bill.  Synergy of simultaneous increments is measured in log prices:
// -ln E(prod of triggers) + sum_j ln E(trigger_j), identically zero for
// Cobb-Douglas.

#include "cascade_ge/common.hpp"
#include "cascade_ge/equilibrium.hpp"
#include "cascade_ge/household.hpp"
#include "cascade_ge/iotable.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace cascade_ge {

// Five-year defaults: 12.5% annual depreciation and a 3% annual discount.
inline const double kDefaultDelta = 1.0 - std::pow(1.0 - 0.125, 5);
inline const double kDefaultBeta = std::pow(1.03, -5);

struct CapitalCalibration {
  double z0rho = 0.0;  // capital price times stock/service ratio, period 0
  double z1rho = 0.0;
  double K0 = 0.0, K1 = 0.0, K2 = 0.0;  // capital service quantities
  double delta = kDefaultDelta;
  double beta = kDefaultBeta;
  double psi_ratio = 1.0;  // psi(p_1)/psi(p_0)
  std::optional<double> eta_K;  // empty when the 0/0 guard fires
};

inline CapitalCalibration calibrate_capital(const LinkedIoTable& tab,
                                            double psi_ratio,
                                            double delta = kDefaultDelta,
                                            double beta = kDefaultBeta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw ValidationError("calibrate_capital: delta must be in (0,1)");
  if (!(beta > 0.0 && beta <= 1.0))
    throw ValidationError("calibrate_capital: beta must be in (0,1]");
  CapitalCalibration cal;
  cal.delta = delta;
  cal.beta = beta;
  cal.psi_ratio = psi_ratio;
  cal.K0 = tab.rk[0].sum() / tab.r[0];
  cal.K1 = tab.rk[1].sum() / tab.r[1];
  const double G0 = tab.g[0].sum();
  const double G1 = tab.g[1].sum();
  const double inv0 = cal.K1 - (1.0 - delta) * cal.K0;
  if (!(G0 > 0.0) || !(inv0 > 0.0))
    throw ValidationError(
        "calibrate_capital: need positive investment G_0 and capital "
        "accumulation K_1 - (1-delta)K_0");
  cal.z0rho = G0 / inv0;
  const double r1 = tab.r[1];
  cal.z1rho = (psi_ratio * cal.z0rho / beta - r1) / (1.0 - delta);
  if (!(cal.z1rho > 0.0))
    throw ValidationError(
        "calibrate_capital: Euler equation implies a non-positive period-1 "
        "capital price");
  cal.K2 = G1 / cal.z1rho + (1.0 - delta) * cal.K1;
  const double inv1 = cal.K2 - (1.0 - delta) * cal.K1;
  const double dz = cal.z1rho - cal.z0rho;
  if (std::abs(dz) > 1e-12 * cal.z0rho)
    cal.eta_K = (inv1 - inv0) / dz * cal.z0rho / inv0;
  return cal;
}

// Reference-period aggregates the counterfactual holds on to.
struct BaselineAggregates {
  double H1 = 0.0;  // household expenditure (monetary)
  double L1 = 0.0;  // labor quantity
  double K1 = 0.0;  // capital service quantity
  double G1 = 0.0;  // investment (monetary)
  double M1 = 0.0;  // net exports (monetary)
  double r1 = 1.0, w1 = 1.0;
  Vec p1;     // reference prices (ones after normalization)
  Vec h1;     // household demand per commodity, monetary
  Vec kappa;  // capital-good composition g_i1 / G1
  Vec m1;     // net exports per commodity, monetary
  Vec y1;     // sector outputs, monetary (for trigger standardization)
};

inline BaselineAggregates baseline_from_table(const LinkedIoTable& tab) {
  BaselineAggregates base;
  base.h1 = tab.h[1];
  base.m1 = tab.m[1];
  base.y1 = tab.y[1];
  base.p1 = tab.p[1];
  base.r1 = tab.r[1];
  base.w1 = tab.w[1];
  base.H1 = tab.h[1].sum();
  base.G1 = tab.g[1].sum();
  base.M1 = tab.m[1].sum();
  base.L1 = tab.wl[1].sum() / tab.w[1];
  base.K1 = tab.rk[1].sum() / tab.r[1];
  if (!(base.G1 > 0.0))
    throw ValidationError("baseline_from_table: non-positive investment G_1");
  base.kappa = tab.g[1] / base.G1;
  return base;
}

struct AltConfig {
  double tol = 1e-10;  // relative tolerance of the household-income loop
  int max_iter = 1000;
  SolverConfig solver;
};

struct AltState {
  Vec tau;      // imposed productivity vector
  Vec p;        // counterfactual prices
  double psi = 1.0;
  double z1rho = 0.0;
  double K2 = 0.0;
  double G = 0.0;
  double H = 0.0;
  double L = 0.0;
  double benefit = 0.0;
  double cost = 0.0;
  double budget_residual = 0.0;
  int h_iterations = 0;
};

inline AltState alternative_equilibrium(const Economy& econ,
                                        const HouseholdModel& hh,
                                        const CapitalCalibration& cal,
                                        const BaselineAggregates& base,
                                        const Vec& tau,
                                        const AltConfig& cfg = {}) {
  if (econ.kind == Kind::Simple)
    throw ValidationError(
        "alternative_equilibrium: the simple economy has no factor market");
  if (!cal.eta_K)
    throw ValidationError(
        "alternative_equilibrium: eta_K is undefined (steady-state "
        "calibration)");
  AltState alt;
  alt.tau = tau;
  const EquilibriumState st =
      solve_equilibrium(econ, tau, base.r1, base.w1, cfg.solver);
  if (!st.converged)
    throw NonConvergenceError(
        "alternative_equilibrium: price solver did not converge");
  alt.p = st.p;
  const double psi1 = price_index(base.p1, hh);
  alt.psi = price_index(alt.p, hh);

  // Euler response of the capital price, then investment through eta_K.
  const double d = cal.delta;
  alt.z1rho =
      ((cal.z1rho * (1.0 - d) + base.r1) * (alt.psi / psi1) - base.r1) /
      (1.0 - d);
  const double inv0 = cal.K1 - (1.0 - d) * cal.K0;
  const double inv1 =
      inv0 * (1.0 + *cal.eta_K * (alt.z1rho - cal.z0rho) / cal.z0rho);
  alt.K2 = inv1 + (1.0 - d) * cal.K1;
  alt.G = alt.z1rho * inv1;

  // Labor content of final demand at the counterfactual prices.
  const Vec b = expenditure_shares(alt.p, hh);
  const Mat io = Mat::Identity(econ.J, econ.J) - st.S.s;
  const Eigen::PartialPivLU<Mat> lu(io);
  auto labor_bill = [&](double H) {
    const Vec f = b * H + base.kappa * alt.G + base.m1;  // monetary
    const Vec yv = lu.solve(f);
    return st.S.s_lab.dot(yv);  // = w_1 L
  };

  // Household income loop: H = r K + w L(H) - G - M.
  double H = base.H1;
  bool ok = false;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    alt.h_iterations = it;
    const double wL = labor_bill(H);
    const double H_next = base.r1 * base.K1 + wL - alt.G - base.M1;
    const double gap = std::abs(H_next - H);
    H = H_next;
    if (gap <= cfg.tol * std::max(1.0, std::abs(H))) {
      ok = true;
      break;
    }
  }
  if (!ok)
    throw NonConvergenceError(
        "alternative_equilibrium: household income loop did not converge");
  const double wL = labor_bill(H);
  alt.H = H;
  alt.L = wL / base.w1;
  alt.benefit = H * psi1 / alt.psi - base.H1;
  alt.cost = wL - base.w1 * base.L1;
  alt.budget_residual =
      std::abs(alt.H + alt.G + base.M1 - base.r1 * base.K1 - wL);
  return alt;
}

// Sentinel for "impose the increment in every sector simultaneously".
inline constexpr int kAllSectors = -1;

struct SropResult {
  double srop = 0.0;
  AltState alt;
};

// Standardized productivity trigger: a cost saving worth theta monetary
// units on sector j's reference output, tau_j = 1 + theta / (p_j1 y_j1).
inline Vec standardized_trigger(const BaselineAggregates& base, int j,
                                double theta) {
  Vec tau = Vec::Ones(base.y1.size());
  if (j == kAllSectors) {
    tau.array() += theta / base.y1.array();
  } else {
    if (j < 0 || j >= base.y1.size())
      throw ValidationError("standardized_trigger: sector index out of range");
    tau[j] += theta / base.y1[j];
  }
  return tau;
}

inline SropResult srop(const Economy& econ, const HouseholdModel& hh,
                       const CapitalCalibration& cal,
                       const BaselineAggregates& base, int j, double theta,
                       const AltConfig& cfg = {}) {
  SropResult out;
  if (theta == 0.0) return out;  // zero increment, zero rate by convention
  out.alt = alternative_equilibrium(econ, hh, cal, base,
                                    standardized_trigger(base, j, theta), cfg);
  out.srop = (out.alt.benefit - out.alt.cost) / theta;
  return out;
}

// ---------------------------------------------------------------------------
// Synergy of simultaneous productivity increments

struct SynergyResult {
  Vec total;  // per-commodity: -ln E(simultaneous) + sum_j ln E(trigger j)
  std::vector<std::uint8_t> trigger_ok;  // per-trigger solver success
  bool simultaneous_ok = false;
  bool complete = false;  // all solves converged
};

namespace detail {

// Equilibrium log prices; closed forms where they exist, fixed-point solve
// for the CCES.
inline std::pair<Vec, bool> equilibrium_ln_prices(const Economy& econ,
                                                  const Vec& tau, double r,
                                                  double w,
                                                  const SolverConfig& cfg) {
  switch (econ.kind) {
    case Kind::CobbDouglas:
    case Kind::Leontief:
    case Kind::Simple:
      try {
        return {closed_form_prices(econ, tau, r, w).array().log(), true};
      } catch (const SingularSystemError&) {
        return {Vec::Zero(econ.J), false};
      }
    case Kind::CCES: {
      const EquilibriumState st = solve_equilibrium(econ, tau, r, w, cfg);
      return {st.p.array().log(), st.converged};
    }
  }
  return {Vec::Zero(econ.J), false};
}

}  // namespace detail

inline SynergyResult synergy(const Economy& econ,
                             const std::vector<Vec>& triggers, double r = 1.0,
                             double w = 1.0, const SolverConfig& cfg = {}) {
  const int J = econ.J;
  SynergyResult out;
  out.total = Vec::Zero(J);
  out.trigger_ok.assign(triggers.size(), 0);
  out.complete = true;
  Vec ln_tau_all = Vec::Zero(J);
  for (std::size_t k = 0; k < triggers.size(); ++k) {
    if (triggers[k].size() != J)
      throw ValidationError("synergy: trigger has wrong length");
    ln_tau_all += triggers[k].array().log().matrix();
    auto [ln_p, converged] =
        detail::equilibrium_ln_prices(econ, triggers[k], r, w, cfg);
    out.trigger_ok[k] = converged;
    if (converged)
      out.total += ln_p;
    else
      out.complete = false;
  }
  auto [ln_p_all, converged_all] = detail::equilibrium_ln_prices(
      econ, ln_tau_all.array().exp(), r, w, cfg);
  out.simultaneous_ok = converged_all;
  if (!converged_all) out.complete = false;
  if (converged_all) out.total -= ln_p_all;
  if (!out.complete)
    out.total.setConstant(std::numeric_limits<double>::quiet_NaN());
  return out;
}

}  // namespace cascade_ge
