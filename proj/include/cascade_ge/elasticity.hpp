#pragma once

// Allen-Uzawa and Morishima elasticities of substitution for a cascaded-CES
// technology, evaluated at given factor prices.
//
// Inputs are enumerated in a fixed order: 0 = labor (price w), 1 = capital
// (price r), 2+k = the k-th intermediate factor of the technology (so input
// 2+k lives in nest k+1, and labor and capital share nest 0).  With C the
// unit cost function, the tables are
//
//   AUES(i,j) = C C_ij / (C_i C_j)               (symmetric)
//   MES(i,j)  = a_j (AUES(i,j) - AUES(j,j))      (a_j = cost share of j)
//
// First derivatives come from Shephard's lemma, C_i = a_i C / v_i, which
// foc_shares supplies exactly; the Hessian is a central finite difference of
// that analytic gradient with one step of Richardson extrapolation, so the
// tables inherit near-analytic accuracy without a hand-derived second
// derivative for every nest combination.

#include "cascade_ge/cces.hpp"
#include "cascade_ge/common.hpp"

#include <cmath>
#include <utility>

namespace cascade_ge {

struct ElasticityOptions {
  double rel_step = 1e-4;  // base finite-difference step, relative to v_j
};

struct SubstitutionTables {
  int n_inputs = 0;
  double cost = 0.0;  // C at the evaluation point (tau = 1)
  Vec shares;         // cost shares in input order
  Mat aues;
  Mat mes;
};

// Nest that input i belongs to: 0 for labor and capital, k+1 for the k-th
// intermediate factor.
inline int input_nest(int i) { return i < 2 ? 0 : i - 1; }

inline SubstitutionTables substitution_elasticities(
    const CcesTechnology& tech, const Vec& p, double r, double w,
    const ElasticityOptions& opt = {}) {
  const int m = tech.n_factors() + 2;

  // Gradient of C at input prices v (input order as documented above).
  // Productivity scales C and every C_i alike, so the tables are computed at
  // tau = 1 without loss of generality.
  Vec base_p = p;
  auto eval = [&](const Vec& v) {
    Vec pp = base_p;
    for (int k = 0; k < tech.n_factors(); ++k) pp[tech.factors[k]] = v[2 + k];
    const UnitCost uc = cces_unit_cost(tech, pp, v[1], v[0]);
    const SectorShares sh = foc_shares(tech, pp, v[1], v[0]);
    Vec g(m);
    g[0] = sh.s_lab * uc.q / v[0];
    g[1] = sh.s_cap * uc.q / v[1];
    for (int k = 0; k < tech.n_factors(); ++k)
      g[2 + k] = sh.s[k] * uc.q / v[2 + k];
    return std::make_pair(uc.q, g);
  };

  Vec v(m);
  v[0] = w;
  v[1] = r;
  for (int k = 0; k < tech.n_factors(); ++k) v[2 + k] = p[tech.factors[k]];
  if (!(v.array() > 0.0).all())
    throw ValidationError(
        "substitution_elasticities: input prices must be positive");

  auto [cost, grad] = eval(v);
  if (!(grad.array() > 0.0).all())
    throw ValidationError(
        "substitution_elasticities: an input has zero cost share; its "
        "elasticities are undefined");

  // Hessian column by column: central difference of the analytic gradient,
  // improved once by Richardson extrapolation.
  Mat H(m, m);
  for (int j = 0; j < m; ++j) {
    auto central = [&](double h) {
      Vec hi = v, lo = v;
      hi[j] += h;
      lo[j] -= h;
      return ((eval(hi).second - eval(lo).second) / (2.0 * h)).eval();
    };
    const double h = opt.rel_step * v[j];
    const Vec d_h = central(h);
    const Vec d_half = central(0.5 * h);
    H.col(j) = (4.0 * d_half - d_h) / 3.0;
  }
  H = 0.5 * (H + H.transpose()).eval();  // Young symmetry, up to FD noise

  SubstitutionTables out;
  out.n_inputs = m;
  out.cost = cost;
  out.shares = (v.array() * grad.array() / cost).matrix();
  out.aues.resize(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      out.aues(i, j) = cost * H(i, j) / (grad[i] * grad[j]);
  out.mes.resize(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      out.mes(i, j) = out.shares[j] * (out.aues(i, j) - out.aues(j, j));
  return out;
}

}  // namespace cascade_ge
