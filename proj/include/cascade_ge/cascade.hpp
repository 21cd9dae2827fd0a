#pragma once

// Cascading order of sectors from the zero pattern of the intermediate
// transaction matrix.
//
// A sector's position is scored by the ratio of its indegree (number of
// distinct inputs it buys) to its outdegree (number of sectors it supplies).
// Upstream sectors buy little and supply many, so sorting the ratio in
// ascending order lists sectors from upstream to downstream.  For the ideal
// benchmark -- an incidence that is perfectly triangular with the diagonal
// included, phi(i,k) = 1 iff i <= k -- the ratio at rank k is exactly
// k/(N-k+1) and the attached ranking index (N-k+1)/N decays with log-log
// slope approaching -1, a Zipf-like tail.

#include "cascade_ge/common.hpp"
#include "cascade_ge/iotable.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace cascade_ge {

using IncidenceMatrix = Eigen::MatrixXi;  // entries 0/1

struct DegreeReport {
  Eigen::VectorXi indegree;   // column sums of the incidence
  Eigen::VectorXi outdegree;  // row sums
  Vec ratio;                  // indegree/outdegree with sentinels (see below)
};

struct CascadingOrder {
  std::vector<int> perm;  // sector indices, most upstream first
  Vec ratio;              // sorted ratios along perm
  Vec ranking;            // (N-k+1)/N for 1-based rank k
  int violations = 0;     // incidence entries inconsistent with the order
};

struct CcdfPoint {
  int k;               // 1-based rank
  double ratio;        // degree ratio at rank k
  double ranking;      // ranking index (N-k+1)/N
  double log_ratio;    // natural logs; +-inf at sentinel ratios
  double log_ranking;
};

// Incidence from observed transactions: phi(i,j) = 1 iff sector j buys
// commodity i, with the diagonal excluded (own use is not a network edge).
inline IncidenceMatrix incidence(const LinkedIoTable& tab, int t = 1) {
  const int J = tab.size();
  IncidenceMatrix phi = IncidenceMatrix::Zero(J, J);
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < J; ++i)
      if (i != j && tab.x[t](i, j) > 0.0) phi(i, j) = 1;
  return phi;
}

// Ideal benchmark incidence: phi(i,k) = 1 iff i <= k, diagonal included.
inline IncidenceMatrix perfect_triangular(int n) {
  IncidenceMatrix phi = IncidenceMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i <= k; ++i) phi(i, k) = 1;
  return phi;
}

// Degree counts and the upstreamness ratio.  Sentinels: a sector that
// supplies nobody (outdegree 0) is maximally downstream, ratio +inf; a
// sector that buys nothing (indegree 0) is maximally upstream, ratio 0.
// The indegree rule wins for isolated sectors (0/0 -> 0), leaving their
// relative order to the classification-order tie break.
inline DegreeReport degrees(const IncidenceMatrix& phi) {
  DegreeReport rep;
  rep.indegree = phi.colwise().sum();
  rep.outdegree = phi.rowwise().sum();
  const int n = static_cast<int>(phi.rows());
  rep.ratio.resize(n);
  for (int j = 0; j < n; ++j) {
    if (rep.indegree[j] == 0)
      rep.ratio[j] = 0.0;
    else if (rep.outdegree[j] == 0)
      rep.ratio[j] = std::numeric_limits<double>::infinity();
    else
      rep.ratio[j] =
          static_cast<double>(rep.indegree[j]) / rep.outdegree[j];
  }
  return rep;
}

inline CascadingOrder cascading_order(const IncidenceMatrix& phi) {
  const DegreeReport deg = degrees(phi);
  const int n = static_cast<int>(phi.rows());
  CascadingOrder ord;
  ord.perm.resize(n);
  std::iota(ord.perm.begin(), ord.perm.end(), 0);
  std::stable_sort(ord.perm.begin(), ord.perm.end(), [&](int a, int b) {
    return deg.ratio[a] < deg.ratio[b];
  });
  ord.ratio.resize(n);
  ord.ranking.resize(n);
  for (int k = 0; k < n; ++k) {
    ord.ratio[k] = deg.ratio[ord.perm[k]];
    ord.ranking[k] = static_cast<double>(n - k) / n;  // rank k+1 of n
  }
  // An edge from a sector ordered downstream into one ordered upstream
  // contradicts a cascaded technology; count them.
  std::vector<int> pos(n);
  for (int k = 0; k < n; ++k) pos[ord.perm[k]] = k;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (phi(i, j) && pos[i] > pos[j]) ++ord.violations;
  return ord;
}

// Benchmark curve of the perfectly triangular incidence of size n.
inline std::vector<CcdfPoint> ccdf_curve(int n) {
  if (n < 1) throw ValidationError("ccdf_curve: n must be positive");
  std::vector<CcdfPoint> pts;
  pts.reserve(n);
  for (int k = 1; k <= n; ++k) {
    CcdfPoint pt;
    pt.k = k;
    pt.ratio = static_cast<double>(k) / (n - k + 1);
    pt.ranking = static_cast<double>(n - k + 1) / n;
    pt.log_ratio = std::log(pt.ratio);
    pt.log_ranking = std::log(pt.ranking);
    pts.push_back(pt);
  }
  return pts;
}

// Empirical curve of an observed incidence: sorted ratios against the same
// ranking index.  Sentinel ratios produce -inf/+inf log coordinates.
inline std::vector<CcdfPoint> ccdf_curve(const IncidenceMatrix& phi) {
  const CascadingOrder ord = cascading_order(phi);
  const int n = static_cast<int>(ord.perm.size());
  std::vector<CcdfPoint> pts;
  pts.reserve(n);
  for (int k = 1; k <= n; ++k) {
    CcdfPoint pt;
    pt.k = k;
    pt.ratio = ord.ratio[k - 1];
    pt.ranking = ord.ranking[k - 1];
    pt.log_ratio = std::log(pt.ratio);
    pt.log_ranking = std::log(pt.ranking);
    pts.push_back(pt);
  }
  return pts;
}

}  // namespace cascade_ge
