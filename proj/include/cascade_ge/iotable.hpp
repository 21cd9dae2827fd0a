#pragma once

// Two-period linked input-output tables.
//
// Storage convention: all transaction and final-demand entries are monetary
// (price times quantity).  Prices p, r, w are index values per period; at
// load the quantity units are rescaled so every reference-period (t = 1)
// price equals one.  Monetary values are invariant under that rescaling, so
// cost shares never change.
//
// File schema: `row_id,col_id,value,kind` plus a `period` column (long
// format) or one file per period.  kind is one of
//   x   intermediate transaction, row_id = commodity, col_id = sector
//   rK  capital compensation, col_id = sector
//   wL  labor compensation, col_id = sector
//   h   household consumption, row_id = commodity
//   g   fixed capital formation, row_id = commodity
//   m   net exports / residual final demand, row_id = commodity (may be < 0)
//   y   output, col_id = sector
//   p   commodity price index, row_id = commodity
//   r   capital price index (scalar)
//   w   wage index (scalar)

#include "cascade_ge/common.hpp"
#include "cascade_ge/csv.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace cascade_ge {

// Cost-share stack of one period: J columns, rows are the J commodities
// followed by capital and labor.  Columns sum to one by construction.
struct ShareMatrix {
  Mat s;      // J x J intermediate block; s(i,j) = p_i x_ij / (p_j y_j)
  Vec s_cap;  // capital compensation share per sector
  Vec s_lab;  // labor share per sector (residual: 1 - sum_i s(i,j) - s_cap)

  int size() const { return static_cast<int>(s.cols()); }

  // Combined primary share a_0 = s_K + s_L per sector.
  Vec primary() const { return s_cap + s_lab; }

  // (J+2) x J stack: intermediate rows, then capital, then labor.
  Mat stacked() const {
    Mat m(s.rows() + 2, s.cols());
    m.topRows(s.rows()) = s;
    m.row(s.rows()) = s_cap.transpose();
    m.row(s.rows() + 1) = s_lab.transpose();
    return m;
  }
};

struct LinkedIoTable {
  std::vector<long> sector_ids;  // classification order (ascending file ids)

  // One entry per period t = 0, 1.
  std::array<Mat, 2> x;                // J x J monetary transactions
  std::array<Vec, 2> rk, wl, y;        // per sector, monetary
  std::array<Vec, 2> h, g, m;          // per commodity, monetary
  std::array<Vec, 2> p;                // commodity price indices (p[1] = 1)
  std::array<double, 2> r{}, w{};      // factor price indices (r[1] = w[1] = 1)

  // Reference-period index values before unit rescaling, kept as metadata.
  Vec raw_p1;
  double raw_r1 = 1.0, raw_w1 = 1.0;

  int size() const { return static_cast<int>(sector_ids.size()); }

  int index_of(long sector_id) const {
    for (int j = 0; j < size(); ++j)
      if (sector_ids[j] == sector_id) return j;
    throw ValidationError("unknown sector id " + std::to_string(sector_id));
  }

  // Final demand f = h + g + m per commodity (monetary).
  Vec final_demand(int t) const { return h[t] + g[t] + m[t]; }

  // Value added E = rK + wL per sector (monetary).
  Vec value_added(int t) const { return rk[t] + wl[t]; }
};

struct BalanceFlag {
  int period;
  char axis;  // 'c' column (cost) balance, 'r' row (market) balance
  long id;
  double residual;
};

struct BalanceReport {
  std::array<Vec, 2> column_residual;  // |E_j + sum_i x_ij - y_j| / |y_j|
  std::array<Vec, 2> row_residual;     // |f_i + sum_j x_ij - y_i| / |y_i|
  std::vector<BalanceFlag> flagged;
  double max_residual = 0.0;
  double tolerance = 0.0;

  bool ok() const { return flagged.empty(); }
};

namespace detail {

struct RawRecord {
  int period;
  std::string kind;
  long row;
  long col;
  double value;
};

inline void collect_records(const csv::Table& t, const std::string& path,
                            int forced_period, std::vector<RawRecord>& out) {
  const int c_row = t.require_column("row_id", path);
  const int c_col = t.require_column("col_id", path);
  const int c_val = t.require_column("value", path);
  const int c_kind = t.require_column("kind", path);
  const int c_per = t.column("period");
  if (forced_period < 0 && c_per < 0)
    throw ValidationError(path +
                          ": no 'period' column; supply a long-format file or "
                          "one file per period");
  for (std::size_t n = 0; n < t.rows.size(); ++n) {
    const auto& cells = t.rows[n];
    const std::string where = path + ":row " + std::to_string(n + 2);
    RawRecord rec;
    rec.period = forced_period >= 0
                     ? forced_period
                     : static_cast<int>(csv::parse_int(cells[c_per], where));
    if (rec.period != 0 && rec.period != 1)
      throw ValidationError(where + ": period must be 0 or 1, got " +
                            std::to_string(rec.period));
    rec.kind = cells[c_kind];
    rec.row = cells[c_row].empty() ? 0 : csv::parse_int(cells[c_row], where);
    rec.col = cells[c_col].empty() ? 0 : csv::parse_int(cells[c_col], where);
    rec.value = csv::parse_double(cells[c_val], where);
    out.push_back(rec);
  }
}

inline LinkedIoTable assemble(std::vector<RawRecord>& records) {
  // Sector universe: every id seen as an x/rK/wL/y column or commodity row.
  std::map<long, int> ids;
  for (const auto& rec : records) {
    if (rec.kind == "x") {
      ids.emplace(rec.row, 0);
      ids.emplace(rec.col, 0);
    } else if (rec.kind == "rK" || rec.kind == "wL" || rec.kind == "y") {
      ids.emplace(rec.col ? rec.col : rec.row, 0);
    } else if (rec.kind == "h" || rec.kind == "g" || rec.kind == "m" ||
               rec.kind == "p") {
      ids.emplace(rec.row ? rec.row : rec.col, 0);
    } else if (rec.kind != "r" && rec.kind != "w") {
      throw ValidationError("unknown kind '" + rec.kind + "'");
    }
  }
  if (ids.empty()) throw ValidationError("table has no sector entries");
  LinkedIoTable tab;
  for (auto& [id, idx] : ids) {
    idx = static_cast<int>(tab.sector_ids.size());
    tab.sector_ids.push_back(id);
  }
  const int J = tab.size();
  std::array<bool, 2> saw_r{false, false}, saw_w{false, false};
  for (int t = 0; t < 2; ++t) {
    tab.x[t] = Mat::Zero(J, J);
    for (Vec* v : {&tab.rk[t], &tab.wl[t], &tab.y[t], &tab.h[t], &tab.g[t],
                   &tab.m[t], &tab.p[t]})
      *v = Vec::Zero(J);
    tab.r[t] = tab.w[t] = 0.0;
  }
  auto idx_of = [&](long id, const char* what) {
    auto it = ids.find(id);
    if (it == ids.end())
      throw ValidationError(std::string(what) + ": id " + std::to_string(id) +
                            " not in sector universe");
    return it->second;
  };
  for (const auto& rec : records) {
    const int t = rec.period;
    if (rec.kind == "x") {
      tab.x[t](idx_of(rec.row, "x row"), idx_of(rec.col, "x col")) = rec.value;
    } else if (rec.kind == "rK") {
      tab.rk[t][idx_of(rec.col ? rec.col : rec.row, "rK")] = rec.value;
    } else if (rec.kind == "wL") {
      tab.wl[t][idx_of(rec.col ? rec.col : rec.row, "wL")] = rec.value;
    } else if (rec.kind == "y") {
      tab.y[t][idx_of(rec.col ? rec.col : rec.row, "y")] = rec.value;
    } else if (rec.kind == "h") {
      tab.h[t][idx_of(rec.row ? rec.row : rec.col, "h")] = rec.value;
    } else if (rec.kind == "g") {
      tab.g[t][idx_of(rec.row ? rec.row : rec.col, "g")] = rec.value;
    } else if (rec.kind == "m") {
      tab.m[t][idx_of(rec.row ? rec.row : rec.col, "m")] = rec.value;
    } else if (rec.kind == "p") {
      tab.p[t][idx_of(rec.row ? rec.row : rec.col, "p")] = rec.value;
    } else if (rec.kind == "r") {
      tab.r[t] = rec.value;
      saw_r[t] = true;
    } else if (rec.kind == "w") {
      tab.w[t] = rec.value;
      saw_w[t] = true;
    }
  }
  for (int t = 0; t < 2; ++t) {
    if (!saw_r[t] || !saw_w[t])
      throw ValidationError("period " + std::to_string(t) +
                            ": missing r or w record");
  }
  return tab;
}

inline void validate_domains(const LinkedIoTable& tab) {
  const int J = tab.size();
  for (int t = 0; t < 2; ++t) {
    for (int j = 0; j < J; ++j) {
      const std::string sj = std::to_string(tab.sector_ids[j]);
      if (!(tab.y[t][j] > 0.0))
        throw ValidationError("period " + std::to_string(t) + ", sector " + sj +
                              ": non-positive output");
      if (!(tab.p[t][j] > 0.0))
        throw ValidationError("period " + std::to_string(t) + ", commodity " +
                              sj + ": non-positive price");
      if (tab.rk[t][j] < 0.0 || tab.wl[t][j] < 0.0)
        throw ValidationError("period " + std::to_string(t) + ", sector " + sj +
                              ": negative factor compensation");
      for (int i = 0; i < J; ++i)
        if (tab.x[t](i, j) < 0.0)
          throw ValidationError("period " + std::to_string(t) +
                                ": negative intermediate transaction (" +
                                std::to_string(tab.sector_ids[i]) + "," + sj +
                                ")");
    }
    if (!(tab.r[t] > 0.0) || !(tab.w[t] > 0.0))
      throw ValidationError("period " + std::to_string(t) +
                            ": non-positive factor price index");
  }
}

// Rescale quantity units so that every t = 1 price index equals one.
inline void normalize_reference(LinkedIoTable& tab) {
  tab.raw_p1 = tab.p[1];
  tab.raw_r1 = tab.r[1];
  tab.raw_w1 = tab.w[1];
  for (int t = 0; t < 2; ++t) {
    tab.p[t] = tab.p[t].cwiseQuotient(tab.raw_p1);
    tab.r[t] /= tab.raw_r1;
    tab.w[t] /= tab.raw_w1;
  }
}

}  // namespace detail

// Long-format load (single file with a `period` column).
inline LinkedIoTable load_table(const std::string& path) {
  std::vector<detail::RawRecord> records;
  detail::collect_records(csv::read(path), path, -1, records);
  LinkedIoTable tab = detail::assemble(records);
  detail::validate_domains(tab);
  detail::normalize_reference(tab);
  return tab;
}

// One file per period.
inline LinkedIoTable load_table(const std::string& path_t0,
                                const std::string& path_t1) {
  std::vector<detail::RawRecord> records;
  detail::collect_records(csv::read(path_t0), path_t0, 0, records);
  detail::collect_records(csv::read(path_t1), path_t1, 1, records);
  LinkedIoTable tab = detail::assemble(records);
  detail::validate_domains(tab);
  detail::normalize_reference(tab);
  return tab;
}

// Long-format save.  Zero intermediate cells are omitted; everything written
// at 17 significant digits so load(save(t)) reproduces t bit for bit.
inline void save_table(const LinkedIoTable& tab, const std::string& path,
                       const std::string& config_hash = "0",
                       std::uint64_t seed = 0) {
  csv::Writer out(path, config_hash, seed);
  out.header({"row_id", "col_id", "value", "kind", "period"});
  const int J = tab.size();
  for (int t = 0; t < 2; ++t) {
    for (int j = 0; j < J; ++j)
      for (int i = 0; i < J; ++i)
        if (tab.x[t](i, j) != 0.0)
          out.row(tab.sector_ids[i], tab.sector_ids[j], tab.x[t](i, j), "x", t);
    for (int j = 0; j < J; ++j) {
      out.row(0L, tab.sector_ids[j], tab.rk[t][j], "rK", t);
      out.row(0L, tab.sector_ids[j], tab.wl[t][j], "wL", t);
      out.row(0L, tab.sector_ids[j], tab.y[t][j], "y", t);
    }
    for (int i = 0; i < J; ++i) {
      out.row(tab.sector_ids[i], 0L, tab.h[t][i], "h", t);
      out.row(tab.sector_ids[i], 0L, tab.g[t][i], "g", t);
      out.row(tab.sector_ids[i], 0L, tab.m[t][i], "m", t);
      out.row(tab.sector_ids[i], 0L,
              t == 1 ? tab.raw_p1[i] : tab.p[t][i] * tab.raw_p1[i], "p", t);
    }
    out.row(0L, 0L, t == 1 ? tab.raw_r1 : tab.r[t] * tab.raw_r1, "r", t);
    out.row(0L, 0L, t == 1 ? tab.raw_w1 : tab.w[t] * tab.raw_w1, "w", t);
  }
}

// Accounting-identity check.  Column balance: value added plus intermediate
// purchases equals output.  Row balance: final demand plus intermediate
// sales equals output.  Residuals are relative to sector output.
inline BalanceReport validate(const LinkedIoTable& tab, double tol = 1e-6) {
  BalanceReport rep;
  rep.tolerance = tol;
  const int J = tab.size();
  for (int t = 0; t < 2; ++t) {
    const Vec col_gap =
        (tab.value_added(t) + tab.x[t].colwise().sum().transpose() - tab.y[t])
            .cwiseAbs()
            .cwiseQuotient(tab.y[t].cwiseAbs());
    const Vec row_gap =
        (tab.final_demand(t) + tab.x[t].rowwise().sum() - tab.y[t])
            .cwiseAbs()
            .cwiseQuotient(tab.y[t].cwiseAbs());
    rep.column_residual[t] = col_gap;
    rep.row_residual[t] = row_gap;
    for (int j = 0; j < J; ++j) {
      rep.max_residual = std::max({rep.max_residual, col_gap[j], row_gap[j]});
      if (col_gap[j] > tol)
        rep.flagged.push_back({t, 'c', tab.sector_ids[j], col_gap[j]});
      if (row_gap[j] > tol)
        rep.flagged.push_back({t, 'r', tab.sector_ids[j], row_gap[j]});
    }
  }
  return rep;
}

// Cost-share stack of period t.  The labor share is the residual
// 1 - sum_i s_ij - s_Kj, which makes every column sum to one exactly.
inline ShareMatrix cost_shares(const LinkedIoTable& tab, int t) {
  if (t != 0 && t != 1) throw ValidationError("period must be 0 or 1");
  const int J = tab.size();
  ShareMatrix sm;
  sm.s = tab.x[t].array().rowwise() / tab.y[t].transpose().array();
  sm.s_cap = tab.rk[t].cwiseQuotient(tab.y[t]);
  sm.s_lab = Vec::Ones(J) - sm.s.colwise().sum().transpose() - sm.s_cap;
  return sm;
}

}  // namespace cascade_ge
