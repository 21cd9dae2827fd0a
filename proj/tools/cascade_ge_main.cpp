// cascade-ge: command-line front end for the cascaded-CES production-network
// toolkit.  Every subcommand reads/writes plain CSV (one '#' metadata header
// line with tool version, config hash, and seed) so pipelines are
// reproducible and plottable with any tool.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cascade_ge.hpp"

namespace cg = cascade_ge;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Small shared plumbing

struct RunContext {
  std::string config_hash;  // fnv1a of the effective configuration
  std::uint64_t seed = 0;   // recorded in every output header
};

std::vector<std::string> split_paths(const std::string& joined) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : joined) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  for (const std::string& p : out)
    if (p.empty())
      throw cg::ValidationError("empty path in '" + joined + "'");
  return out;
}

// Horizon strings: "7h" = hours, "2y" or a bare number = years.
double parse_horizon(const std::string& text) {
  if (text.empty()) throw cg::ValidationError("empty horizon");
  std::string num = text;
  double scale = 1.0;
  if (text.back() == 'h') {
    num = text.substr(0, text.size() - 1);
    scale = 1.0 / cg::kHoursPerYear;
  } else if (text.back() == 'y') {
    num = text.substr(0, text.size() - 1);
  }
  const double v = cg::csv::parse_double(num, "horizon '" + text + "'");
  if (!(v > 0.0))
    throw cg::ValidationError("horizon must be positive: '" + text + "'");
  return v * scale;
}

cg::LinkedIoTable load_input(const std::string& input) {
  const std::vector<std::string> paths = split_paths(input);
  if (paths.size() == 1) return cg::load_table(paths[0]);
  if (paths.size() == 2) return cg::load_table(paths[0], paths[1]);
  throw cg::ValidationError("--input takes one long-format file or two "
                            "per-period files, got " +
                            std::to_string(paths.size()));
}

std::string sector_label(const cg::LinkedIoTable& tab, int j) {
  return std::to_string(tab.sector_ids[j]);
}

// ---------------------------------------------------------------------------
// tech.csv: the estimated technology chains
//   sector_id,nest_index,factor_id,alpha,gamma,active
// Nest 0 is the capital/labor core (factor_id K, alpha = capital weight);
// nest n >= 1 pairs commodity factor_id against the running compound.
// Rows with active = 0 document commodities a sector buys that carry no
// weight in the fitted chain (deactivated zero-share inputs).

void write_tech(cg::csv::Writer& out, const cg::LinkedIoTable& tab,
                const cg::Economy& econ) {
  const cg::ShareMatrix s0 = cost_shares(tab, 0);
  const cg::ShareMatrix s1 = cost_shares(tab, 1);
  out.header({"sector_id", "nest_index", "factor_id", "alpha", "gamma",
              "active"});
  for (int j = 0; j < econ.J; ++j) {
    const cg::CcesTechnology& tech = econ.techs[j];
    out.row(tab.sector_ids[j], 0, "K", tech.alpha[0], tech.gamma[0], 1);
    for (int k = 0; k < tech.n_factors(); ++k)
      out.row(tab.sector_ids[j], k + 1, tab.sector_ids[tech.factors[k]],
              tech.alpha[k + 1], tech.gamma[k + 1], 1);
    for (int i = 0; i < econ.J; ++i) {
      const bool bought = s0.s(i, j) > 0.0 || s1.s(i, j) > 0.0;
      if (bought && !tech.active[i])
        out.row(tab.sector_ids[j], -1, tab.sector_ids[i], 0.0, 0.0, 0);
    }
  }
}

struct TechFile {
  std::vector<long> sector_ids;  // ascending
  std::vector<cg::CcesTechnology> techs;

  int index_of(long id) const {
    for (std::size_t j = 0; j < sector_ids.size(); ++j)
      if (sector_ids[j] == id) return static_cast<int>(j);
    throw cg::ValidationError("tech file: unknown sector id " +
                              std::to_string(id));
  }
};

TechFile read_tech(const std::string& path) {
  const cg::csv::Table t = cg::csv::read(path);
  const int c_sec = t.require_column("sector_id", path);
  const int c_nest = t.require_column("nest_index", path);
  const int c_fac = t.require_column("factor_id", path);
  const int c_alpha = t.require_column("alpha", path);
  const int c_gamma = t.require_column("gamma", path);
  const int c_active = t.require_column("active", path);

  struct NestRow {
    int nest;
    std::string factor;
    double alpha, gamma;
  };
  std::map<long, std::vector<NestRow>> by_sector;
  for (const auto& row : t.rows) {
    if (cg::csv::parse_int(row[c_active], path) == 0) continue;
    NestRow nr;
    nr.nest = static_cast<int>(cg::csv::parse_int(row[c_nest], path));
    nr.factor = row[c_fac];
    nr.alpha = cg::csv::parse_double(row[c_alpha], path);
    nr.gamma = cg::csv::parse_double(row[c_gamma], path);
    by_sector[cg::csv::parse_int(row[c_sec], path)].push_back(nr);
  }
  if (by_sector.empty())
    throw cg::ValidationError(path + ": no active technology rows");

  TechFile tf;
  for (const auto& [id, rows] : by_sector) tf.sector_ids.push_back(id);
  const int J = static_cast<int>(tf.sector_ids.size());
  tf.techs.resize(J);
  for (auto& [id, rows] : by_sector) {
    auto sorted = rows;
    std::sort(sorted.begin(), sorted.end(),
              [](const NestRow& a, const NestRow& b) { return a.nest < b.nest; });
    const int nests = static_cast<int>(sorted.size());
    cg::CcesTechnology tech;
    tech.alpha.resize(nests);
    tech.gamma.resize(nests);
    for (int n = 0; n < nests; ++n) {
      if (sorted[n].nest != n)
        throw cg::ValidationError(path + ": sector " + std::to_string(id) +
                                  " has non-consecutive nest indices");
      tech.alpha[n] = sorted[n].alpha;
      tech.gamma[n] = sorted[n].gamma;
      if (n == 0) {
        if (sorted[n].factor != "K")
          throw cg::ValidationError(path + ": sector " + std::to_string(id) +
                                    " nest 0 must pair capital (factor_id K)");
      } else {
        tech.factors.push_back(
            tf.index_of(cg::csv::parse_int(sorted[n].factor, path)));
      }
    }
    std::vector<std::uint8_t> active(J, 0);
    for (int gi : tech.factors) active[gi] = 1;
    tech.active = std::move(active);
    tf.techs[tf.index_of(id)] = std::move(tech);
  }
  return tf;
}

cg::Economy economy_from_tech(const TechFile& tf, cg::Kind kind) {
  const int J = static_cast<int>(tf.sector_ids.size());
  if (kind == cg::Kind::Simple) return cg::Economy::simple(J);
  // Reference shares of the written technologies at the normalized point.
  cg::ShareMatrix ref;
  ref.s = cg::Mat::Zero(J, J);
  ref.s_cap = cg::Vec::Zero(J);
  ref.s_lab = cg::Vec::Zero(J);
  const cg::Vec ones = cg::Vec::Ones(J);
  for (int j = 0; j < J; ++j) {
    const cg::SectorShares sh = cg::foc_shares(tf.techs[j], ones, 1.0, 1.0);
    for (int k = 0; k < tf.techs[j].n_factors(); ++k)
      ref.s(tf.techs[j].factors[k], j) = sh.s[k];
    ref.s_cap[j] = sh.s_cap;
    ref.s_lab[j] = sh.s_lab;
  }
  switch (kind) {
    case cg::Kind::CCES:
      return cg::Economy::cces(tf.techs, ref);
    case cg::Kind::CobbDouglas:
      return cg::Economy::cobb_douglas(ref);
    case cg::Kind::Leontief:
      return cg::Economy::leontief(ref);
    default:
      return cg::Economy::simple(J);
  }
}

// tau.csv: sector_id,tau with an optional period column to select from.
cg::Vec read_tau(const std::string& path, const std::vector<long>& ids,
                 int period) {
  const cg::csv::Table t = cg::csv::read(path);
  const int c_sec = t.require_column("sector_id", path);
  const int c_tau = t.require_column("tau", path);
  const int c_per = t.column("period");
  std::map<long, double> by_id;
  for (const auto& row : t.rows) {
    if (c_per >= 0 &&
        cg::csv::parse_int(row[c_per], path) != period)
      continue;
    by_id[cg::csv::parse_int(row[c_sec], path)] =
        cg::csv::parse_double(row[c_tau], path);
  }
  cg::Vec tau(static_cast<int>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const auto it = by_id.find(ids[j]);
    if (it == by_id.end())
      throw cg::ValidationError(path + ": no tau for sector " +
                                std::to_string(ids[j]) + " (period " +
                                std::to_string(period) + ")");
    tau[static_cast<int>(j)] = it->second;
  }
  return tau;
}

// Column lookup across the two-period CSVs used by `household`.
cg::Vec column_by_id(const cg::csv::Table& t, const std::string& path,
                     const std::string& col, const std::vector<long>& ids,
                     int c_filter, const std::string& filter) {
  const int c_sec = t.require_column("sector_id", path);
  const int c_val = t.require_column(col, path);
  std::map<long, double> by_id;
  for (const auto& row : t.rows) {
    if (c_filter >= 0 && row[c_filter] != filter) continue;
    by_id[cg::csv::parse_int(row[c_sec], path)] =
        cg::csv::parse_double(row[c_val], path);
  }
  cg::Vec v(static_cast<int>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const auto it = by_id.find(ids[j]);
    if (it == by_id.end())
      throw cg::ValidationError(path + ": no '" + col + "' for sector " +
                                std::to_string(ids[j]));
    v[static_cast<int>(j)] = it->second;
  }
  return v;
}

struct EstimatedWorld {
  cg::LinkedIoTable tab;
  cg::CascadingOrder order;
  cg::Economy econ;
};

EstimatedWorld estimate_world(const std::string& input) {
  EstimatedWorld w{load_input(input), {}, cg::Economy::simple(1)};
  w.order = cg::cascading_order(cg::incidence(w.tab));
  w.econ = cg::estimate_economy(w.tab, w.order);
  return w;
}

// Internal lambda estimation from the table itself: expenditure shares from
// household demand, instruments from the estimated productivity growth.
cg::LambdaEstimate lambda_from_table(const EstimatedWorld& w) {
  const double H0 = w.tab.h[0].sum(), H1 = w.tab.h[1].sum();
  if (!(H0 > 0.0) || !(H1 > 0.0))
    throw cg::ValidationError(
        "lambda estimation needs positive household expenditure in both "
        "periods");
  const cg::Mat tauhat = cg::restoring_tau(w.econ, w.tab);
  const cg::Vec dln_tau =
      (tauhat.row(1).array().log() - tauhat.row(0).array().log()).transpose();
  return cg::estimate_lambda(w.tab.h[0] / H0, w.tab.h[1] / H1, w.tab.p[0],
                             w.tab.p[1], dln_tau);
}

// ---------------------------------------------------------------------------
// Subcommand options

struct Options {
  std::string input;
  std::string out;
  std::string report;
  std::string ccdf;
  std::string order_path;
  std::string tech;
  std::string tau;
  std::string kind = "cces";
  std::string kinds = "cces,cd,leontief,simple";
  std::string method = "cces";
  std::string shares;
  std::string prices;
  std::string instruments;
  std::string sector = "all";
  std::string at = "reference";
  std::string ell = "1y";
  double sigma = cg::kDefaultSigma;
  int draws = cg::kDefaultDraws;
  std::uint64_t seed = 42;
  double theta = 1.0;
  double delta = cg::kDefaultDelta;
  double beta = cg::kDefaultBeta;
  std::optional<double> lambda;
  double tolerance = 1e-6;
  int period = 1;
  double r = 1.0;
  double w = 1.0;
  cg::SolverConfig solver;
  cg::AltConfig alt;
};

// ---------------------------------------------------------------------------
// Subcommands

int cmd_load(const Options& o, const RunContext& ctx) {
  const cg::LinkedIoTable tab = load_input(o.input);
  const cg::BalanceReport rep = cg::validate(tab, o.tolerance);
  if (!o.report.empty()) {
    cg::csv::Writer out(o.report, ctx.config_hash, ctx.seed);
    out.meta("max_residual=" + cg::to_string17(rep.max_residual));
    out.meta("tolerance=" + cg::to_string17(rep.tolerance));
    out.meta(std::string("ok=") + (rep.ok() ? "true" : "false"));
    out.meta("flagged=" + std::to_string(rep.flagged.size()));
    out.header({"sector_id", "period", "column_residual", "row_residual"});
    for (int t = 0; t < 2; ++t)
      for (int j = 0; j < tab.size(); ++j)
        out.row(tab.sector_ids[j], t, rep.column_residual[t][j],
                rep.row_residual[t][j]);
  }
  std::cout << "loaded " << tab.size() << " sectors, two linked periods\n"
            << "max balance residual " << cg::to_string17(rep.max_residual)
            << (rep.ok() ? " (ok)" : " (FLAGGED)") << "\n";
  for (const cg::BalanceFlag& f : rep.flagged)
    std::cout << "  period " << f.period << " sector " << f.id << " "
              << (f.axis == 'c' ? "cost" : "market") << " residual "
              << cg::to_string17(f.residual) << "\n";
  return 0;
}

int cmd_order(const Options& o, const RunContext& ctx) {
  const cg::LinkedIoTable tab = load_input(o.input);
  const cg::IncidenceMatrix phi = cg::incidence(tab, o.period);
  const cg::CascadingOrder ord = cg::cascading_order(phi);
  {
    cg::csv::Writer out(o.out, ctx.config_hash, ctx.seed);
    out.meta("violations=" + std::to_string(ord.violations));
    out.meta("period=" + std::to_string(o.period));
    out.header({"rank", "sector_id", "ratio", "ranking_index"});
    for (std::size_t k = 0; k < ord.perm.size(); ++k)
      out.row(k + 1, tab.sector_ids[ord.perm[k]], ord.ratio[k],
              ord.ranking[k]);
  }
  if (!o.ccdf.empty()) {
    cg::csv::Writer out(o.ccdf, ctx.config_hash, ctx.seed);
    out.header({"series", "k", "ratio", "ranking", "log_ratio",
                "log_ranking"});
    for (const cg::CcdfPoint& pt : cg::ccdf_curve(tab.size()))
      out.row("benchmark", pt.k, pt.ratio, pt.ranking, pt.log_ratio,
              pt.log_ranking);
    for (const cg::CcdfPoint& pt : cg::ccdf_curve(phi))
      out.row("empirical", pt.k, pt.ratio, pt.ranking, pt.log_ratio,
              pt.log_ranking);
  }
  std::cout << "cascading order of " << tab.size() << " sectors, "
            << ord.violations << " triangularity violation(s)\n";
  return 0;
}

cg::CascadingOrder read_order(const std::string& path,
                              const cg::LinkedIoTable& tab) {
  const cg::csv::Table t = cg::csv::read(path);
  const int c_sec = t.require_column("sector_id", path);
  cg::CascadingOrder ord;
  for (const auto& row : t.rows)
    ord.perm.push_back(tab.index_of(cg::csv::parse_int(row[c_sec], path)));
  if (static_cast<int>(ord.perm.size()) != tab.size())
    throw cg::ValidationError(path + ": order covers " +
                              std::to_string(ord.perm.size()) +
                              " sectors, table has " +
                              std::to_string(tab.size()));
  std::set<int> seen(ord.perm.begin(), ord.perm.end());
  if (static_cast<int>(seen.size()) != tab.size())
    throw cg::ValidationError(path + ": order is not a permutation");
  return ord;
}

int cmd_estimate(const Options& o, const RunContext& ctx) {
  const cg::LinkedIoTable tab = load_input(o.input);
  const cg::CascadingOrder ord = o.order_path.empty()
                                     ? cg::cascading_order(cg::incidence(tab))
                                     : read_order(o.order_path, tab);
  const cg::Economy econ = cg::estimate_economy(tab, ord);
  cg::csv::Writer out(o.out, ctx.config_hash, ctx.seed);
  write_tech(out, tab, econ);
  std::cout << "estimated " << econ.J << " technology chains -> " << o.out
            << "\n";
  return 0;
}

int cmd_tfp(const Options& o, const RunContext& ctx) {
  const cg::LinkedIoTable tab = load_input(o.input);
  if (o.method != "cces" && o.method != "translog")
    throw cg::ValidationError("--method must be cces or translog");
  const cg::CascadingOrder ord = cg::cascading_order(cg::incidence(tab));
  cg::csv::Writer out(o.out, ctx.config_hash, ctx.seed);
  out.header({"sector_id", "method", "tfpg"});
  for (int j = 0; j < tab.size(); ++j) {
    const cg::SectorDataView view =
        cg::sector_two_period_data(tab, j, ord.perm);
    const double g = o.method == "cces" ? cg::tfpg_cces(view.data)
                                        : cg::tfpg_translog(view.data);
    out.row(tab.sector_ids[j], o.method, g);
  }
  std::cout << "TFP growth (" << o.method << ") for " << tab.size()
            << " sectors -> " << o.out << "\n";
  return 0;
}

int cmd_solve(const Options& o, const RunContext& ctx) {
  const TechFile tf = read_tech(o.tech);
  const cg::Economy econ = economy_from_tech(tf, cg::kind_from_string(o.kind));
  const cg::Vec tau = read_tau(o.tau, tf.sector_ids, o.period);
  cg::EquilibriumState st;
  if (econ.kind == cg::Kind::CobbDouglas || econ.kind == cg::Kind::Leontief) {
    // These kinds have exact linear-algebraic equilibria; the fixed-point
    // options are ignored and Neumann violations surface as singular systems.
    st.p = cg::closed_form_prices(econ, tau, o.r, o.w);
    st.converged = true;
    st.residual = (st.p.array().log() -
                   cg::unit_costs(econ, st.p, o.r, o.w)
                       .cwiseQuotient(tau)
                       .array()
                       .log())
                      .abs()
                      .maxCoeff();
    st.S = cg::network_shares(econ, st.p, o.r, o.w, tau);
  } else {
    st = cg::solve_equilibrium(econ, tau, o.r, o.w, o.solver);
    if (!st.converged)
      throw cg::NonConvergenceError(
          "solve: no equilibrium within " + std::to_string(o.solver.max_iter) +
          " iterations (best residual " + cg::to_string17(st.residual) + ")");
  }
  const std::vector<std::string> outs = split_paths(o.out);
  if (outs.size() > 2)
    throw cg::ValidationError("solve --out takes prices.csv[,shares.csv]");
  {
    cg::csv::Writer out(outs[0], ctx.config_hash, ctx.seed);
    out.meta("kind=" + o.kind);
    out.meta("iterations=" + std::to_string(st.iterations));
    out.meta("residual=" + cg::to_string17(st.residual));
    out.header({"sector_id", "price"});
    for (std::size_t j = 0; j < tf.sector_ids.size(); ++j)
      out.row(tf.sector_ids[j], st.p[static_cast<int>(j)]);
  }
  if (outs.size() == 2) {
    if (econ.kind == cg::Kind::Simple)
      throw cg::ValidationError(
          "solve: the simple economy has no cost shares to write");
    cg::csv::Writer out(outs[1], ctx.config_hash, ctx.seed);
    out.header({"row_id", "col_id", "share"});
    for (int j = 0; j < econ.J; ++j) {
      for (int i = 0; i < econ.J; ++i)
        if (st.S.s(i, j) > 0.0)
          out.row(std::to_string(tf.sector_ids[i]), tf.sector_ids[j],
                  st.S.s(i, j));
      out.row("K", tf.sector_ids[j], st.S.s_cap[j]);
      out.row("L", tf.sector_ids[j], st.S.s_lab[j]);
    }
  }
  std::cout << "equilibrium (" << o.kind << ") in " << st.iterations
            << " iteration(s), residual " << cg::to_string17(st.residual)
            << "\n";
  return 0;
}

int cmd_simulate(const Options& o, const RunContext& ctx) {
  const std::vector<std::string> outs = split_paths(o.out);
  if (outs.size() != 3)
    throw cg::ValidationError(
        "simulate --out takes series.csv,moments.csv,qq.csv");
  const double ell = parse_horizon(o.ell);
  std::vector<cg::Kind> kinds;
  for (const std::string& k : split_paths(o.kinds))
    kinds.push_back(cg::kind_from_string(k));
  if (kinds.empty()) throw cg::ValidationError("simulate: no kinds requested");

  const EstimatedWorld w = estimate_world(o.input);
  const cg::ShareMatrix ref = cg::cost_shares(w.tab, 1);
  const cg::ShockMatrix shocks =
      cg::draw_shocks(w.tab.size(), o.draws, o.sigma, ell, o.seed);

  std::vector<cg::FluctuationSeries> series;
  for (cg::Kind k : kinds) {
    switch (k) {
      case cg::Kind::CCES:
        series.push_back(cg::simulate_aggregate(w.econ, shocks, o.solver));
        break;
      case cg::Kind::CobbDouglas:
        series.push_back(
            cg::simulate_aggregate(cg::Economy::cobb_douglas(ref), shocks));
        break;
      case cg::Kind::Leontief:
        series.push_back(
            cg::simulate_aggregate(cg::Economy::leontief(ref), shocks));
        break;
      case cg::Kind::Simple:
        series.push_back(cg::simulate_aggregate(
            cg::Economy::simple(w.tab.size()), shocks));
        break;
    }
  }
  const cg::FluctuationSeries* cd = nullptr;
  for (std::size_t i = 0; i < kinds.size(); ++i)
    if (kinds[i] == cg::Kind::CobbDouglas) cd = &series[i];

  {
    cg::csv::Writer out(outs[0], ctx.config_hash, o.seed);
    out.meta("sigma=" + cg::to_string17(o.sigma));
    out.meta("ell_years=" + cg::to_string17(ell));
    out.meta("draws=" + std::to_string(o.draws));
    out.header({"draw", "kind", "value"});
    for (std::size_t i = 0; i < series.size(); ++i)
      for (int d = 0; d < series[i].draws(); ++d)
        out.row(d, cg::to_string(kinds[i]), series[i].values[d]);
  }
  {
    cg::csv::Writer moments(outs[1], ctx.config_hash, o.seed);
    cg::csv::Writer qq(outs[2], ctx.config_hash, o.seed);
    moments.header({"kind", "basis", "n_used", "excluded", "mean", "sd",
                    "skewness", "excess_kurtosis"});
    qq.header({"kind", "basis", "theoretical", "sample"});
    auto emit = [&](const cg::FluctuationSeries& f, const std::string& kind,
                    const std::string& basis,
                    const cg::FluctuationSeries* base) {
      const cg::Summary s = cg::summarize(f, base);
      moments.row(kind, basis, s.moments.n_used, s.moments.excluded,
                  s.moments.mean, s.moments.sd, s.moments.skewness,
                  s.moments.excess_kurtosis);
      for (const auto& [th, sample] : s.qq)
        qq.row(kind, basis, th, sample);
    };
    for (std::size_t i = 0; i < series.size(); ++i) {
      const std::string name = cg::to_string(kinds[i]);
      emit(series[i], name, "raw", nullptr);
      if (cd && kinds[i] != cg::Kind::CobbDouglas)
        emit(series[i], name, "diff_cd", cd);
    }
  }
  std::cout << "simulated " << o.draws << " draw(s) x " << kinds.size()
            << " kind(s), sigma=" << o.sigma << ", ell=" << o.ell << "\n";
  return 0;
}

int cmd_household(const Options& o, const RunContext& ctx) {
  const cg::csv::Table bt = cg::csv::read(o.shares);
  const int c_sec = bt.require_column("sector_id", o.shares);
  std::vector<long> ids;
  for (const auto& row : bt.rows)
    ids.push_back(cg::csv::parse_int(row[c_sec], o.shares));
  const cg::Vec b0 = column_by_id(bt, o.shares, "b0", ids, -1, "");
  const cg::Vec b1 = column_by_id(bt, o.shares, "b1", ids, -1, "");
  const cg::csv::Table pt = cg::csv::read(o.prices);
  const cg::Vec p0 = column_by_id(pt, o.prices, "p0", ids, -1, "");
  const cg::Vec p1 = column_by_id(pt, o.prices, "p1", ids, -1, "");
  const cg::csv::Table zt = cg::csv::read(o.instruments);
  const int c_method = zt.column("method");
  const std::string zcol = zt.column("tfpg") >= 0 ? "tfpg" : "z";
  const cg::Vec z =
      column_by_id(zt, o.instruments, zcol, ids, c_method, o.method);

  const cg::LambdaEstimate est = cg::estimate_lambda(b0, b1, p0, p1, z);
  json doc;
  doc["version"] = cg::kVersion;
  doc["config"] = ctx.config_hash;
  doc["seed"] = ctx.seed;
  doc["lambda"] = est.lambda;
  doc["intercept"] = est.intercept;
  doc["se_lambda"] = est.se_lambda;
  doc["se_intercept"] = est.se_intercept;
  doc["n_used"] = est.n_used;
  json dropped = json::array();
  for (int idx : est.dropped) dropped.push_back(ids[idx]);
  doc["dropped"] = dropped;
  doc["first_stage_f"] = est.first_stage_f;
  doc["f_df"] = {est.f_df1, est.f_df2};
  doc["sargan"] = est.sargan;
  doc["basmann"] = est.basmann;
  doc["overid_df"] = est.overid_df;
  doc["durbin"] = est.durbin;
  doc["wu_hausman"] = est.wu_hausman;
  doc["wh_df"] = {est.wh_df1, est.wh_df2};
  std::ofstream out(o.out);
  if (!out) throw cg::ValidationError("cannot write '" + o.out + "'");
  out << doc.dump(2) << "\n";
  std::cout << "lambda = " << cg::to_string17(est.lambda) << " (se "
            << cg::to_string17(est.se_lambda) << ", n=" << est.n_used
            << ") -> " << o.out << "\n";
  return 0;
}

struct DynamicWorld {
  EstimatedWorld w;
  cg::HouseholdModel hh;
  cg::CapitalCalibration cal;
  cg::BaselineAggregates base;
  double lambda = 0.0;
};

DynamicWorld dynamic_world(const Options& o) {
  DynamicWorld d{estimate_world(o.input), {}, {}, {}, 0.0};
  d.lambda = o.lambda ? *o.lambda : lambda_from_table(d.w).lambda;
  const double H1 = d.w.tab.h[1].sum();
  if (!(H1 > 0.0))
    throw cg::ValidationError("table has no reference household expenditure");
  d.hh = cg::make_household(d.w.tab.h[1] / H1, d.lambda);
  const double psi_ratio = cg::price_index(d.w.tab.p[1], d.hh) /
                           cg::price_index(d.w.tab.p[0], d.hh);
  d.cal = cg::calibrate_capital(d.w.tab, psi_ratio, o.delta, o.beta);
  d.base = cg::baseline_from_table(d.w.tab);
  return d;
}

int cmd_srop(const Options& o, const RunContext& ctx) {
  const DynamicWorld d = dynamic_world(o);
  cg::AltConfig cfg = o.alt;
  cfg.solver = o.solver;
  cg::csv::Writer out(o.out, ctx.config_hash, ctx.seed);
  out.meta("theta=" + cg::to_string17(o.theta));
  out.meta("lambda=" + cg::to_string17(d.lambda));
  out.meta("delta=" + cg::to_string17(o.delta));
  out.meta("beta=" + cg::to_string17(o.beta));
  if (d.cal.eta_K) out.meta("eta_K=" + cg::to_string17(*d.cal.eta_K));
  out.header({"sector_id", "theta", "benefit", "cost", "srop"});
  auto emit = [&](const std::string& label, int j) {
    const cg::SropResult r =
        cg::srop(d.w.econ, d.hh, d.cal, d.base, j, o.theta, cfg);
    out.row(label, o.theta, r.alt.benefit, r.alt.cost, r.srop);
    return r.srop;
  };
  if (o.sector == "all") {
    for (int j = 0; j < d.w.econ.J; ++j)
      emit(sector_label(d.w.tab, j), j);
    const double all = emit("ALL", cg::kAllSectors);
    std::cout << "simultaneous srop = " << cg::to_string17(all) << " -> "
              << o.out << "\n";
  } else {
    const int j = d.w.tab.index_of(
        cg::csv::parse_int(o.sector, "--sector"));
    const double s = emit(sector_label(d.w.tab, j), j);
    std::cout << "srop(" << o.sector << ") = " << cg::to_string17(s) << " -> "
              << o.out << "\n";
  }
  return 0;
}

int cmd_synergy(const Options& o, const RunContext& ctx) {
  const EstimatedWorld w = estimate_world(o.input);
  const cg::Kind kind = cg::kind_from_string(o.kind);
  if (kind == cg::Kind::Simple)
    throw cg::ValidationError("synergy: the simple economy has no network");
  const cg::Economy econ =
      kind == cg::Kind::CCES
          ? w.econ
          : (kind == cg::Kind::CobbDouglas
                 ? cg::Economy::cobb_douglas(cg::cost_shares(w.tab, 1))
                 : cg::Economy::leontief(cg::cost_shares(w.tab, 1)));
  const cg::BaselineAggregates base = cg::baseline_from_table(w.tab);
  std::vector<cg::Vec> triggers;
  for (int j = 0; j < econ.J; ++j)
    triggers.push_back(cg::standardized_trigger(base, j, o.theta));
  const cg::SynergyResult syn = cg::synergy(econ, triggers, 1.0, 1.0, o.solver);
  if (!syn.complete)
    throw cg::NonConvergenceError(
        "synergy: at least one trigger equilibrium failed to solve");
  cg::csv::Writer out(o.out, ctx.config_hash, ctx.seed);
  out.meta("kind=" + o.kind);
  out.meta("theta=" + cg::to_string17(o.theta));
  out.header({"sector_id", "synergy"});
  for (int j = 0; j < econ.J; ++j)
    out.row(w.tab.sector_ids[j], syn.total[j]);
  std::cout << "synergy (" << o.kind << ") sup-norm "
            << cg::to_string17(syn.total.cwiseAbs().maxCoeff()) << " -> "
            << o.out << "\n";
  return 0;
}

int cmd_elasticity(const Options& o, const RunContext& ctx) {
  if (o.at != "reference")
    throw cg::ValidationError(
        "--at only supports 'reference' (unit prices of the linked table)");
  const std::vector<std::string> outs = split_paths(o.out);
  if (outs.size() != 2)
    throw cg::ValidationError("elasticity --out takes aues.csv,mes.csv");
  const EstimatedWorld w = estimate_world(o.input);
  const int j = w.tab.index_of(cg::csv::parse_int(o.sector, "--sector"));
  const cg::CcesTechnology& tech = w.econ.techs[j];
  const cg::Vec ones = cg::Vec::Ones(w.tab.size());
  const cg::SubstitutionTables tabs =
      cg::substitution_elasticities(tech, ones, 1.0, 1.0);
  std::vector<std::string> labels{"L", "K"};
  for (int k = 0; k < tech.n_factors(); ++k)
    labels.push_back(sector_label(w.tab, tech.factors[k]));
  auto dump = [&](const std::string& path, const cg::Mat& m) {
    cg::csv::Writer out(path, ctx.config_hash, ctx.seed);
    out.meta("sector=" + o.sector);
    out.header({"row_label", "col_label", "value"});
    for (int a = 0; a < tabs.n_inputs; ++a)
      for (int b = 0; b < tabs.n_inputs; ++b)
        out.row(labels[a], labels[b], m(a, b));
  };
  dump(outs[0], tabs.aues);
  dump(outs[1], tabs.mes);
  std::cout << "elasticities of sector " << o.sector << " over "
            << tabs.n_inputs << " inputs -> " << outs[0] << ", " << outs[1]
            << "\n";
  return 0;
}

int cmd_pipeline(const Options& o, const RunContext& ctx) {
  const cg::LinkedIoTable tab = load_input(o.input);
  const cg::BalanceReport bal = cg::validate(tab, o.tolerance);
  const cg::CascadingOrder ord = cg::cascading_order(cg::incidence(tab));
  const cg::Economy econ = cg::estimate_economy(tab, ord);
  const cg::Mat tauhat = cg::restoring_tau(econ, tab);
  const cg::RestorationReport rep =
      cg::verify_restoring(econ, tab, tauhat, o.solver);
  cg::csv::Writer out(o.out, ctx.config_hash, ctx.seed);
  out.header({"key", "value"});
  out.row("sectors", static_cast<long>(tab.size()));
  out.row("balance_max_residual", bal.max_residual);
  out.row("balance_ok", std::string(bal.ok() ? "true" : "false"));
  out.row("order_violations", static_cast<long>(ord.violations));
  out.row("restore_price_gap_p0", rep.price_gap[0]);
  out.row("restore_price_gap_p1", rep.price_gap[1]);
  out.row("restore_share_gap_p0", rep.share_gap[0]);
  out.row("restore_share_gap_p1", rep.share_gap[1]);
  out.row("restore_converged",
          std::string(rep.converged() ? "true" : "false"));
  std::cout << "pipeline: " << tab.size() << " sectors"
            << ", balance residual " << cg::to_string17(bal.max_residual)
            << ", " << ord.violations << " order violation(s)"
            << ", restoration gap "
            << cg::to_string17(std::max(
                   {rep.price_gap[0], rep.price_gap[1], rep.share_gap[0],
                    rep.share_gap[1]}))
            << " -> " << o.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

void add_solver_options(CLI::App* sub, Options& o) {
  sub->add_option("--tol", o.solver.tol, "price fixed-point tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--max-iter", o.solver.max_iter,
                  "price fixed-point iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--damping", o.solver.omega, "fixed-point damping factor")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

int dispatch(const std::string& name, const Options& o,
             const RunContext& ctx) {
  if (name == "load") return cmd_load(o, ctx);
  if (name == "order") return cmd_order(o, ctx);
  if (name == "estimate") return cmd_estimate(o, ctx);
  if (name == "tfp") return cmd_tfp(o, ctx);
  if (name == "solve") return cmd_solve(o, ctx);
  if (name == "simulate") return cmd_simulate(o, ctx);
  if (name == "household") return cmd_household(o, ctx);
  if (name == "srop") return cmd_srop(o, ctx);
  if (name == "synergy") return cmd_synergy(o, ctx);
  if (name == "elasticity") return cmd_elasticity(o, ctx);
  if (name == "pipeline") return cmd_pipeline(o, ctx);
  throw cg::ValidationError("unknown subcommand '" + name + "'");
}

int error_exit(const std::string& type, const std::string& message, int code) {
  json err;
  err["error"]["type"] = type;
  err["error"]["message"] = message;
  err["error"]["exit"] = code;
  std::cerr << err.dump() << "\n";
  return code;
}

// Effective configuration with output destinations removed: the config hash
// identifies the computation, so runs that differ only in where they write
// must hash (and therefore serialize) identically.
std::string config_fingerprint(CLI::App& app) {
  std::istringstream in(app.config_to_str(true, false));
  std::string line, keep;
  while (std::getline(in, line)) {
    const std::size_t eq = line.find('=');
    std::string key = eq == std::string::npos ? line : line.substr(0, eq);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    const std::size_t dot = key.rfind('.');  // options come subcommand-dotted
    if (dot != std::string::npos) key.erase(0, dot + 1);
    if (key == "out" || key == "ccdf") continue;
    keep += line;
    keep += '\n';
  }
  return keep;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cascade-ge: cascaded-CES production networks on linked "
               "input-output tables"};
  app.set_version_flag("--version", std::string(cg::kVersion));
  app.set_config("--config", "", "flat key=value configuration file");
  app.require_subcommand(1);

  Options o;

  CLI::App* load = app.add_subcommand(
      "load", "read a linked table and report balance residuals");
  load->add_option("--input", o.input, "long-format CSV, or t0.csv,t1.csv")
      ->required();
  load->add_option("--report", o.report, "write balances.csv here");
  load->add_option("--tolerance", o.tolerance, "relative balance tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  CLI::App* order = app.add_subcommand(
      "order", "compute the cascading order and CCDF curves");
  order->add_option("--input", o.input, "linked table CSV")->required();
  order->add_option("--out", o.out, "order.csv destination")->required();
  order->add_option("--ccdf", o.ccdf, "optional ccdf.csv destination");
  order->add_option("--period", o.period, "incidence period (0 or 1)")
      ->check(CLI::Range(0, 1))
      ->capture_default_str();

  CLI::App* estimate = app.add_subcommand(
      "estimate", "fit one technology chain per sector (exact two-point)");
  estimate->add_option("--input", o.input, "linked table CSV")->required();
  estimate->add_option("--order", o.order_path,
                       "order.csv (computed internally when omitted)");
  estimate->add_option("--out", o.out, "tech.csv destination")->required();

  CLI::App* tfp =
      app.add_subcommand("tfp", "sector TFP growth between the two periods");
  tfp->add_option("--input", o.input, "linked table CSV")->required();
  tfp->add_option("--method", o.method, "cces or translog")
      ->capture_default_str();
  tfp->add_option("--out", o.out, "tfpg.csv destination")->required();

  CLI::App* solve = app.add_subcommand(
      "solve", "equilibrium prices for a technology file and productivity");
  solve->add_option("--tech", o.tech, "tech.csv from `estimate`")->required();
  solve->add_option("--tau", o.tau, "tau.csv: sector_id,tau[,period]")
      ->required();
  solve->add_option("--kind", o.kind, "cces, cd, leontief, or simple")
      ->capture_default_str();
  solve->add_option("--out", o.out, "prices.csv[,shares.csv]")->required();
  solve->add_option("--period", o.period, "period filter for tau.csv")
      ->capture_default_str();
  solve->add_option("--r", o.r, "capital rental rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  solve->add_option("--w", o.w, "wage rate (the numeraire is r = w = 1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_solver_options(solve, o);

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte Carlo aggregate fluctuations under sector shocks");
  simulate->add_option("--input", o.input, "linked table CSV")->required();
  simulate->add_option("--kind", o.kinds, "comma list of economy kinds")
      ->capture_default_str();
  simulate->add_option("--sigma", o.sigma, "annualized shock volatility")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  simulate
      ->add_option("--ell", o.ell, "horizon: '7h' hours, '2y' or bare years")
      ->capture_default_str();
  simulate->add_option("--draws", o.draws, "number of Monte Carlo draws")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--seed", o.seed, "shock RNG seed")
      ->capture_default_str();
  simulate->add_option("--out", o.out, "series.csv,moments.csv,qq.csv")
      ->required();
  add_solver_options(simulate, o);

  CLI::App* household = app.add_subcommand(
      "household", "weighted-2SLS estimate of the expenditure exponent");
  household->add_option("--shares", o.shares, "b.csv: sector_id,b0,b1")
      ->required();
  household->add_option("--prices", o.prices, "p.csv: sector_id,p0,p1")
      ->required();
  household
      ->add_option("--instruments", o.instruments,
                   "tfpg.csv: sector_id[,method],tfpg (or column z)")
      ->required();
  household->add_option("--method", o.method, "instrument method filter")
      ->capture_default_str();
  household->add_option("--out", o.out, "lambda.json destination")->required();

  CLI::App* srop = app.add_subcommand(
      "srop", "social rate of return on standardized productivity triggers");
  srop->add_option("--input", o.input, "linked table CSV")->required();
  srop->add_option("--sector", o.sector, "'all' or one sector id")
      ->capture_default_str();
  srop->add_option("--theta", o.theta, "trigger size, monetary units")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  srop->add_option("--delta", o.delta, "five-period depreciation rate")
      ->capture_default_str();
  srop->add_option("--beta", o.beta, "five-period discount factor")
      ->capture_default_str();
  srop->add_option("--lambda", o.lambda,
                   "household exponent (estimated from the table if omitted)");
  srop->add_option("--out", o.out, "srop.csv destination")->required();
  add_solver_options(srop, o);

  CLI::App* synergy = app.add_subcommand(
      "synergy", "interaction of simultaneous sector productivity triggers");
  synergy->add_option("--input", o.input, "linked table CSV")->required();
  synergy->add_option("--kind", o.kind, "cces, cd, or leontief")
      ->capture_default_str();
  synergy->add_option("--theta", o.theta, "trigger size, monetary units")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synergy->add_option("--out", o.out, "synergy.csv destination")->required();
  add_solver_options(synergy, o);

  CLI::App* elasticity = app.add_subcommand(
      "elasticity", "Allen-Uzawa and Morishima tables for one sector");
  elasticity->add_option("--input", o.input, "linked table CSV")->required();
  elasticity->add_option("--sector", o.sector, "sector id")->required();
  elasticity->add_option("--at", o.at, "evaluation point (reference)")
      ->capture_default_str();
  elasticity->add_option("--out", o.out, "aues.csv,mes.csv")->required();

  CLI::App* pipeline = app.add_subcommand(
      "pipeline", "load -> order -> estimate -> verify restoration");
  pipeline->add_option("--input", o.input, "linked table CSV")->required();
  o.out = "summary.csv";
  pipeline->add_option("--out", o.out, "summary.csv destination")
      ->capture_default_str();
  pipeline->add_option("--tolerance", o.tolerance,
                       "relative balance tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_solver_options(pipeline, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\n";
    return error_exit("usage", e.what(), 1);
  }

  RunContext ctx;
  ctx.config_hash = cg::hex64(cg::fnv1a(config_fingerprint(app)));
  ctx.seed = app.got_subcommand("simulate") ? o.seed : 0;

  try {
    return dispatch(app.get_subcommands().front()->get_name(), o, ctx);
  } catch (const cg::DegenerateNestError& e) {
    json err;
    err["error"]["type"] = "degenerate-nest";
    err["error"]["message"] = e.what();
    err["error"]["sector"] = e.sector;
    err["error"]["nest"] = e.nest;
    err["error"]["exit"] = 1;
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const cg::NonConvergenceError& e) {
    return error_exit("non-convergence", e.what(), 2);
  } catch (const cg::SingularSystemError& e) {
    return error_exit("singular-system", e.what(), 2);
  } catch (const cg::ValidationError& e) {
    return error_exit("validation", e.what(), 1);
  } catch (const cg::Error& e) {
    return error_exit("error", e.what(), 1);
  } catch (const std::exception& e) {
    return error_exit("internal", e.what(), 1);
  }
}
