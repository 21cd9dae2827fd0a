#include "cascade_ge/dynge.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cascade_ge/cascade.hpp"
#include "support/synthetic.hpp"

using namespace cascade_ge;

namespace {

// Minimal one-sector table carrying just what the capital calibration reads.
LinkedIoTable capital_fixture(double K0, double K1, double G0, double G1) {
  LinkedIoTable tab;
  tab.sector_ids = {1};
  for (int t = 0; t < 2; ++t) {
    tab.x[t] = Mat::Zero(1, 1);
    tab.rk[t] = Vec::Constant(1, t == 0 ? K0 : K1);
    tab.wl[t] = Vec::Ones(1);
    tab.y[t] = Vec::Ones(1);
    tab.h[t] = Vec::Ones(1);
    tab.g[t] = Vec::Constant(1, t == 0 ? G0 : G1);
    tab.m[t] = Vec::Zero(1);
    tab.p[t] = Vec::Ones(1);
    tab.r[t] = 1.0;
    tab.w[t] = 1.0;
  }
  tab.raw_p1 = Vec::Ones(1);
  return tab;
}

// Fully estimated synthetic economy plus its dynamic calibration.
struct DyngeWorld {
  testing::SyntheticWorld world;
  Economy econ;
  CapitalCalibration cal;
  BaselineAggregates base;
};

DyngeWorld dynge_world(unsigned seed, int J) {
  DyngeWorld d{testing::synthetic_table(seed, J), Economy::simple(1), {}, {}};
  const CascadingOrder order = cascading_order(incidence(d.world.table));
  d.econ = estimate_economy(d.world.table, order);
  const double psi_ratio = price_index(d.world.table.p[1], d.world.hh) /
                           price_index(d.world.table.p[0], d.world.hh);
  d.cal = calibrate_capital(d.world.table, psi_ratio);
  d.base = baseline_from_table(d.world.table);
  return d;
}

}  // namespace

TEST_CASE("five-year depreciation and discounting defaults") {
  CHECK(kDefaultDelta ==
        Catch::Approx(1.0 - std::pow(0.875, 5)).epsilon(1e-15));
  CHECK(kDefaultBeta == Catch::Approx(std::pow(1.03, -5)).epsilon(1e-15));
}

TEST_CASE("capital calibration on a hand-checked fixture") {
  const LinkedIoTable tab = capital_fixture(2.0, 2.2, 1.5, 1.8);
  const CapitalCalibration cal = calibrate_capital(tab, 1.05, 0.4, 0.9);
  CHECK(cal.K0 == Catch::Approx(2.0));
  CHECK(cal.K1 == Catch::Approx(2.2));
  CHECK(cal.z0rho == Catch::Approx(1.5));       // 1.5 / (2.2 - 0.6*2.0)
  CHECK(cal.z1rho == Catch::Approx(1.25));      // (1.05*1.5/0.9 - 1) / 0.6
  CHECK(cal.K2 == Catch::Approx(2.76));         // 1.8/1.25 + 0.6*2.2
  REQUIRE(cal.eta_K.has_value());
  CHECK(*cal.eta_K == Catch::Approx(-2.64));    // (1.44-1)/(-0.25) * 1.5/1
}

TEST_CASE("capital calibration rejects impossible configurations") {
  const LinkedIoTable tab = capital_fixture(2.0, 2.2, 1.5, 1.8);
  CHECK_THROWS_AS(calibrate_capital(tab, 1.0, 1.2, 0.9), ValidationError);
  CHECK_THROWS_AS(calibrate_capital(tab, 1.0, 0.4, 0.0), ValidationError);
  // Shrinking capital: K1 < (1-delta) K0.
  CHECK_THROWS_AS(
      calibrate_capital(capital_fixture(2.0, 1.0, 1.5, 1.8), 1.0, 0.4, 0.9),
      ValidationError);
  // No reference investment.
  CHECK_THROWS_AS(
      calibrate_capital(capital_fixture(2.0, 2.2, 0.0, 1.8), 1.0, 0.4, 0.9),
      ValidationError);
  // Euler equation pushed to a negative capital price.
  CHECK_THROWS_AS(calibrate_capital(tab, 0.1, 0.4, 0.9), ValidationError);
}

TEST_CASE("a steady state leaves the investment response unidentified") {
  const LinkedIoTable tab = capital_fixture(2.0, 2.0, 2.0, 2.0);
  const CapitalCalibration cal = calibrate_capital(tab, 0.9, 0.5, 0.9);
  CHECK(cal.z0rho == Catch::Approx(2.0));
  CHECK(cal.z1rho == Catch::Approx(2.0));
  CHECK_FALSE(cal.eta_K.has_value());
  // Downstream counterfactuals refuse to run on it.
  const BaselineAggregates base = baseline_from_table(tab);
  const Economy econ = Economy::cobb_douglas(cost_shares(tab, 1));
  const HouseholdModel hh = make_household(Vec::Ones(1), 0.0);
  CHECK_THROWS_AS(
      alternative_equilibrium(econ, hh, cal, base, Vec::Ones(1)),
      ValidationError);
}

TEST_CASE("baseline aggregates mirror the reference period of the table") {
  const testing::SyntheticWorld world = testing::synthetic_table(61, 5);
  const BaselineAggregates base = baseline_from_table(world.table);
  CHECK(base.H1 == Catch::Approx(world.table.h[1].sum()));
  CHECK(base.G1 == Catch::Approx(world.table.g[1].sum()));
  CHECK(base.M1 == Catch::Approx(world.table.m[1].sum()));
  CHECK(base.L1 == Catch::Approx(world.table.wl[1].sum()));
  CHECK(base.K1 == Catch::Approx(world.table.rk[1].sum()));
  CHECK(base.kappa.sum() == Catch::Approx(1.0));
  CHECK((base.p1.array() - 1.0).abs().maxCoeff() == 0.0);
  CHECK(base.r1 == 1.0);
  CHECK(base.w1 == 1.0);
}

TEST_CASE("no productivity change reproduces the baseline exactly") {
  const DyngeWorld d = dynge_world(71, 5);
  const AltState alt = alternative_equilibrium(d.econ, d.world.hh, d.cal,
                                               d.base, Vec::Ones(5));
  CHECK((alt.p.array() - 1.0).abs().maxCoeff() < 1e-10);
  CHECK(std::abs(alt.psi - 1.0) < 1e-10);
  CHECK(std::abs(alt.z1rho - d.cal.z1rho) < 1e-10 * d.cal.z1rho);
  CHECK(std::abs(alt.G - d.base.G1) < 1e-8 * d.base.G1);
  CHECK(std::abs(alt.H - d.base.H1) < 1e-8 * d.base.H1);
  CHECK(std::abs(alt.benefit) < 1e-7 * d.base.H1);
  CHECK(std::abs(alt.cost) < 1e-7 * d.base.H1);
  CHECK(alt.budget_residual < 1e-8 * d.base.H1);
}

TEST_CASE("a productivity gain lowers prices and balances the budget") {
  const DyngeWorld d = dynge_world(73, 6);
  Vec tau = Vec::Ones(6);
  tau[2] = 1.03;
  const AltState alt =
      alternative_equilibrium(d.econ, d.world.hh, d.cal, d.base, tau);
  CHECK(alt.p.maxCoeff() <= 1.0 + 1e-12);
  CHECK(alt.p[2] < 1.0);
  CHECK(alt.psi < 1.0);
  CHECK(alt.budget_residual < 1e-8 * d.base.H1);
  CHECK(alt.h_iterations < 1000);
}

TEST_CASE("standardized triggers scale with reference output") {
  const DyngeWorld d = dynge_world(79, 4);
  const double theta = 0.01 * d.base.y1.minCoeff();
  const Vec single = standardized_trigger(d.base, 2, theta);
  for (int j = 0; j < 4; ++j)
    CHECK(single[j] == (j == 2 ? 1.0 + theta / d.base.y1[2] : 1.0));
  const Vec all = standardized_trigger(d.base, kAllSectors, theta);
  for (int j = 0; j < 4; ++j)
    CHECK(all[j] == Catch::Approx(1.0 + theta / d.base.y1[j]));
  CHECK_THROWS_AS(standardized_trigger(d.base, 9, theta), ValidationError);
}

TEST_CASE("the social rate of return stabilizes for small triggers") {
  const DyngeWorld d = dynge_world(83, 5);
  CHECK(srop(d.econ, d.world.hh, d.cal, d.base, 1, 0.0).srop == 0.0);
  const double y = d.base.y1[1];
  const double s1 =
      srop(d.econ, d.world.hh, d.cal, d.base, 1, 1e-4 * y).srop;
  const double s2 =
      srop(d.econ, d.world.hh, d.cal, d.base, 1, 0.5e-4 * y).srop;
  REQUIRE(s1 != 0.0);
  CHECK(std::abs(s1 - s2) < 0.01 * std::abs(s1));
  // The simultaneous variant also runs.
  const SropResult all =
      srop(d.econ, d.world.hh, d.cal, d.base, kAllSectors, 1e-4 * y);
  CHECK(std::isfinite(all.srop));
}

TEST_CASE("a lone trigger has nothing to interact with") {
  const DyngeWorld d = dynge_world(89, 4);
  Vec tau = Vec::Ones(4);
  tau[1] = 1.05;
  const SynergyResult syn = synergy(d.econ, {tau});
  REQUIRE(syn.complete);
  CHECK(syn.total.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Cobb-Douglas economies have no synergy at all") {
  testing::Rng rng(97);
  const Economy econ =
      Economy::cobb_douglas(testing::random_share_matrix(rng, 5));
  std::vector<Vec> triggers;
  for (int k = 0; k < 3; ++k) {
    Vec tau = Vec::Ones(5);
    tau[k] = 1.0 + 0.1 * (k + 1);
    triggers.push_back(tau);
  }
  const SynergyResult syn = synergy(econ, triggers);
  REQUIRE(syn.complete);
  CHECK(syn.total.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("failed solves poison the synergy total visibly") {
  ShareMatrix ref;  // symmetric half-cross: spectral radius exactly 1/2
  ref.s = Mat::Zero(2, 2);
  ref.s(1, 0) = 0.5;
  ref.s(0, 1) = 0.5;
  ref.s_cap = Vec::Constant(2, 0.25);
  ref.s_lab = Vec::Constant(2, 0.25);
  const Economy econ = Economy::leontief(ref);
  Vec fine = Vec::Ones(2);
  fine[0] = 1.1;
  const Vec fatal = Vec::Constant(2, 0.4);  // rho(A/tau) = 1.25: no Neumann
  const SynergyResult syn = synergy(econ, {fine, fatal});
  CHECK(syn.trigger_ok[0] == 1);
  CHECK(syn.trigger_ok[1] == 0);
  CHECK_FALSE(syn.complete);
  CHECK(syn.total.array().isNaN().all());
}

TEST_CASE("synergy dimensions must match the economy") {
  const DyngeWorld d = dynge_world(103, 3);
  CHECK_THROWS_AS(synergy(d.econ, {Vec::Ones(4)}), ValidationError);
}
