#include <gtest/gtest.h>

#include "sem/audit.hpp"
#include "sem/market_io.hpp"

using namespace sem;

namespace {

MarketSpec load(const char* name) { return load_market_spec(std::string(SEM_MARKETS_DIR) + "/" + name); }

// x > y > o over objects (x, y, o)
WeakOrder xyo() { return WeakOrder({{0}, {1}, {2}}, 3); }

std::vector<double> random_row(rng::Engine& eng, std::size_t X) {
  std::vector<double> r(X);
  double s = 0;
  for (auto& v : r) s += (v = std::floor(rng::uniform(eng) * 4) / 4);
  if (s == 0) r[0] = s = 1;
  for (auto& v : r) v /= s;
  return r;
}

// Brute force: does some integral reallocation dominate the integral one?
bool integral_dominated(const EfficiencyInstance& in) {
  const std::size_t G = in.rows.size(), X = in.supply.size();
  std::vector<std::size_t> pick(G, 0);
  for (;;) {
    std::vector<double> used(X, 0);
    for (std::size_t g = 0; g < G; ++g) used[pick[g]] += 1;
    bool feasible = true;
    for (std::size_t x = 0; x < X; ++x) feasible = feasible && used[x] <= in.supply[x];
    if (feasible) {
      bool weak = true, strict = false;
      for (std::size_t g = 0; g < G; ++g) {
        std::vector<double> row(X, 0);
        row[pick[g]] = 1;
        const auto v = sd_compare(in.prefs[g], row, in.rows[g]);
        weak = weak && v.dominates();
        strict = strict || v.relation == Dominance::strictly_dominates;
      }
      if (weak && strict) return true;
    }
    std::size_t g = 0;
    while (g < G && ++pick[g] == X) pick[g++] = 0;
    if (g == G) return false;
  }
}

}  // namespace

TEST(SdCompare, Examples) {
  const auto p = xyo();
  auto v = sd_compare(p, {1, 0, 0}, {0, 1, 0});
  EXPECT_EQ(v.relation, Dominance::strictly_dominates);
  EXPECT_EQ(v.cutoff, 0u);
  EXPECT_EQ(sd_compare(p, {0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}).relation, Dominance::equal);
  EXPECT_EQ(sd_compare(p, {0.6, 0, 0.4}, {0.5, 0.5, 0}).relation, Dominance::incomparable);
  EXPECT_EQ(sd_compare(p, {0, 1, 0}, {1, 0, 0}).relation, Dominance::strictly_dominated);
}

TEST(SdCompare, IsAPartialOrder) {
  auto eng = rng::make_engine(5);
  for (const auto& p : all_weak_orders(3)) {
    for (int trial = 0; trial < 300; ++trial) {
      const auto a = random_row(eng, 3), b = random_row(eng, 3), c = random_row(eng, 3);
      EXPECT_EQ(sd_compare(p, a, a).relation, Dominance::equal);
      const auto ab = sd_compare(p, a, b), ba = sd_compare(p, b, a);
      if (ab.relation == Dominance::strictly_dominates) {
        EXPECT_EQ(ba.relation, Dominance::strictly_dominated);
      }
      if (ab.relation == Dominance::equal) {
        EXPECT_EQ(ba.relation, Dominance::equal);
      }
      if (ab.dominates() && sd_compare(p, b, c).dominates()) {
        EXPECT_TRUE(sd_compare(p, a, c).dominates());
      }
    }
  }
}

TEST(EfficiencyOracle, FindsTheImpossibilitySwap) {
  // a indifferent over {x,y} holds x; b (x > y) holds y
  EfficiencyInstance in;
  in.prefs = {WeakOrder({{0, 1}, {2}}, 3), xyo()};
  in.mass = {1, 1};
  in.rows = {{1, 0, 0}, {0, 1, 0}};
  in.supply = {1, 1, 5};
  for (auto mode : {OracleMode::exact, OracleMode::floating}) {
    const auto v = ordinal_efficiency_oracle(in, mode);
    ASSERT_FALSE(v.efficient);
    EXPECT_NEAR(v.dominating[0][1], 1.0, 1e-9);
    EXPECT_NEAR(v.dominating[1][0], 1.0, 1e-9);
  }
}

TEST(EfficiencyOracle, TopChoicesAreEfficient) {
  EfficiencyInstance in;
  in.prefs = {xyo(), WeakOrder({{1}, {0}, {2}}, 3)};
  in.mass = {1, 1};
  in.rows = {{1, 0, 0}, {0, 1, 0}};
  in.supply = {1, 1, 5};
  EXPECT_TRUE(ordinal_efficiency_oracle(in).efficient);
  EXPECT_TRUE(ordinal_efficiency_oracle(in).exact);
}

TEST(EfficiencyOracle, MatchesBruteForceOnSmallIntegralAllocations) {
  auto eng = rng::make_engine(9);
  const auto orders = all_weak_orders(3);
  int dominated = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t G = 1 + rng::below(eng, 4);
    EfficiencyInstance in;
    in.supply = {double(rng::below(eng, 3)), double(rng::below(eng, 3)), double(G)};
    std::vector<double> used(3, 0);
    for (std::size_t g = 0; g < G; ++g) {
      in.prefs.push_back(orders[rng::below(eng, orders.size())]);
      in.mass.push_back(1);
      std::size_t x;
      do x = rng::below(eng, 3);
      while (used[x] + 1 > in.supply[x]);
      used[x] += 1;
      std::vector<double> row(3, 0);
      row[x] = 1;
      in.rows.push_back(row);
    }
    const bool brute = integral_dominated(in);
    dominated += brute;
    const auto v = ordinal_efficiency_oracle(in, OracleMode::exact);
    EXPECT_EQ(!v.efficient, brute) << "trial " << trial;
    EXPECT_EQ(!ordinal_efficiency_oracle(in, OracleMode::floating).efficient, brute) << "trial " << trial;
    if (!v.efficient) {
      // soundness: the witness is feasible and dominates
      bool strict = false;
      std::vector<double> col(3, 0);
      for (std::size_t g = 0; g < G; ++g) {
        const auto d = sd_compare(in.prefs[g], v.dominating[g], in.rows[g], 1e-9);
        EXPECT_TRUE(d.dominates());
        strict = strict || d.relation == Dominance::strictly_dominates;
        for (std::size_t x = 0; x < 3; ++x) col[x] += v.dominating[g][x];
      }
      EXPECT_TRUE(strict);
      for (std::size_t x = 0; x < 3; ++x) EXPECT_LE(col[x], in.supply[x] + 1e-9);
    }
  }
  EXPECT_GT(dominated, 20);
}

TEST(EfficiencyOracle, NtbEquilibriaAreEfficient) {
  const auto shocks = ShockSample::draw({ShockKind::ntb, 0.08, 0.02}, 3, 4000, 1);
  const auto base = load("foster_homes.json");
  for (int t = 1; t <= base.horizon(); ++t) {
    const auto eq = solve_price_equilibrium(base, t, base.objects.supply, shocks);
    ASSERT_TRUE(eq.converged);
    EXPECT_TRUE(ordinal_efficiency_oracle(efficiency_instance(eq), OracleMode::floating).efficient) << t;
  }
  // two objects, mass 2, x > y, budget 1, s_x = 1
  Fundamentals f{3, 2, {{"i", std::nullopt, 1, WeakOrder({{0}, {1}, {2}}, 3), 1.0, 2.0}}, {1.0, 5.0, 10.0}};
  const auto eq = solve_equilibrium(f, ShockSample::draw({ShockKind::ntb, 0.5, 0.0}, 3, 4000, 2));
  EXPECT_TRUE(ordinal_efficiency_oracle(efficiency_instance(eq)).efficient);
}

TEST(EfficiencyOracle, RtbEquilibriaPassingTheGapConditionAreEfficient) {
  const auto base = load("foster_homes.json");
  auto spec = base;
  spec.shock = {ShockKind::rtb, 0.08, 0.02};
  const auto shocks = ShockSample::draw(spec.shock, 3, 4000, 3);
  int checked = 0;
  for (int t = 1; t <= spec.horizon(); ++t) {
    const auto eq = solve_price_equilibrium(spec, t, spec.objects.supply, shocks);
    if (!eq.converged || !rtb_gap_condition(eq.prices, spec.shock.rtb_halfwidth).holds) continue;
    ++checked;
    EXPECT_TRUE(ordinal_efficiency_oracle(efficiency_instance(eq), OracleMode::floating).efficient) << t;
  }
  EXPECT_GT(checked, 0);
}

TEST(GreedyCheck, SemRunsPass) {
  const auto base = load("foster_homes.json");
  for (int n : {1, 5, 25}) {
    const auto spec = replicate(base, n);
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      const auto run = run_sem(spec, draw_arrival_sequence(spec, seed), seed);
      const auto g = greedy_check(run.state.history);
      EXPECT_TRUE(g.holds) << "n=" << n << " seed=" << seed << " violations=" << g.violations.size();
      EXPECT_TRUE(envy_check(run.state.history).holds) << "n=" << n << " seed=" << seed;
    }
  }
}

TEST(GreedyCheck, ImpossibilityTracePasses) {
  const auto spec = load("impossibility.json");
  const std::vector<std::vector<AgentInstance>> seq{{{*spec.find_type("a"), 1, 0}}, {{*spec.find_type("b"), 2, 0}}};
  const auto run = run_sem(spec, seq, 1, {{}, 2000, false});
  EXPECT_TRUE(greedy_check(run.state.history).holds);
}

TEST(GreedyCheck, ConstructedViolation) {
  // period 1: prefers x, gets y while x is left; period 2 takes x
  PeriodRecord p1, p2;
  p1.period = 1;
  p1.arrivals = {{"i", std::nullopt, xyo()}};
  p1.supply_before = {1, 1, 5};
  p1.lotteries = {{0, 1, 0}};
  p1.assignment = {1};
  p2.period = 2;
  p2.arrivals = {{"j", std::nullopt, xyo()}};
  p2.supply_before = {1, 0, 5};
  p2.lotteries = {{1, 0, 0}};
  p2.assignment = {0};
  const auto rep = greedy_check({p1, p2});
  ASSERT_FALSE(rep.holds);
  EXPECT_EQ(rep.violations[0].period, 1);
  EXPECT_EQ(rep.violations[0].better, 0u);
  const auto envy = envy_check({p1, p2});
  ASSERT_FALSE(envy.holds);
  EXPECT_EQ(envy.pairs[0].other_period, 2);
}

TEST(GreedyCheck, ExhaustedSupplyIsVacuous) {
  PeriodRecord p;
  p.period = 1;
  p.arrivals = {{"i", std::nullopt, xyo()}, {"i", std::nullopt, xyo()}};
  p.supply_before = {0, 0, 5};
  p.lotteries = {{0, 0, 1}, {0, 0, 1}};
  p.assignment = {2, 2};
  EXPECT_TRUE(greedy_check({p}).holds);
  EXPECT_TRUE(envy_check({p}).holds);
}

TEST(Sp1Probe, TruthfulReportIsNeverProfitable) {
  const auto spec = load("foster_homes.json");
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 30; ++s) seeds.push_back(s);
  const auto c1 = *spec.find_type("c1"), c2 = *spec.find_type("c2");
  EXPECT_EQ(sp1_probe(spec, 5, c1, c1, seeds).profitable, 0u);
  EXPECT_EQ(sp1_probe(spec, 1, c1, c2, seeds).profitable, 0u);
  EXPECT_EQ(sp1_probe(spec, 1, c2, c1, seeds).profitable, 0u);
  EXPECT_EQ(sp1_probe(spec, 1, c1, c2, seeds).trials, seeds.size());
}

TEST(Sp1Probe, RejectsDifferentArrivalTimes) {
  const auto spec = load("impossibility.json");
  EXPECT_THROW(sp1_probe(spec, 1, *spec.find_type("a"), *spec.find_type("b"), {1}), Error);
}
