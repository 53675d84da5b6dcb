#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sem/market_io.hpp"
#include "sem/report.hpp"

using namespace sem;

namespace {

MarketSpec load(const char* name) { return load_market_spec(std::string(SEM_MARKETS_DIR) + "/" + name); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Table1, AmpleSupplyPlacesEveryone) {
  auto spec = load("foster_homes.json");
  for (std::size_t x = 0; x < spec.num_objects(); ++x)
    if (x != spec.null_object()) spec.objects.supply[x] = 10;
  Table1Config cfg;
  cfg.replicas = {1, 2};
  cfg.markets = 5;
  const auto res = table1(spec, cfg);
  for (const auto& c : res.cells) {
    EXPECT_DOUBLE_EQ(c.mean, 1.0);
    EXPECT_EQ(c.seeds, 5u);
  }
}

TEST(Table1, WorkerCountDoesNotChangeOutput) {
  const auto spec = load("foster_homes.json");
  Table1Config cfg;
  cfg.replicas = {1, 5};
  cfg.markets = 8;
  cfg.mechanisms = {Mechanism::sem, Mechanism::sd_rtb, Mechanism::omniscient};
  const auto a = table1(spec, cfg);
  cfg.workers = 3;
  const auto b = table1(spec, cfg);
  EXPECT_EQ(report::table1_csv(a.cells), report::table1_csv(b.cells));
  for (std::size_t i = 0; i < a.runs.size(); ++i) EXPECT_EQ(a.runs[i].placement_rate, b.runs[i].placement_rate);
}

TEST(Table1, PairedRunsShareArrivals) {
  const auto spec = load("foster_homes.json");
  Table1Config cfg;
  cfg.replicas = {5};
  cfg.markets = 30;
  cfg.mechanisms = {Mechanism::sd_rtb, Mechanism::omniscient};
  const auto res = table1(spec, cfg);
  for (std::size_t m = 0; m < cfg.markets; ++m) {
    const auto& sd = res.runs[m];
    const auto& om = res.runs[cfg.markets + m];
    EXPECT_EQ(sd.seed, om.seed);
    EXPECT_GE(om.placement_rate, sd.placement_rate);
  }
}

TEST(Table1, MatchesCommittedGolden) {
  const auto spec = load("foster_homes.json");
  const auto res = table1(spec, Table1Config{});
  EXPECT_EQ(report::table1_csv(res.cells), slurp(std::string(SEM_GOLDEN_DIR) + "/table1_summary.csv"));
}

TEST(Report, HeadersAndEmptyResults) {
  EXPECT_EQ(report::table1_csv({}), "mechanism,n,mean,sd,seeds\n");
  EXPECT_EQ(report::runs_csv({}), "mechanism,n,seed,placement_rate,residuals,wall_seconds\n");
  const auto line = report::table1_csv({{Mechanism::sd_rtb, 5, 0.5, 0.25, 25}});
  EXPECT_EQ(line, "mechanism,n,mean,sd,seeds\nsd-rtb,5,0.500000,0.250000,25\n");
}

TEST(Report, UnwritablePathIsAnIoError) {
  try {
    report::write_file("/nonexistent-dir/x.csv", "a");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io);
  }
}

TEST(Report, DensityCurveIntegratesToAboutOne) {
  const std::vector<double> xs{0.4, 0.45, 0.5, 0.55, 0.6};
  const auto y = report::density_curve(xs, 1001);
  double area = 0;
  for (double v : y) area += v / 1000.0;
  EXPECT_NEAR(area, 1.0, 0.02);
  RunSummary r;
  r.placement_rate = 0.5;
  const auto svg = report::density_svg({r});
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_NE(svg.find("n = 1"), std::string::npos);
}

TEST(Stats, MeanSdMedian) {
  EXPECT_DOUBLE_EQ(sample_mean({1, 2, 3}), 2.0);
  EXPECT_DOUBLE_EQ(sample_sd({1, 2, 3}), 1.0);
  EXPECT_DOUBLE_EQ(sample_sd({4}), 0.0);
  EXPECT_DOUBLE_EQ(median_of({3, 1, 2, 10}), 2.5);
  EXPECT_EQ(inversions({3, 2, 2, 2.5, 1}), 1u);
}

TEST(Convergence, PointMassArrivalsLeaveOnlyRoundingNoise) {
  auto spec = load("foster_homes.json");
  // only the selective type, which is never indifferent between homes
  const auto c1 = *spec.find_type("c1");
  for (auto& row : spec.arrivals.density)
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = i == c1 ? 1.0 : 0.0;
  ConvergenceConfig cfg;
  cfg.replicas = {1, 10, 100};
  cfg.seeds = 5;
  const auto res = convergence_study(spec, cfg);
  for (const auto& row : res.rows)
    for (double d : row.distances) EXPECT_LE(d, 0.05) << "n=" << row.n;
}

TEST(Perturbation, ZeroShockLeavesPricesAndTies) {
  const auto spec = load("regularity.json");
  PerturbationConfig cfg;
  cfg.markets = 6;
  cfg.perturbations = 3;
  cfg.epsilon = 0.0;
  cfg.shock_draws = 2000;
  const auto sum = perturbation_study(spec, cfg);
  EXPECT_EQ(sum.failures, 0u);
  EXPECT_NEAR(sum.average_distance, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(sum.average_preserved, 1.0);
  const auto csv = report::perturbation_csv(sum);
  EXPECT_EQ(csv.rfind("market,ties,mean_distance,preserved,clearing_error,failures\n", 0), 0u);
}

TEST(Perturbation, DirichletDrawsAreOnTheSimplex) {
  auto eng = rng::make_engine(3);
  std::vector<double> mean(13, 0.0);
  const int draws = 20000;
  for (int k = 0; k < draws; ++k) {
    const auto v = dirichlet_flat(eng, 13);
    double s = 0;
    for (std::size_t i = 0; i < 13; ++i) {
      EXPECT_GT(v[i], 0.0);
      s += v[i];
      mean[i] += v[i] / draws;
    }
    ASSERT_NEAR(s, 1.0, 1e-12);
  }
  for (double m : mean) EXPECT_NEAR(m, 1.0 / 13, 0.003);
}

TEST(Parallel, PropagatesFailures) {
  EXPECT_THROW(parallel_for(20, 4,
                            [](std::size_t i) {
                              if (i == 7) throw Error(ErrorCode::numerical, "boom");
                            }),
               Error);
  std::vector<int> hit(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hit[i] = 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
}
