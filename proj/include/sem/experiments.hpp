#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "sem/mechanism.hpp"

namespace sem {

enum class Mechanism { sem, sd_rtb, omniscient };

inline const char* to_string(Mechanism m) {
  switch (m) {
    case Mechanism::sem: return "sem";
    case Mechanism::sd_rtb: return "sd-rtb";
    case Mechanism::omniscient: return "omniscient";
  }
  return "?";
}

inline Mechanism parse_mechanism(std::string_view s) {
  if (s == "sem") return Mechanism::sem;
  if (s == "sd-rtb") return Mechanism::sd_rtb;
  if (s == "omniscient") return Mechanism::omniscient;
  throw Error(ErrorCode::invalid_argument, "unknown mechanism: " + std::string(s));
}

/// Runs body(i) for i in [0, count) on up to `workers` threads. Results must
/// be written to per-index slots; the first exception is rethrown.
inline void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; !failed && (i = next++) < count;) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct RunSummary {
  Mechanism mechanism = Mechanism::sem;
  int n = 1;
  std::uint64_t seed = 0;
  double placement_rate = 0.0;
  /// SEM clearing residual per period; empty for the baselines.
  std::vector<double> residuals;
  double wall_seconds = 0.0;
};

struct CellSummary {
  Mechanism mechanism = Mechanism::sem;
  int n = 1;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t seeds = 0;
};

inline double sample_mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct Table1Config {
  std::vector<int> replicas{1, 5, 10, 25};
  std::size_t markets = 25;
  std::uint64_t seed = 1;
  std::vector<Mechanism> mechanisms{Mechanism::sem, Mechanism::sd_rtb};
  SemOptions sem;
  unsigned workers = 1;
};

struct Table1Result {
  std::vector<RunSummary> runs;
  std::vector<CellSummary> cells;

  const CellSummary& cell(Mechanism m, int n) const {
    for (const auto& c : cells)
      if (c.mechanism == m && c.n == n) return c;
    throw Error(ErrorCode::not_found, "no such table cell");
  }
};

/// Seed of market m in the n-replica cell; shared by every mechanism so runs
/// are paired on the same arrivals.
inline std::uint64_t market_seed(std::uint64_t block, int n, std::size_t m) {
  return rng::derive(block, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(m)});
}

inline RunSummary run_mechanism(const MarketSpec& spec, Mechanism mech, int n, std::uint64_t seed,
                                const SemOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  const auto seq = draw_arrival_sequence(spec, seed);
  RunSummary r{mech, n, seed, 0.0, {}, 0.0};
  switch (mech) {
    case Mechanism::sem: {
      const auto run = run_sem(spec, seq, seed, opt);
      r.placement_rate = placement_rate(run.assignment, spec.null_object());
      for (const auto& rec : run.state.history) r.residuals.push_back(rec.clearing_error);
      break;
    }
    case Mechanism::sd_rtb: r.placement_rate = placement_rate(sd_rtb(spec, seq, seed), spec.null_object()); break;
    case Mechanism::omniscient:
      r.placement_rate = placement_rate(omniscient_benchmark(spec, seq), spec.null_object());
      break;
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Placement rates of each mechanism on paired seeded markets per replica count.
inline Table1Result table1(const MarketSpec& base, const Table1Config& cfg) {
  struct Cell {
    Mechanism mech;
    int n;
    std::size_t market;
  };
  std::vector<Cell> cells;
  for (int n : cfg.replicas)
    for (auto mech : cfg.mechanisms)
      for (std::size_t m = 0; m < cfg.markets; ++m) cells.push_back({mech, n, m});
  std::vector<MarketSpec> specs;
  for (int n : cfg.replicas) specs.push_back(replicate(base, n));
  Table1Result res;
  res.runs.resize(cells.size());
  parallel_for(cells.size(), cfg.workers, [&](std::size_t i) {
    const auto& c = cells[i];
    const auto k = static_cast<std::size_t>(std::find(cfg.replicas.begin(), cfg.replicas.end(), c.n) - cfg.replicas.begin());
    res.runs[i] = run_mechanism(specs[k], c.mech, c.n, market_seed(cfg.seed, c.n, c.market), cfg.sem);
  });
  for (int n : cfg.replicas)
    for (auto mech : cfg.mechanisms) {
      std::vector<double> rates;
      for (const auto& r : res.runs)
        if (r.n == n && r.mechanism == mech) rates.push_back(r.placement_rate);
      res.cells.push_back({mech, n, sample_mean(rates), sample_sd(rates), rates.size()});
    }
  return res;
}

struct ConvergenceConfig {
  std::vector<int> replicas{1, 5, 10, 25, 100};
  std::size_t seeds = 40;
  std::uint64_t seed = 7;
  double epsilon = 0.05;
  SemOptions sem;
  unsigned workers = 1;
};

struct ConvergenceRow {
  int n = 1;
  std::vector<double> distances;
  double median = 0.0;
  double tail_fraction = 0.0;
};

struct ConvergenceResult {
  EquilibriumResult offline;
  std::vector<ConvergenceRow> rows;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Largest entrywise gap between an arrival's SEM lottery and the offline
/// period-1 equilibrium row of its (type, period) group.
inline double offline_distance(const SemRun& run, const EquilibriumResult& offline) {
  double d = 0.0;
  for (const auto& rec : run.state.history)
    for (std::size_t k = 0; k < rec.arrivals.size(); ++k) {
      const auto& a = rec.arrivals[k];
      for (std::size_t g = 0; g < offline.groups.size(); ++g) {
        if (offline.groups[g].type != a.type || offline.groups[g].period != rec.period) continue;
        for (std::size_t x = 0; x < offline.prices.size(); ++x)
          d = std::max(d, std::abs(rec.lotteries[k][x] - offline.allocation[g][x]));
      }
    }
  return d;
}

inline ConvergenceResult convergence_study(const MarketSpec& base, const ConvergenceConfig& cfg) {
  ConvergenceResult res;
  const auto offline_shocks = mechanism_shocks(base, cfg.seed, cfg.sem.shock_draws);
  res.offline = solve_price_equilibrium(base, 1, base.objects.supply, offline_shocks, cfg.sem.solver);
  if (!res.offline.converged)
    throw Error(ErrorCode::not_converged, "offline equilibrium residual " + std::to_string(res.offline.clearing_error));
  std::vector<std::pair<int, std::size_t>> cells;
  for (int n : cfg.replicas)
    for (std::size_t s = 0; s < cfg.seeds; ++s) cells.push_back({n, s});
  std::vector<double> dist(cells.size());
  parallel_for(cells.size(), cfg.workers, [&](std::size_t i) {
    const auto spec = replicate(base, cells[i].first);
    const auto seed = market_seed(cfg.seed, cells[i].first, cells[i].second);
    dist[i] = offline_distance(run_sem(spec, draw_arrival_sequence(spec, seed), seed, cfg.sem), res.offline);
  });
  for (int n : cfg.replicas) {
    ConvergenceRow row{n, {}, 0.0, 0.0};
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i].first == n) row.distances.push_back(dist[i]);
    row.median = median_of(row.distances);
    row.tail_fraction = static_cast<double>(std::count_if(row.distances.begin(), row.distances.end(),
                                                          [&](double d) { return d > cfg.epsilon; })) /
                        static_cast<double>(row.distances.size());
    res.rows.push_back(std::move(row));
  }
  return res;
}

/// Number of adjacent pairs where the sequence goes up.
inline std::size_t inversions(const std::vector<double>& v) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < v.size(); ++i) k += v[i] > v[i - 1];
  return k;
}

struct PerturbationConfig {
  std::size_t markets = 100;
  std::size_t perturbations = 100;
  double epsilon = 0.025;
  double tie_tolerance = 0.01;
  std::uint64_t seed = 11;
  SolverOptions solver;
  std::size_t shock_draws = 10000;
  unsigned workers = 1;
};

struct PerturbationReport {
  std::size_t market = 0;
  PriceVector base_prices;
  double base_clearing_error = 0.0;
  std::vector<double> distances;
  std::vector<double> clearing_errors;
  /// Per perturbation: fraction of base ties still tied; empty when the base has no ties.
  std::vector<double> preserved;
  std::size_t ties = 0;
  std::size_t failures = 0;

  double mean_distance() const { return sample_mean(distances); }
  double mean_clearing_error() const { return sample_mean(clearing_errors); }
  double mean_preserved() const { return preserved.empty() ? 1.0 : sample_mean(preserved); }
};

struct PerturbationSummary {
  std::vector<PerturbationReport> markets;
  double average_distance = 0.0;
  double average_preserved = 1.0;
  double average_clearing_error = 0.0;
  std::size_t failures = 0;
};

/// Symmetric Dirichlet(1) draw via normalized exponentials.
inline std::vector<double> dirichlet_flat(rng::Engine& eng, std::size_t k) {
  std::vector<double> v(k);
  double s = 0.0;
  for (auto& x : v) s += (x = -std::log(1.0 - rng::uniform(eng)));
  for (auto& x : v) x /= s;
  return v;
}

inline MarketSpec with_stationary_density(const MarketSpec& spec, const std::vector<double>& f) {
  auto out = spec;
  out.arrivals.density.assign(static_cast<std::size_t>(spec.horizon()), f);
  return out;
}

inline std::vector<std::pair<ObjectIndex, ObjectIndex>> positive_ties(const PriceVector& p, ObjectIndex null, double tol) {
  std::vector<std::pair<ObjectIndex, ObjectIndex>> out;
  for (ObjectIndex x = 0; x < p.size(); ++x)
    for (ObjectIndex y = x + 1; y < p.size(); ++y)
      if (x != null && y != null && p[x] > tol && p[y] > tol && std::abs(p[x] - p[y]) <= tol) out.push_back({x, y});
  return out;
}

inline double median_budget(const MarketSpec& spec) {
  std::vector<double> b;
  for (const auto& row : spec.budgets) b.insert(b.end(), row.begin(), row.end());
  return median_of(b);
}

/// Random base densities, each perturbed by an eps-scaled Dirichlet shock
/// and renormalized; reports price movement, tie survival and clearing error
/// of the period-1 equilibrium.
inline PerturbationSummary perturbation_study(const MarketSpec& base, const PerturbationConfig& cfg) {
  PerturbationSummary out;
  out.markets.resize(cfg.markets);
  const auto shocks = ShockSample::draw(base.shock, base.num_objects(), cfg.shock_draws, rng::derive(cfg.seed, {0x5b}));
  const double scale = median_budget(base);
  const std::size_t K = base.num_types();
  parallel_for(cfg.markets, cfg.workers, [&](std::size_t m) {
    auto eng = rng::make_engine(cfg.seed, {0xb, m});
    const auto f = dirichlet_flat(eng, K);
    auto& rep = out.markets[m];
    rep.market = m;
    const auto base_eq = solve_price_equilibrium(with_stationary_density(base, f), 1, base.objects.supply, shocks, cfg.solver);
    rep.base_prices = base_eq.prices;
    rep.base_clearing_error = base_eq.clearing_error;
    if (!base_eq.converged) {
      rep.failures = cfg.perturbations + 1;
      return;
    }
    const auto ties = positive_ties(base_eq.prices, base.null_object(), cfg.tie_tolerance);
    rep.ties = ties.size();
    for (std::size_t k = 0; k < cfg.perturbations; ++k) {
      auto g = f;
      const auto shock = dirichlet_flat(eng, K);
      double s = 0.0;
      for (std::size_t i = 0; i < K; ++i) s += (g[i] += cfg.epsilon * shock[i]);
      for (auto& v : g) v /= s;
      const auto eq = solve_price_equilibrium(with_stationary_density(base, g), 1, base.objects.supply, shocks, cfg.solver);
      if (!eq.converged) {
        ++rep.failures;
        continue;
      }
      double d = 0.0;
      for (std::size_t x = 0; x < eq.prices.size(); ++x) d = std::max(d, std::abs(eq.prices[x] - base_eq.prices[x]));
      rep.distances.push_back(d / scale);
      rep.clearing_errors.push_back(eq.clearing_error);
      if (!ties.empty()) {
        std::size_t kept = 0;
        for (auto [x, y] : ties) kept += std::abs(eq.prices[x] - eq.prices[y]) <= cfg.tie_tolerance;
        rep.preserved.push_back(static_cast<double>(kept) / static_cast<double>(ties.size()));
      }
    }
  });
  std::vector<double> dist, err, kept;
  for (const auto& rep : out.markets) {
    out.failures += rep.failures;
    if (rep.distances.empty()) continue;
    dist.push_back(rep.mean_distance());
    err.push_back(rep.mean_clearing_error());
    if (!rep.preserved.empty()) kept.push_back(rep.mean_preserved());
  }
  out.average_distance = sample_mean(dist);
  out.average_clearing_error = sample_mean(err);
  out.average_preserved = kept.empty() ? 1.0 : sample_mean(kept);
  return out;
}

}  // namespace sem
