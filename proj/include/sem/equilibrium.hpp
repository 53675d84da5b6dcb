#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "sem/demand.hpp"
#include "sem/fundamentals.hpp"
#include "sem/simplex.hpp"

namespace sem {

struct SolverOptions {
  double tolerance = 0.01;
  int max_iter = 5000;
  /// Initial per-object step; halved when that object's excess demand flips sign.
  double step = 0.2;
  double min_step = 1e-4;
  /// 0 selects max budget + shock bound + 0.1.
  double price_cap = 0.0;
  /// Under the common shock, prices this close count as tied; tied demand
  /// is split by graded_selection during iteration.
  double tie_eps = 0.005;
  /// How often (in iterations) to try the selection LP while ties are present.
  int selection_every = 10;
  std::optional<PriceVector> initial_prices;
};

struct EquilibriumResult {
  PriceVector prices;
  std::vector<DemandGroup> groups;
  /// allocation[g] is group g's lottery over objects.
  std::vector<std::vector<double>> allocation;
  /// Aggregate demand under `allocation`, per arrival per period.
  std::vector<double> demand;
  std::vector<double> supply;
  ObjectIndex null_object = 0;
  double clearing_error = 0.0;
  int iterations = 0;
  bool converged = false;
  /// True when the allocation came from the selection LP rather than a uniform split.
  bool refined_selection = false;
};

/// max over real objects of max(D - s, 0) and min(p, max(s - D, 0)).
inline double clearing_residual(const PriceVector& prices, const std::vector<double>& demand,
                                const std::vector<double>& supply, ObjectIndex null_object) {
  double r = 0.0;
  for (std::size_t x = 0; x < prices.size(); ++x) {
    if (x == null_object) continue;
    const double e = demand[x] - supply[x];
    r = std::max(r, e > 0.0 ? e : std::min(prices[x], -e));
  }
  return r;
}

namespace detail {

inline double effective_tie_eps(const ShockSample& shocks, const SolverOptions& opt) {
  return shocks.kind() == ShockKind::ntb ? opt.tie_eps : 0.0;
}

struct GroupDemand {
  std::vector<std::vector<DemandAtom>> atoms;
  bool has_ties = false;
};

inline GroupDemand evaluate_atoms(const Fundamentals& f, const PriceVector& p, const ShockSample& shocks, double eps) {
  GroupDemand gd;
  gd.atoms.reserve(f.groups.size());
  for (const auto& g : f.groups) {
    gd.atoms.push_back(demand_atoms(g.prefs, p, g.budget, shocks, eps));
    for (const auto& a : gd.atoms.back())
      if (popcount(a.set) > 1) gd.has_ties = true;
  }
  return gd;
}

inline std::vector<double> aggregate(const Fundamentals& f, const std::vector<std::vector<double>>& alloc) {
  std::vector<double> d(f.num_objects, 0.0);
  for (std::size_t g = 0; g < f.groups.size(); ++g)
    for (std::size_t x = 0; x < d.size(); ++x) d[x] += f.groups[g].mass * alloc[g][x];
  return d;
}

}  // namespace detail

/// Splits every tied demand atom so that aggregate demand best matches
/// supply: minimizes total over-demand plus under-demand on objects priced
/// above `priced_above`.
inline std::vector<std::vector<double>> clearing_selection(const Fundamentals& f, const PriceVector& prices,
                                                           const std::vector<std::vector<DemandAtom>>& atoms,
                                                           double priced_above) {
  const std::size_t X = f.num_objects;
  std::vector<std::vector<double>> alloc(f.groups.size(), std::vector<double>(X, 0.0));
  struct Var {
    std::size_t group;
    ObjectIndex object;
  };
  std::vector<Var> vars;
  std::vector<std::pair<std::size_t, std::size_t>> splits;  // first var, count
  std::vector<double> split_mass;
  std::vector<double> fixed(X, 0.0);
  for (std::size_t g = 0; g < f.groups.size(); ++g)
    for (const auto& a : atoms[g]) {
      if (popcount(a.set) == 1) {
        const auto x = members(a.set).front();
        alloc[g][x] += a.probability;
        fixed[x] += f.groups[g].mass * a.probability;
        continue;
      }
      if (f.groups[g].mass == 0.0) {
        for (auto x : members(a.set)) alloc[g][x] += a.probability / popcount(a.set);
        continue;
      }
      splits.emplace_back(vars.size(), popcount(a.set));
      split_mass.push_back(f.groups[g].mass * a.probability);
      for (auto x : members(a.set)) vars.push_back({g, x});
    }
  if (vars.empty()) return alloc;

  // variables: split masses, then over_x and under_x per object
  const std::size_t V = vars.size();
  lp::Problem<double> prob;
  prob.num_vars = V + 2 * X;
  prob.objective.assign(prob.num_vars, 0.0);
  for (std::size_t x = 0; x < X; ++x) {
    if (x == f.null_object) continue;
    prob.objective[V + x] = 1.0;
    if (prices[x] > priced_above) prob.objective[V + X + x] = 1.0;
  }
  for (std::size_t s = 0; s < splits.size(); ++s) {
    std::vector<double> row(prob.num_vars, 0.0);
    for (std::size_t v = splits[s].first; v < splits[s].first + splits[s].second; ++v) row[v] = 1.0;
    prob.add(std::move(row), lp::Relation::eq, split_mass[s]);
  }
  for (std::size_t x = 0; x < X; ++x) {
    if (x == f.null_object) continue;
    std::vector<double> row(prob.num_vars, 0.0);
    bool touched = false;
    for (std::size_t v = 0; v < V; ++v)
      if (vars[v].object == x) {
        row[v] = 1.0;
        touched = true;
      }
    if (!touched) continue;
    row[V + x] = -1.0;
    row[V + X + x] = 1.0;
    prob.add(std::move(row), lp::Relation::eq, f.supply[x] - fixed[x]);
  }
  auto sol = lp::solve(prob);
  if (sol.status != lp::Status::optimal) throw Error(ErrorCode::numerical, "selection LP failed");
  for (std::size_t v = 0; v < V; ++v) {
    const auto g = vars[v].group;
    alloc[g][vars[v].object] += std::max(0.0, sol.x[v]) / f.groups[g].mass;
  }
  for (auto& row : alloc) {
    double sum = 0.0;
    for (double v : row) sum += v;
    if (sum > 0.0)
      for (double& v : row) v /= sum;
  }
  return alloc;
}

inline std::vector<std::vector<double>> uniform_allocation(const Fundamentals& f,
                                                           const std::vector<std::vector<DemandAtom>>& atoms) {
  std::vector<std::vector<double>> alloc;
  alloc.reserve(atoms.size());
  for (const auto& a : atoms) alloc.push_back(uniform_selection(a, f.num_objects));
  return alloc;
}

inline std::vector<std::vector<double>> graded_allocation(const std::vector<std::vector<DemandAtom>>& atoms,
                                                          const PriceVector& prices, double tie_eps) {
  std::vector<std::vector<double>> alloc;
  alloc.reserve(atoms.size());
  for (const auto& a : atoms) alloc.push_back(graded_selection(a, prices, tie_eps));
  return alloc;
}

inline double default_price_cap(const Fundamentals& f, const ShockSample& shocks) {
  double b = 0.0;
  for (const auto& g : f.groups) b = std::max(b, g.budget);
  return b + shocks.upper() + 0.1;
}

/// Damped tatonnement from zero prices with the null object pinned at 0.
inline EquilibriumResult solve_equilibrium(const Fundamentals& f, const ShockSample& shocks,
                                           const SolverOptions& opt = {}) {
  const std::size_t X = f.num_objects;
  if (f.supply.size() != X) throw Error(ErrorCode::invalid_argument, "supply vector length mismatch");
  for (double s : f.supply)
    if (!(s >= 0.0)) throw Error(ErrorCode::infeasible, "supply must be nonnegative");
  if (shocks.empty()) throw Error(ErrorCode::invalid_argument, "empty shock sample");
  const double cap = opt.price_cap > 0.0 ? opt.price_cap : default_price_cap(f, shocks);
  const double eps = detail::effective_tie_eps(shocks, opt);

  PriceVector p(X, 0.0);
  if (opt.initial_prices) {
    if (opt.initial_prices->size() != X) throw Error(ErrorCode::invalid_argument, "initial price length mismatch");
    p = *opt.initial_prices;
    for (auto& v : p) v = std::clamp(v, 0.0, cap);
  }
  p[f.null_object] = 0.0;
  std::vector<double> step(X, opt.step);
  std::vector<int> last_sign(X, 0), run(X, 0);

  EquilibriumResult best;
  best.clearing_error = INFINITY;
  best.groups = f.groups;
  best.supply = f.supply;
  best.null_object = f.null_object;
  auto record = [&](const PriceVector& prices, std::vector<std::vector<double>> alloc, double res, int it,
                    bool refined) {
    best.prices = prices;
    best.allocation = std::move(alloc);
    best.demand = detail::aggregate(f, best.allocation);
    best.clearing_error = res;
    best.iterations = it;
    best.refined_selection = refined;
  };

  for (int it = 1; it <= opt.max_iter; ++it) {
    auto gd = detail::evaluate_atoms(f, p, shocks, eps);
    auto alloc = graded_allocation(gd.atoms, p, eps);
    auto demand = detail::aggregate(f, alloc);
    const double res = clearing_residual(p, demand, f.supply, f.null_object);
    if (res < best.clearing_error) record(p, alloc, res, it, false);
    if (res <= opt.tolerance) {
      best.converged = true;
      break;
    }
    if (gd.has_ties && (it == 1 || it % opt.selection_every == 0)) {
      auto refined = clearing_selection(f, p, gd.atoms, opt.tolerance);
      const double r2 = clearing_residual(p, detail::aggregate(f, refined), f.supply, f.null_object);
      if (r2 < best.clearing_error) record(p, refined, r2, it, true);
      if (r2 <= opt.tolerance) {
        best.converged = true;
        break;
      }
    }
    for (std::size_t x = 0; x < X; ++x) {
      if (x == f.null_object) continue;
      const double e = demand[x] - f.supply[x];
      if (p[x] == 0.0 && e < 0.0) {
        last_sign[x] = 0;
        continue;
      }
      const int sign = (e > 0.0) - (e < 0.0);
      if (sign != 0 && last_sign[x] != 0 && sign != last_sign[x]) {
        step[x] = std::max(step[x] * 0.5, opt.min_step);
        run[x] = 0;
      } else if (sign != 0 && ++run[x] >= 8) {
        step[x] = std::min(step[x] * 2.0, opt.step);
        run[x] = 0;
      }
      if (sign != 0) last_sign[x] = sign;
      p[x] = std::clamp(p[x] + step[x] * e, 0.0, cap);
    }
  }
  if (!best.converged) best.iterations = opt.max_iter;
  return best;
}

/// (t)-price equilibrium of the spec's prior market under remaining supply.
inline EquilibriumResult solve_price_equilibrium(const MarketSpec& spec, int t, const std::vector<std::int64_t>& supply,
                                                 const ShockSample& shocks, const SolverOptions& opt = {}) {
  return solve_equilibrium(prior_fundamentals(spec, t, supply), shocks, opt);
}

struct ContinuationReport {
  bool holds = true;
  double residual = 0.0;
};

/// Checks that eq's prices remain an equilibrium for the groups arriving
/// after `period` once that period's allocation is removed from supply.
inline ContinuationReport continuation_check(const EquilibriumResult& eq, int period, const ShockSample& shocks,
                                             double tolerance, const SolverOptions& opt = {}) {
  Fundamentals later;
  later.num_objects = eq.prices.size();
  later.null_object = eq.null_object;
  later.supply = eq.supply;
  for (std::size_t g = 0; g < eq.groups.size(); ++g) {
    if (eq.groups[g].period <= period) {
      for (std::size_t x = 0; x < later.supply.size(); ++x)
        later.supply[x] -= eq.groups[g].mass * eq.allocation[g][x];
    } else {
      later.groups.push_back(eq.groups[g]);
    }
  }
  if (later.groups.empty()) return {true, 0.0};
  for (auto& s : later.supply) s = std::max(s, 0.0);
  const double eps = detail::effective_tie_eps(shocks, opt);
  auto gd = detail::evaluate_atoms(later, eq.prices, shocks, eps);
  auto alloc = graded_allocation(gd.atoms, eq.prices, eps);
  double res = clearing_residual(eq.prices, detail::aggregate(later, alloc), later.supply, later.null_object);
  if (res > tolerance && gd.has_ties) {
    auto refined = clearing_selection(later, eq.prices, gd.atoms, opt.tolerance);
    res = std::min(res, clearing_residual(eq.prices, detail::aggregate(later, refined), later.supply, later.null_object));
  }
  return {res <= tolerance, res};
}

}  // namespace sem
