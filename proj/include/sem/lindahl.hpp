#pragma once

#include <vector>

#include "sem/equilibrium.hpp"

namespace sem {

/// Per-period prices p^k for k = t..T; prices[k - t].
struct LindahlResult {
  int first_period = 1;
  std::vector<PriceVector> prices;
  std::vector<EquilibriumResult> stages;
  /// Cumulative demand and expected supply through each period.
  std::vector<std::vector<double>> cumulative_demand;
  std::vector<std::vector<double>> cumulative_supply;
  double clearing_error = 0.0;
  bool converged = true;
};

/// Time-tax equilibrium from period t on, solved one period at a time: stage k
/// clears period-k demand against E[S^k] plus whatever earlier stages left
/// unallocated, holding earlier prices fixed. Over-allocation within the
/// solver tolerance is not carried forward, so cumulative clearing holds to
/// within (k - t + 1) tolerances. Every agent
/// has budget `budget` at its own period's prices. `expected_supply[k-1]` is
/// E[S^k] per arrival.
inline LindahlResult solve_lindahl(const MarketSpec& spec, int t, const std::vector<std::vector<double>>& expected_supply,
                                   const ShockSample& shocks, const SolverOptions& opt = {}, double budget = 1.0) {
  if (t < 1 || t > spec.horizon()) throw Error(ErrorCode::invalid_argument, "period out of range");
  if (expected_supply.size() != static_cast<std::size_t>(spec.horizon()))
    throw Error(ErrorCode::invalid_argument, "one expected supply vector per period required");
  if (!(budget > shocks.upper())) throw Error(ErrorCode::invalid_argument, "budget must exceed the shock bound");
  const std::size_t X = spec.num_objects();
  LindahlResult out;
  out.first_period = t;
  std::vector<double> cum_supply(X, 0.0), cum_demand(X, 0.0), leftover(X, 0.0);
  for (int k = t; k <= spec.horizon(); ++k) {
    const auto& flow = expected_supply[static_cast<std::size_t>(k - 1)];
    if (flow.size() != X) throw Error(ErrorCode::invalid_argument, "supply vector length mismatch");
    Fundamentals f{X, spec.null_object(), {}, {}};
    for (std::size_t x = 0; x < X; ++x) {
      if (!(flow[x] >= 0.0)) throw Error(ErrorCode::invalid_argument, "expected supply must be nonnegative");
      cum_supply[x] += flow[x];
      f.supply.push_back(flow[x] + leftover[x]);
    }
    for (TypeIndex i = 0; i < spec.num_types(); ++i) {
      const double mass = spec.arrivals.mass(i, k);
      if (mass > 0.0) f.groups.push_back({spec.types[i].id, i, k, spec.types[i].preferences, budget, mass});
    }
    // the null object is never scarce
    f.supply[spec.null_object()] = std::max(f.supply[spec.null_object()], 1.0 + f.total_mass());
    auto stage = solve_equilibrium(f, shocks, opt);
    if (!stage.converged) out.converged = false;
    out.clearing_error = std::max(out.clearing_error, stage.clearing_error);
    for (std::size_t x = 0; x < X; ++x) {
      cum_demand[x] += stage.demand[x];
      leftover[x] = std::max(0.0, f.supply[x] - stage.demand[x]);
    }
    out.prices.push_back(stage.prices);
    out.cumulative_demand.push_back(cum_demand);
    out.cumulative_supply.push_back(cum_supply);
    out.stages.push_back(std::move(stage));
  }
  return out;
}

}  // namespace sem
