#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sem/equilibrium.hpp"
#include "sem/fundamentals.hpp"
#include "sem/rounding.hpp"

namespace sem {

/// A reported preference at arrival. `type` is set when the report matches a
/// declared type; otherwise the arrival is ad hoc and budgeted at the period
/// maximum.
struct Arrival {
  std::string label;
  std::optional<TypeIndex> type;
  WeakOrder prefs;

  friend bool operator==(const Arrival&, const Arrival&) = default;
};

inline Arrival arrival_of(const MarketSpec& spec, TypeIndex i) {
  return {spec.types.at(i).id, i, spec.types.at(i).preferences};
}

inline std::vector<Arrival> arrivals_of(const MarketSpec& spec, const std::vector<AgentInstance>& agents) {
  std::vector<Arrival> out;
  out.reserve(agents.size());
  for (const auto& a : agents) out.push_back(arrival_of(spec, a.type));
  return out;
}

inline double arrival_budget(const MarketSpec& spec, const Arrival& a, int t) {
  return a.type ? spec.budget(*a.type, t) : period_budget(spec, t);
}

struct PeriodRecord {
  int period = 1;
  std::vector<Arrival> arrivals;
  std::vector<double> budgets;
  std::vector<std::int64_t> supply_before;
  PriceVector prices;
  double clearing_error = 0.0;
  int iterations = 0;
  bool converged = true;
  /// Groups of the realized arrivals with their empirical mass.
  std::vector<DemandGroup> current_groups;
  std::vector<std::vector<double>> lotteries;
  ExPostAssignment assignment;
};

struct SemState {
  int period = 1;
  std::vector<std::int64_t> remaining;
  std::vector<PeriodRecord> history;
  bool terminated = false;
};

inline SemState initial_state(const MarketSpec& spec) { return {1, spec.objects.supply, {}, false}; }

inline bool real_supply_exhausted(const std::vector<std::int64_t>& remaining, ObjectIndex null_object) {
  for (std::size_t x = 0; x < remaining.size(); ++x)
    if (x != null_object && remaining[x] > 0) return false;
  return true;
}

struct SemOptions {
  SolverOptions solver;
  std::size_t shock_draws = 10000;
  /// Accept the best iterate when the solver stops short of tolerance.
  bool allow_unconverged = false;
};

/// Lotteries for one period's arrivals before rounding.
struct SpotOutcome {
  EquilibriumResult equilibrium;
  std::vector<DemandGroup> current_groups;
  std::vector<std::size_t> group_of;
  std::vector<double> budgets;
  std::vector<std::vector<double>> group_lotteries;
  std::vector<std::vector<double>> lotteries;
};

namespace detail {

inline std::vector<double> unit_capacity(const std::vector<std::int64_t>& remaining, ObjectIndex null_object,
                                         std::size_t arrivals) {
  std::vector<double> cap(remaining.size());
  for (std::size_t x = 0; x < cap.size(); ++x) cap[x] = static_cast<double>(remaining[x]);
  cap[null_object] = std::max(cap[null_object], static_cast<double>(arrivals));
  return cap;
}

/// Scales down columns above capacity and moves the excess of each group
/// down its own preference order into objects with room.
inline void cap_columns(std::vector<std::vector<double>>& rows, const std::vector<double>& count,
                        const std::vector<DemandGroup>& groups, const std::vector<double>& cap) {
  const std::size_t X = cap.size();
  std::vector<double> col(X, 0.0);
  for (std::size_t g = 0; g < rows.size(); ++g)
    for (std::size_t x = 0; x < X; ++x) col[x] += count[g] * rows[g][x];
  for (std::size_t x = 0; x < X; ++x) {
    if (col[x] <= cap[x] + 1e-12) continue;
    const double keep = cap[x] / col[x];
    for (std::size_t g = 0; g < rows.size(); ++g) {
      double excess = rows[g][x] * (1.0 - keep);
      if (excess <= 0.0) continue;
      rows[g][x] -= excess;
      col[x] -= count[g] * excess;
      const auto& prefs = groups[g].prefs;
      for (std::size_t k = prefs.tier_of(x); k < prefs.num_tiers() && excess > 0.0; ++k)
        for (auto y : prefs.tier(k)) {
          if (y == x) continue;
          const double room = std::max(0.0, cap[y] - col[y]) / count[g];
          const double moved = std::min(room, excess);
          if (moved <= 0.0) continue;
          rows[g][y] += moved;
          col[y] += count[g] * moved;
          excess -= moved;
          if (excess <= 0.0) break;
        }
      if (excess > 0.0) throw Error(ErrorCode::infeasible, "no capacity left for capped lottery mass");
    }
  }
}

/// While an object has room and some group holds mass on objects it likes
/// less, shift that mass up. In equilibrium such room is only solver
/// tolerance: later groups never outbid an earlier one.
inline void greedy_repair(std::vector<std::vector<double>>& rows, const std::vector<double>& count,
                          const std::vector<DemandGroup>& groups, const std::vector<double>& cap,
                          ObjectIndex null_object) {
  const std::size_t X = cap.size();
  for (int pass = 0; pass < 100; ++pass) {
    bool changed = false;
    for (ObjectIndex best = 0; best < X; ++best) {
      if (best == null_object) continue;
      double col = 0.0;
      for (std::size_t g = 0; g < rows.size(); ++g) col += count[g] * rows[g][best];
      const double room = cap[best] - col;
      if (room <= 1e-12) continue;
      std::vector<double> worse(rows.size(), 0.0);
      double total = 0.0;
      for (std::size_t g = 0; g < rows.size(); ++g) {
        for (std::size_t y = 0; y < X; ++y)
          if (groups[g].prefs.prefers(best, y)) worse[g] += rows[g][y];
        total += count[g] * worse[g];
      }
      if (total <= 1e-12) continue;
      const double theta = std::min(1.0, room / total);
      for (std::size_t g = 0; g < rows.size(); ++g) {
        if (worse[g] <= 0.0) continue;
        for (std::size_t y = 0; y < X; ++y)
          if (groups[g].prefs.prefers(best, y)) rows[g][y] *= 1.0 - theta;
        rows[g][best] += theta * worse[g];
      }
      changed = true;
    }
    if (!changed) return;
  }
}

}  // namespace detail

/// Solves the period-t spot market with the realized arrivals and returns
/// their lotteries restricted to what remains in stock. Pure.
inline SpotOutcome spot_lotteries(const MarketSpec& spec, int t, const std::vector<std::int64_t>& remaining,
                                  const std::vector<Arrival>& arrivals, const ShockSample& shocks,
                                  const SemOptions& opt = {}) {
  if (t < 1 || t > spec.horizon()) throw Error(ErrorCode::invalid_argument, "period out of range");
  SpotOutcome out;
  std::vector<double> count;
  std::map<std::pair<long, std::string>, std::size_t> index;
  for (const auto& a : arrivals) {
    if (a.prefs.num_objects() != spec.num_objects())
      throw Error(ErrorCode::invalid_argument, "arrival preferences have the wrong object count");
    const std::pair<long, std::string> key{a.type ? static_cast<long>(*a.type) : -1, a.type ? "" : a.label};
    auto [it, fresh] = index.try_emplace(key, out.current_groups.size());
    if (fresh) {
      out.current_groups.push_back({a.label, a.type, t, a.prefs, arrival_budget(spec, a, t), 0.0});
      count.push_back(0.0);
    } else if (!a.type && !(out.current_groups[it->second].prefs == a.prefs)) {
      throw Error(ErrorCode::conflict, "ad hoc label reused with different preferences: " + a.label);
    }
    count[it->second] += 1.0;
    out.group_of.push_back(it->second);
    out.budgets.push_back(out.current_groups[it->second].budget);
  }
  for (std::size_t g = 0; g < count.size(); ++g) out.current_groups[g].mass = count[g] / spec.replicas;

  out.equilibrium = solve_equilibrium(spot_fundamentals(spec, t, remaining, out.current_groups), shocks, opt.solver);
  if (!out.equilibrium.converged && !opt.allow_unconverged)
    throw Error(ErrorCode::not_converged, "period " + std::to_string(t) + " equilibrium residual " +
                                              std::to_string(out.equilibrium.clearing_error) + " after " +
                                              std::to_string(out.equilibrium.iterations) + " iterations");

  out.group_lotteries.assign(out.equilibrium.allocation.begin(),
                             out.equilibrium.allocation.begin() + static_cast<long>(count.size()));
  const auto cap = detail::unit_capacity(remaining, spec.null_object(), arrivals.size());
  detail::cap_columns(out.group_lotteries, count, out.current_groups, cap);
  detail::greedy_repair(out.group_lotteries, count, out.current_groups, cap, spec.null_object());
  for (auto& row : out.group_lotteries) {
    double s = 0.0;
    for (auto& v : row) s += (v = std::max(v, 0.0));
    for (auto& v : row) v /= s;
  }
  for (auto g : out.group_of) out.lotteries.push_back(out.group_lotteries[g]);
  return out;
}

struct StepResult {
  PeriodRecord record;
  SemState next;
};

/// One period of the sequential equilibrium mechanism. Pure in (state,
/// arrivals, seed). `spot` may carry lotteries already computed by
/// spot_lotteries for the same state and arrivals.
inline StepResult sem_step(const MarketSpec& spec, const SemState& state, const std::vector<Arrival>& arrivals,
                           const ShockSample& shocks, std::uint64_t seed, const SemOptions& opt = {},
                           const SpotOutcome* spot = nullptr) {
  if (state.period < 1 || state.period > spec.horizon())
    throw Error(ErrorCode::terminated, "market horizon already reached");
  const int t = state.period;
  const ObjectIndex null = spec.null_object();
  StepResult res{{}, state};
  PeriodRecord& rec = res.record;
  rec.period = t;
  rec.arrivals = arrivals;
  rec.supply_before = state.remaining;
  rec.prices.assign(spec.num_objects(), 0.0);
  for (const auto& a : arrivals) rec.budgets.push_back(arrival_budget(spec, a, t));

  if (state.terminated || real_supply_exhausted(state.remaining, null)) {
    std::vector<double> row(spec.num_objects(), 0.0);
    row[null] = 1.0;
    rec.lotteries.assign(arrivals.size(), row);
    rec.assignment.assign(arrivals.size(), null);
    res.next.terminated = true;
  } else if (!arrivals.empty()) {
    const SpotOutcome computed = spot ? SpotOutcome{} : spot_lotteries(spec, t, state.remaining, arrivals, shocks, opt);
    const SpotOutcome& out = spot ? *spot : computed;
    rec.prices = out.equilibrium.prices;
    rec.clearing_error = out.equilibrium.clearing_error;
    rec.iterations = out.equilibrium.iterations;
    rec.converged = out.equilibrium.converged;
    rec.current_groups = out.current_groups;
    rec.lotteries = out.lotteries;
    auto capacity = state.remaining;
    capacity[null] = std::max<std::int64_t>(capacity[null], static_cast<std::int64_t>(arrivals.size()));
    rec.assignment = dependent_round(rec.lotteries, capacity, rng::derive(seed, {0x20, static_cast<std::uint64_t>(t)}));
  }
  for (auto x : rec.assignment) {
    if (x != null && res.next.remaining[x] <= 0) throw Error(ErrorCode::numerical, "assignment exceeds remaining supply");
    res.next.remaining[x] = std::max<std::int64_t>(0, res.next.remaining[x] - 1);
  }
  res.next.history.push_back(rec);
  if (t == spec.horizon() || real_supply_exhausted(res.next.remaining, null)) res.next.terminated = true;
  res.next.period = t + 1;
  return res;
}

inline ShockSample mechanism_shocks(const MarketSpec& spec, std::uint64_t seed, std::size_t draws) {
  return ShockSample::draw(spec.shock, spec.num_objects(), draws, rng::derive(seed, {0x5e0}));
}

/// Assignments per period, aligned with the arrival sequence.
using RunAssignment = std::vector<ExPostAssignment>;

inline double placement_rate(const RunAssignment& run, ObjectIndex null_object) {
  std::size_t placed = 0, total = 0;
  for (const auto& period : run)
    for (auto x : period) {
      ++total;
      placed += x != null_object;
    }
  return total == 0 ? 0.0 : static_cast<double>(placed) / static_cast<double>(total);
}

struct SemRun {
  SemState state;
  RunAssignment assignment;
};

inline SemRun run_sem(const MarketSpec& spec, const std::vector<std::vector<AgentInstance>>& sequence,
                      std::uint64_t seed, const SemOptions& opt = {}) {
  if (sequence.size() != static_cast<std::size_t>(spec.horizon()))
    throw Error(ErrorCode::invalid_argument, "arrival sequence length differs from horizon");
  const auto shocks = mechanism_shocks(spec, seed, opt.shock_draws);
  SemRun run{initial_state(spec), {}};
  for (const auto& period : sequence) {
    auto step = sem_step(spec, run.state, arrivals_of(spec, period), shocks, seed, opt);
    run.assignment.push_back(step.record.assignment);
    run.state = std::move(step.next);
  }
  return run;
}

/// Random serial dictatorship within each period: arrivals are shuffled and
/// each takes a uniformly random object from its best tier still in stock.
inline RunAssignment sd_rtb(const MarketSpec& spec, const std::vector<std::vector<AgentInstance>>& sequence,
                            std::uint64_t seed) {
  auto remaining = spec.objects.supply;
  const ObjectIndex null = spec.null_object();
  RunAssignment out;
  for (const auto& period : sequence) {
    ExPostAssignment assigned(period.size(), null);
    if (period.empty()) {
      out.push_back(assigned);
      continue;
    }
    auto eng = rng::make_engine(seed, {0x5d, static_cast<std::uint64_t>(period.front().period)});
    std::vector<std::size_t> order(period.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    rng::shuffle(order.begin(), order.end(), eng);
    for (auto k : order) {
      const auto& prefs = spec.types.at(period[k].type).preferences;
      for (std::size_t tier = 0; tier < prefs.num_tiers(); ++tier) {
        std::vector<ObjectIndex> open;
        for (auto x : prefs.tier(tier))
          if (x == null || remaining[x] > 0) open.push_back(x);
        if (open.empty()) continue;
        const auto x = open[rng::below(eng, open.size())];
        assigned[k] = x;
        if (x != null) --remaining[x];
        break;
      }
    }
    out.push_back(std::move(assigned));
  }
  return out;
}

namespace detail {

/// Capacitated bipartite matching grown one agent at a time.
class PriorityMatching {
 public:
  PriorityMatching(std::vector<std::int64_t> capacity, ObjectIndex null_object)
      : cap_(std::move(capacity)), null_(null_object), holders_(cap_.size()) {}

  /// Tries to add an agent restricted to `allowed`; leaves the matching
  /// unchanged on failure.
  bool add(ObjectMask allowed) {
    allowed_.push_back(allowed);
    match_.push_back(npos);
    const std::size_t a = allowed_.size() - 1;
    std::vector<char> visited(cap_.size(), 0);
    if (augment(a, visited)) return true;
    allowed_.pop_back();
    match_.pop_back();
    return false;
  }

  const std::vector<ObjectIndex>& matches() const { return match_; }

 private:
  static constexpr ObjectIndex npos = static_cast<ObjectIndex>(-1);

  bool augment(std::size_t a, std::vector<char>& visited) {
    for (auto x : members(allowed_[a])) {
      if (visited[x]) continue;
      visited[x] = 1;
      if (x == null_ || static_cast<std::int64_t>(holders_[x].size()) < cap_[x]) {
        take(a, x);
        return true;
      }
      for (std::size_t h = 0; h < holders_[x].size(); ++h) {
        const auto other = holders_[x][h];
        if (augment(other, visited)) {
          // `other` moved elsewhere; hand its unit to `a`
          auto& hx = holders_[x];
          hx.erase(std::find(hx.begin(), hx.end(), other));
          take(a, x);
          return true;
        }
      }
    }
    return false;
  }

  void take(std::size_t a, ObjectIndex x) {
    match_[a] = x;
    holders_[x].push_back(a);
  }

  std::vector<std::int64_t> cap_;
  ObjectIndex null_;
  std::vector<std::vector<std::size_t>> holders_;
  std::vector<ObjectMask> allowed_;
  std::vector<ObjectIndex> match_;
};

inline std::vector<const WeakOrder*> flatten_prefs(const MarketSpec& spec,
                                                   const std::vector<std::vector<AgentInstance>>& sequence) {
  std::vector<const WeakOrder*> out;
  for (const auto& period : sequence)
    for (const auto& a : period) out.push_back(&spec.types.at(a.type).preferences);
  return out;
}

inline RunAssignment unflatten(const std::vector<std::vector<AgentInstance>>& sequence,
                               const std::vector<ObjectIndex>& flat) {
  RunAssignment out;
  std::size_t k = 0;
  for (const auto& period : sequence) {
    out.emplace_back(flat.begin() + static_cast<long>(k), flat.begin() + static_cast<long>(k + period.size()));
    k += period.size();
  }
  return out;
}

}  // namespace detail

/// Offline serial dictatorship with indifferences in arrival order: each
/// arrival is fixed to the best tier that keeps every earlier commitment
/// feasible, and the final matching realizes all commitments.
inline RunAssignment omniscient_benchmark(const MarketSpec& spec,
                                          const std::vector<std::vector<AgentInstance>>& sequence) {
  const auto prefs = detail::flatten_prefs(spec, sequence);
  detail::PriorityMatching m(spec.objects.supply, spec.null_object());
  for (const auto* p : prefs) {
    bool placed = false;
    for (std::size_t k = 0; k < p->num_tiers() && !placed; ++k) placed = m.add(p->tier_mask(k));
    if (!placed) throw Error(ErrorCode::numerical, "null object missing from preferences");
  }
  return detail::unflatten(sequence, m.matches());
}

/// Exhaustive version of the benchmark for small instances; returns an
/// assignment whose tier vector in arrival order is lexicographically best.
inline RunAssignment omniscient_brute_force(const MarketSpec& spec,
                                            const std::vector<std::vector<AgentInstance>>& sequence) {
  const auto prefs = detail::flatten_prefs(spec, sequence);
  if (prefs.size() > 12) throw Error(ErrorCode::invalid_argument, "exhaustive benchmark limited to 12 arrivals");
  const std::size_t X = spec.num_objects();
  const ObjectIndex null = spec.null_object();
  std::vector<ObjectIndex> cur(prefs.size()), best;
  std::vector<std::size_t> cur_tiers(prefs.size()), best_tiers;
  auto used = std::vector<std::int64_t>(X, 0);
  auto rec = [&](auto&& self, std::size_t a) -> void {
    if (a == prefs.size()) {
      if (best.empty() || cur_tiers < best_tiers) {
        best = cur;
        best_tiers = cur_tiers;
      }
      return;
    }
    for (ObjectIndex x = 0; x < X; ++x) {
      if (x != null && used[x] >= spec.objects.supply[x]) continue;
      cur[a] = x;
      cur_tiers[a] = prefs[a]->tier_of(x);
      // prune: a prefix already worse than the incumbent cannot win
      if (!best.empty() &&
          std::lexicographical_compare(best_tiers.begin(), best_tiers.begin() + static_cast<long>(a + 1),
                                       cur_tiers.begin(), cur_tiers.begin() + static_cast<long>(a + 1)))
        continue;
      ++used[x];
      self(self, a + 1);
      --used[x];
    }
  };
  rec(rec, 0);
  return detail::unflatten(sequence, best);
}

}  // namespace sem
