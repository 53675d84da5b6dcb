#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sem/error.hpp"
#include "sem/rng.hpp"
#include "sem/shock.hpp"
#include "sem/weak_order.hpp"

namespace sem {

using TypeIndex = std::size_t;

inline constexpr double kProbabilityTolerance = 1e-9;
inline constexpr double kSupplyTolerance = 1e-6;

struct ObjectSet {
  std::vector<std::string> ids;
  std::vector<std::int64_t> supply;
  ObjectIndex null_object = 0;

  std::size_t size() const noexcept { return ids.size(); }

  std::optional<ObjectIndex> find(std::string_view id) const {
    for (std::size_t x = 0; x < ids.size(); ++x)
      if (ids[x] == id) return x;
    return std::nullopt;
  }

  friend bool operator==(const ObjectSet&, const ObjectSet&) = default;
};

/// A preference profile. `arrival_time` pins the type to one period; a type
/// without it may arrive in any period, and (type, period) then plays the
/// role of a single timed type.
struct AgentType {
  std::string id;
  WeakOrder preferences;
  std::optional<int> arrival_time;

  friend bool operator==(const AgentType&, const AgentType&) = default;
};

/// density[t-1][i] is the probability that an arrival in period t has type i.
struct ArrivalProcess {
  int horizon = 0;
  std::vector<std::vector<double>> density;

  double mass(TypeIndex i, int t) const { return density.at(static_cast<std::size_t>(t - 1)).at(i); }

  /// Sum of f^k(i) for k in [from, to].
  double window_mass(TypeIndex i, int from, int to) const {
    double m = 0.0;
    for (int t = from; t <= to; ++t) m += mass(i, t);
    return m;
  }

  /// Cumulative distribution over type indices in period t.
  std::vector<double> cdf(int t) const {
    std::vector<double> out;
    double acc = 0.0;
    for (double f : density.at(static_cast<std::size_t>(t - 1))) out.push_back(acc += f);
    return out;
  }

  friend bool operator==(const ArrivalProcess&, const ArrivalProcess&) = default;
};

enum class BudgetRule { greedy, fixed, explicit_schedule };

/// Which separation between consecutive greedy budgets to use: `appendix`
/// subtracts (upper - lower) per period, `text` subtracts (upper + lower).
enum class BudgetGap { appendix, text };

struct BudgetSpec {
  BudgetRule rule = BudgetRule::greedy;
  double base = 1.0;
  BudgetGap gap = BudgetGap::appendix;
  double margin = 0.05;
  /// fixed: one value per type; explicit_schedule: one value per (type, period).
  std::vector<std::vector<double>> values;

  friend bool operator==(const BudgetSpec&, const BudgetSpec&) = default;
};

/// Budget per period such that each period's budget sits more than one shock
/// width below the previous one.
inline std::vector<double> greedy_budgets(int horizon, const ShockModel& shock, double base,
                                          BudgetGap gap = BudgetGap::appendix, double margin_fraction = 0.05) {
  if (horizon < 1) throw Error(ErrorCode::invalid_argument, "horizon must be positive");
  const double width = gap == BudgetGap::appendix ? shock.upper() - shock.lower() : shock.upper() + shock.lower();
  const double spread = shock.upper() - shock.lower();
  const double step = width + margin_fraction * spread;
  std::vector<double> out(static_cast<std::size_t>(horizon));
  out[0] = base;
  for (int t = 1; t < horizon; ++t) out[static_cast<std::size_t>(t)] = out[static_cast<std::size_t>(t - 1)] - step;
  if (!(out.back() > shock.upper()))
    throw Error(ErrorCode::invalid_argument, "horizon too long for base budget: last budget " +
                                                 std::to_string(out.back()) + " does not exceed shock bound");
  return out;
}

struct MarketSpec {
  ObjectSet objects;
  std::vector<AgentType> types;
  ArrivalProcess arrivals;
  BudgetSpec budget_spec;
  ShockModel shock;
  /// Number of arrivals per period (replica count); supply is already scaled.
  int replicas = 1;
  /// budgets[i][t-1], resolved from budget_spec by finalize().
  std::vector<std::vector<double>> budgets;

  std::size_t num_objects() const noexcept { return objects.size(); }
  std::size_t num_types() const noexcept { return types.size(); }
  int horizon() const noexcept { return arrivals.horizon; }
  ObjectIndex null_object() const noexcept { return objects.null_object; }
  double budget(TypeIndex i, int t) const { return budgets.at(i).at(static_cast<std::size_t>(t - 1)); }

  std::optional<TypeIndex> find_type(std::string_view id) const {
    for (std::size_t i = 0; i < types.size(); ++i)
      if (types[i].id == id) return i;
    return std::nullopt;
  }

  double min_budget() const {
    double m = INFINITY;
    for (const auto& row : budgets)
      for (double b : row) m = std::min(m, b);
    return m;
  }
  double max_budget() const {
    double m = 0.0;
    for (const auto& row : budgets)
      for (double b : row) m = std::max(m, b);
    return m;
  }

  /// Per-replica supply, the scale the equilibrium solver works in.
  std::vector<double> normalized_supply() const {
    std::vector<double> s(objects.size());
    for (std::size_t x = 0; x < s.size(); ++x) s[x] = static_cast<double>(objects.supply[x]) / replicas;
    return s;
  }

  /// Resolves budgets and checks every invariant; throws Error with a field path.
  void finalize() {
    resolve_budgets();
    validate();
  }

  void resolve_budgets() {
    const auto T = static_cast<std::size_t>(arrivals.horizon);
    budgets.assign(types.size(), std::vector<double>(T, 0.0));
    switch (budget_spec.rule) {
      case BudgetRule::greedy: {
        auto per_period = greedy_budgets(arrivals.horizon, shock, budget_spec.base, budget_spec.gap, budget_spec.margin);
        for (auto& row : budgets) row = per_period;
        break;
      }
      case BudgetRule::fixed:
        if (budget_spec.values.size() != types.size())
          throw Error(ErrorCode::invalid_spec, "one budget per type required", "budgets.values");
        for (std::size_t i = 0; i < types.size(); ++i) {
          if (budget_spec.values[i].size() != 1)
            throw Error(ErrorCode::invalid_spec, "fixed budget must be a single value", "budgets.values." + types[i].id);
          budgets[i].assign(T, budget_spec.values[i][0]);
        }
        break;
      case BudgetRule::explicit_schedule:
        if (budget_spec.values.size() != types.size())
          throw Error(ErrorCode::invalid_spec, "one schedule per type required", "budgets.values");
        for (std::size_t i = 0; i < types.size(); ++i) {
          if (budget_spec.values[i].size() != T)
            throw Error(ErrorCode::invalid_spec, "schedule length must equal horizon", "budgets.values." + types[i].id);
          budgets[i] = budget_spec.values[i];
        }
        break;
    }
  }

  void validate() const {
    const std::size_t X = objects.size();
    if (X == 0 || X > kMaxObjects) throw Error(ErrorCode::invalid_spec, "object count must be in 1..64", "objects");
    if (objects.supply.size() != X || objects.null_object >= X)
      throw Error(ErrorCode::invalid_spec, "malformed object set", "objects");
    for (std::size_t x = 0; x < X; ++x)
      if (objects.supply[x] < 0)
        throw Error(ErrorCode::invalid_spec, "supply must be nonnegative", "objects." + objects.ids[x] + ".supply");
    if (replicas < 1) throw Error(ErrorCode::invalid_spec, "replicas must be positive", "replicas");
    if (arrivals.horizon < 1) throw Error(ErrorCode::invalid_spec, "horizon must be positive", "arrivals.T");
    const double total_mass = static_cast<double>(arrivals.horizon) * replicas;
    if (!(static_cast<double>(objects.supply[objects.null_object]) > total_mass))
      throw Error(ErrorCode::invalid_spec, "null supply must exceed total agent mass",
                  "objects." + objects.ids[objects.null_object] + ".supply");
    if (types.empty()) throw Error(ErrorCode::invalid_spec, "at least one type required", "types");
    for (std::size_t i = 0; i < types.size(); ++i) {
      const auto& ty = types[i];
      if (ty.preferences.num_objects() != X)
        throw Error(ErrorCode::invalid_spec, "preferences must rank every object", "types." + ty.id);
      if (ty.arrival_time && (*ty.arrival_time < 1 || *ty.arrival_time > arrivals.horizon))
        throw Error(ErrorCode::invalid_spec, "arrival time outside horizon", "types." + ty.id + ".arrival_time");
      for (std::size_t j = 0; j < i; ++j)
        if (types[j].id == ty.id) throw Error(ErrorCode::invalid_spec, "duplicate type id", "types." + ty.id);
    }
    if (arrivals.density.size() != static_cast<std::size_t>(arrivals.horizon))
      throw Error(ErrorCode::invalid_spec, "one density per period required", "arrivals.density");
    for (int t = 1; t <= arrivals.horizon; ++t) {
      const auto& row = arrivals.density[static_cast<std::size_t>(t - 1)];
      const std::string path = "arrivals.density[" + std::to_string(t - 1) + "]";
      if (row.size() != types.size()) throw Error(ErrorCode::invalid_spec, "density must cover every type", path);
      double sum = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (!(row[i] >= 0.0 && row[i] <= 1.0))
          throw Error(ErrorCode::invalid_spec, "probability outside [0,1]", path + "." + types[i].id);
        if (row[i] > 0.0 && types[i].arrival_time && *types[i].arrival_time != t)
          throw Error(ErrorCode::invalid_spec, "type arrives outside its arrival time", path + "." + types[i].id);
        sum += row[i];
      }
      if (std::abs(sum - 1.0) > kProbabilityTolerance)
        throw Error(ErrorCode::invalid_spec, "period density sums to " + std::to_string(sum) + ", expected 1", path);
    }
    shock.validate();
    if (budgets.size() != types.size()) throw Error(ErrorCode::invalid_spec, "budgets not resolved", "budgets");
    for (std::size_t i = 0; i < types.size(); ++i)
      for (double b : budgets[i])
        if (!(b > 0.0) || !std::isfinite(b))
          throw Error(ErrorCode::invalid_spec, "budgets must be strictly positive", "budgets." + types[i].id);
    if (!(shock.upper() < min_budget()))
      throw Error(ErrorCode::invalid_spec, "shock bound must lie strictly below every budget", "shock");
  }

  friend bool operator==(const MarketSpec&, const MarketSpec&) = default;
};

/// Same fundamentals, n times the agents and supply.
inline MarketSpec replicate(const MarketSpec& spec, int n) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "replica count must be at least 1");
  MarketSpec out = spec;
  for (auto& s : out.objects.supply) s *= n;
  out.replicas *= n;
  return out;
}

/// One realized arrival. Replicas of the same type in a period are told apart
/// by `index`.
struct AgentInstance {
  TypeIndex type = 0;
  int period = 1;
  std::size_t index = 0;

  friend auto operator<=>(const AgentInstance&, const AgentInstance&) = default;
};

/// `replicas` i.i.d. draws from f^t, deterministic in (seed, t).
inline std::vector<AgentInstance> draw_arrivals(const MarketSpec& spec, int t, std::uint64_t seed) {
  if (t < 1 || t > spec.horizon()) throw Error(ErrorCode::invalid_argument, "period out of range");
  auto cdf = spec.arrivals.cdf(t);
  auto eng = rng::make_engine(seed, {0xa77, static_cast<std::uint64_t>(t)});
  std::vector<AgentInstance> out;
  out.reserve(static_cast<std::size_t>(spec.replicas));
  for (int k = 0; k < spec.replicas; ++k) {
    const double u = rng::uniform(eng) * cdf.back();
    std::size_t i = 0;
    while (i + 1 < cdf.size() && !(u < cdf[i])) ++i;
    // never land on a zero-probability type through rounding at the top end
    while (spec.arrivals.mass(i, t) == 0.0 && i > 0) --i;
    out.push_back({i, t, static_cast<std::size_t>(k)});
  }
  return out;
}

/// Arrivals for every period.
inline std::vector<std::vector<AgentInstance>> draw_arrival_sequence(const MarketSpec& spec, std::uint64_t seed) {
  std::vector<std::vector<AgentInstance>> out;
  for (int t = 1; t <= spec.horizon(); ++t) out.push_back(draw_arrivals(spec, t, seed));
  return out;
}

/// Probability vectors over objects for realized agent instances.
struct LotteryAllocation {
  std::vector<AgentInstance> agents;
  std::vector<std::vector<double>> rows;

  /// Throws when a row is not a probability vector or column mass exceeds supply.
  void validate(const std::vector<std::int64_t>& supply, double supply_tol = kSupplyTolerance) const {
    if (agents.size() != rows.size()) throw Error(ErrorCode::invalid_argument, "agent/row count mismatch");
    std::vector<double> column(supply.size(), 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != supply.size()) throw Error(ErrorCode::invalid_argument, "row length mismatch");
      double sum = 0.0;
      for (std::size_t x = 0; x < rows[r].size(); ++x) {
        const double v = rows[r][x];
        if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::invalid_argument, "entry outside [0,1]");
        sum += v;
        column[x] += v;
      }
      if (std::abs(sum - 1.0) > kProbabilityTolerance)
        throw Error(ErrorCode::invalid_argument, "row does not sum to one");
    }
    for (std::size_t x = 0; x < supply.size(); ++x)
      if (column[x] > static_cast<double>(supply[x]) + supply_tol)
        throw Error(ErrorCode::infeasible, "column mass exceeds supply");
  }
};

}  // namespace sem
