#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sem/market.hpp"

namespace sem {

/// Mass of agents sharing preferences and budget, as seen by one spot market.
struct DemandGroup {
  std::string label;
  std::optional<TypeIndex> type;
  int period = 1;
  WeakOrder prefs;
  double budget = 1.0;
  double mass = 0.0;

  friend bool operator==(const DemandGroup&, const DemandGroup&) = default;
};

/// Demand groups and supply in units of one arrival per period.
struct Fundamentals {
  std::size_t num_objects = 0;
  ObjectIndex null_object = 0;
  std::vector<DemandGroup> groups;
  std::vector<double> supply;

  double total_mass() const {
    double m = 0.0;
    for (const auto& g : groups) m += g.mass;
    return m;
  }
};

/// Budget assigned to a report that matches no declared type.
inline double period_budget(const MarketSpec& spec, int t) {
  double b = 0.0;
  for (TypeIndex i = 0; i < spec.num_types(); ++i) b = std::max(b, spec.budget(i, t));
  return b;
}

/// Forecast groups for periods [from, T] from the prior densities.
inline void append_forecast_groups(const MarketSpec& spec, int from, std::vector<DemandGroup>& out) {
  for (int k = from; k <= spec.horizon(); ++k)
    for (TypeIndex i = 0; i < spec.num_types(); ++i) {
      const double mass = spec.arrivals.mass(i, k);
      if (mass == 0.0) continue;
      out.push_back({spec.types[i].id, i, k, spec.types[i].preferences, spec.budget(i, k), mass});
    }
}

inline std::vector<double> per_arrival_supply(const MarketSpec& spec, const std::vector<std::int64_t>& units) {
  if (units.size() != spec.num_objects()) throw Error(ErrorCode::invalid_argument, "supply vector length mismatch");
  std::vector<double> s(units.size());
  for (std::size_t x = 0; x < s.size(); ++x) {
    if (units[x] < 0) throw Error(ErrorCode::invalid_argument, "supply must be nonnegative");
    s[x] = static_cast<double>(units[x]) / spec.replicas;
  }
  return s;
}

/// Fundamentals of the (t) spot market under the prior: periods t..T.
inline Fundamentals prior_fundamentals(const MarketSpec& spec, int t, const std::vector<std::int64_t>& supply) {
  if (t < 1 || t > spec.horizon()) throw Error(ErrorCode::invalid_argument, "period out of range");
  Fundamentals f{spec.num_objects(), spec.null_object(), {}, per_arrival_supply(spec, supply)};
  append_forecast_groups(spec, t, f.groups);
  return f;
}

/// Fundamentals of the (t) spot market once period-t arrivals are known:
/// `current` holds the realized groups (mass = count / replicas), later
/// periods keep the prior.
inline Fundamentals spot_fundamentals(const MarketSpec& spec, int t, const std::vector<std::int64_t>& supply,
                                      std::vector<DemandGroup> current) {
  if (t < 1 || t > spec.horizon()) throw Error(ErrorCode::invalid_argument, "period out of range");
  Fundamentals f{spec.num_objects(), spec.null_object(), std::move(current), per_arrival_supply(spec, supply)};
  append_forecast_groups(spec, t + 1, f.groups);
  return f;
}

}  // namespace sem
