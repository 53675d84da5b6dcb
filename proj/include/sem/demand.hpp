#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "sem/market.hpp"
#include "sem/shock.hpp"
#include "sem/weak_order.hpp"

namespace sem {

using PriceVector = std::vector<double>;

/// Objects the agent demands when object x costs prices[x] + shock[x].
///
/// Affordability is tested as shock[x] <= budget - prices[x] and price
/// comparisons as (p_x - p_y) + (shock_x - shock_y), so a common shock cancels
/// exactly and equal base prices stay tied.
template <class ShockAt>
ObjectMask demand_set_with(const WeakOrder& prefs, const PriceVector& prices, double budget, ShockAt&& shock,
                           double tie_eps = 0.0) {
  for (std::size_t k = 0; k < prefs.num_tiers(); ++k) {
    const auto& tier = prefs.tier(k);
    bool any = false;
    ObjectIndex best = 0;
    for (auto x : tier) {
      if (!(shock(x) <= budget - prices[x])) continue;
      if (!any || (prices[x] - prices[best]) + (shock(x) - shock(best)) < 0.0) best = x;
      any = true;
    }
    if (!any) continue;
    ObjectMask out = 0;
    for (auto x : tier)
      if (shock(x) <= budget - prices[x] && (prices[x] - prices[best]) + (shock(x) - shock(best)) <= tie_eps)
        out |= bit(x);
    return out;
  }
  return 0;
}

/// Demand at a realized price vector (base prices already include the shock).
inline ObjectMask demand_set(const WeakOrder& prefs, const PriceVector& realized, double budget) {
  if (!(budget > 0.0)) throw Error(ErrorCode::invalid_argument, "budget must be positive");
  return demand_set_with(prefs, realized, budget, [](ObjectIndex) { return 0.0; });
}

/// Demand at base prices plus shock draw m.
inline ObjectMask demand_set(const WeakOrder& prefs, const PriceVector& prices, double budget,
                             const ShockSample& shocks, std::size_t m) {
  return demand_set_with(prefs, prices, budget, [&](ObjectIndex x) { return shocks.value(m, x); });
}

/// A demanded set and the fraction of shock draws producing it.
struct DemandAtom {
  ObjectMask set = 0;
  double probability = 0.0;

  friend bool operator==(const DemandAtom&, const DemandAtom&) = default;
};

namespace detail {

inline std::vector<DemandAtom> atoms_from_counts(const std::map<ObjectMask, std::size_t>& counts, std::size_t draws) {
  std::vector<DemandAtom> out;
  out.reserve(counts.size());
  for (const auto& [set, count] : counts)
    if (count > 0) out.push_back({set, static_cast<double>(count) / static_cast<double>(draws)});
  return out;
}

// Common-shock case: draw m picks tier k iff its common shock lies in
// (max_{j<k} tau_j, tau_k] with tau_k = budget - min price in tier k. Objects
// priced within tie_eps of the tier minimum split that interval by their own
// thresholds.
inline std::vector<DemandAtom> common_shock_atoms(const WeakOrder& prefs, const PriceVector& prices, double budget,
                                                  const ShockSample& shocks, double tie_eps) {
  std::map<ObjectMask, std::size_t> counts;
  const double none = -std::numeric_limits<double>::infinity();
  double covered = none;
  std::size_t below = 0;
  std::vector<std::pair<double, ObjectIndex>> near;
  for (std::size_t k = 0; k < prefs.num_tiers() && below < shocks.size(); ++k) {
    const auto& tier = prefs.tier(k);
    ObjectIndex best = tier.front();
    for (auto x : tier)
      if (prices[x] < prices[best]) best = x;
    const double tau = budget - prices[best];
    if (!(tau > covered)) continue;
    near.clear();
    for (auto x : tier)
      if (prices[x] - prices[best] <= tie_eps) near.emplace_back(budget - prices[x], x);
    std::sort(near.begin(), near.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    ObjectMask set = 0;
    for (std::size_t j = 0; j < near.size();) {
      const double v = near[j].first;
      while (j < near.size() && near[j].first == v) set |= bit(near[j++].second);
      const double next = j < near.size() ? near[j].first : none;
      const double lo = std::max(covered, next);
      if (!(v > lo)) continue;
      const std::size_t hi_count = shocks.count_at_most(v);
      const std::size_t lo_count = lo == none ? 0 : shocks.count_at_most(lo);
      if (hi_count > lo_count) counts[set] += hi_count - lo_count;
      if (lo == covered) break;
    }
    below = shocks.count_at_most(tau);
    covered = tau;
  }
  return atoms_from_counts(counts, shocks.size());
}

}  // namespace detail

/// Distribution of demanded sets over the shock sample, sorted by set.
/// With tie_eps > 0, objects in the chosen tier priced within tie_eps of the
/// cheapest affordable one count as tied.
inline std::vector<DemandAtom> demand_atoms(const WeakOrder& prefs, const PriceVector& prices, double budget,
                                            const ShockSample& shocks, double tie_eps = 0.0) {
  if (shocks.empty()) throw Error(ErrorCode::invalid_argument, "empty shock sample");
  if (shocks.kind() == ShockKind::ntb) return detail::common_shock_atoms(prefs, prices, budget, shocks, tie_eps);
  std::map<ObjectMask, std::size_t> counts;
  for (std::size_t m = 0; m < shocks.size(); ++m)
    ++counts[demand_set_with(prefs, prices, budget, [&](ObjectIndex x) { return shocks.value(m, x); }, tie_eps)];
  return detail::atoms_from_counts(counts, shocks.size());
}

/// Same as demand_atoms but evaluated draw by draw; reference for the fast path.
inline std::vector<DemandAtom> demand_atoms_per_draw(const WeakOrder& prefs, const PriceVector& prices, double budget,
                                                     const ShockSample& shocks, double tie_eps = 0.0) {
  if (shocks.empty()) throw Error(ErrorCode::invalid_argument, "empty shock sample");
  std::map<ObjectMask, std::size_t> counts;
  for (std::size_t m = 0; m < shocks.size(); ++m)
    ++counts[demand_set_with(prefs, prices, budget, [&](ObjectIndex x) { return shocks.value(m, x); }, tie_eps)];
  return detail::atoms_from_counts(counts, shocks.size());
}

/// Uniform split of each demanded set.
inline std::vector<double> uniform_selection(const std::vector<DemandAtom>& atoms, std::size_t num_objects) {
  std::vector<double> out(num_objects, 0.0);
  for (const auto& a : atoms) {
    const double share = a.probability / popcount(a.set);
    for (auto x : members(a.set)) out[x] += share;
  }
  return out;
}

/// Splits each demanded set with weight tie_eps - (p_x - cheapest) per
/// member, which is uniform for exact ties and continuous in prices as an
/// object leaves the tie window.
inline std::vector<double> graded_selection(const std::vector<DemandAtom>& atoms, const PriceVector& prices,
                                            double tie_eps) {
  if (!(tie_eps > 0.0)) return uniform_selection(atoms, prices.size());
  std::vector<double> out(prices.size(), 0.0);
  for (const auto& a : atoms) {
    const auto xs = members(a.set);
    if (xs.size() == 1) {
      out[xs[0]] += a.probability;
      continue;
    }
    double cheapest = prices[xs[0]];
    for (auto x : xs) cheapest = std::min(cheapest, prices[x]);
    double total = 0.0;
    for (auto x : xs) total += std::max(0.0, tie_eps - (prices[x] - cheapest));
    for (auto x : xs) out[x] += a.probability * std::max(0.0, tie_eps - (prices[x] - cheapest)) / total;
  }
  return out;
}

/// Lottery demand under the uniform selection rule.
inline std::vector<double> lottery_demand(const WeakOrder& prefs, const PriceVector& prices, double budget,
                                          const ShockSample& shocks) {
  return uniform_selection(demand_atoms(prefs, prices, budget, shocks), prefs.num_objects());
}

/// Expected demand of the types arriving in periods [from, to], in units of
/// one arrival per period.
inline std::vector<double> aggregate_demand(const MarketSpec& spec, const PriceVector& prices, int from, int to,
                                            const ShockSample& shocks) {
  if (from < 1 || to > spec.horizon() || from > to) throw Error(ErrorCode::invalid_argument, "invalid period window");
  if (prices.size() != spec.num_objects()) throw Error(ErrorCode::invalid_argument, "price vector length mismatch");
  std::vector<double> out(spec.num_objects(), 0.0);
  for (int t = from; t <= to; ++t)
    for (TypeIndex i = 0; i < spec.num_types(); ++i) {
      const double mass = spec.arrivals.mass(i, t);
      if (mass == 0.0) continue;
      auto row = lottery_demand(spec.types[i].preferences, prices, spec.budget(i, t), shocks);
      for (std::size_t x = 0; x < out.size(); ++x) out[x] += mass * row[x];
    }
  return out;
}

struct GapReport {
  bool holds = true;
  std::vector<std::pair<ObjectIndex, ObjectIndex>> violations;
};

/// Checks |p_x - p_y| > 2z for every pair of strictly positive prices.
inline GapReport rtb_gap_condition(const PriceVector& prices, double z) {
  GapReport r;
  for (std::size_t x = 0; x < prices.size(); ++x)
    for (std::size_t y = x + 1; y < prices.size(); ++y)
      if (prices[x] > 0.0 && prices[y] > 0.0 && !(std::abs(prices[x] - prices[y]) > 2.0 * z)) {
        r.holds = false;
        r.violations.emplace_back(x, y);
      }
  return r;
}

}  // namespace sem
