#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sem/mechanism.hpp"
#include "sem/simplex.hpp"

namespace sem {

enum class Dominance { equal, strictly_dominates, strictly_dominated, incomparable };

inline const char* to_string(Dominance d) {
  switch (d) {
    case Dominance::equal: return "equal";
    case Dominance::strictly_dominates: return "strictly_dominates";
    case Dominance::strictly_dominated: return "strictly_dominated";
    case Dominance::incomparable: return "incomparable";
  }
  return "?";
}

struct DominanceVerdict {
  Dominance relation = Dominance::equal;
  /// First tier cutoff where the cumulative sums differ.
  std::optional<std::size_t> cutoff;

  bool dominates() const { return relation == Dominance::equal || relation == Dominance::strictly_dominates; }
};

/// Compares lotteries a and b by cumulative mass on each upper contour.
inline DominanceVerdict sd_compare(const WeakOrder& prefs, const std::vector<double>& a, const std::vector<double>& b,
                                   double tol = 1e-9) {
  if (a.size() != prefs.num_objects() || b.size() != prefs.num_objects())
    throw Error(ErrorCode::invalid_argument, "lottery length mismatch");
  bool above = false, below = false;
  DominanceVerdict v;
  double ca = 0.0, cb = 0.0;
  for (std::size_t k = 0; k < prefs.num_tiers(); ++k) {
    for (auto x : prefs.tier(k)) {
      ca += a[x];
      cb += b[x];
    }
    if (ca > cb + tol) above = true;
    else if (cb > ca + tol) below = true;
    else continue;
    if (!v.cutoff) v.cutoff = k;
  }
  v.relation = above && below ? Dominance::incomparable
               : above        ? Dominance::strictly_dominates
               : below        ? Dominance::strictly_dominated
                              : Dominance::equal;
  return v;
}

/// Agents (or groups of mass `mass`) holding lotteries, with supply per object.
struct EfficiencyInstance {
  std::vector<WeakOrder> prefs;
  std::vector<double> mass;
  std::vector<std::vector<double>> rows;
  std::vector<double> supply;
};

enum class OracleMode { automatic, floating, exact };

struct EfficiencyVerdict {
  bool efficient = true;
  double total_slack = 0.0;
  bool exact = false;
  /// Feasible allocation weakly preferred by every agent, strictly by one.
  std::vector<std::vector<double>> dominating;
};

namespace detail {

template <class T>
lp::Problem<T> efficiency_lp(const EfficiencyInstance& in) {
  const std::size_t G = in.rows.size(), X = in.supply.size();
  lp::Problem<T> prob;
  prob.num_vars = G * X;
  prob.objective.assign(prob.num_vars, T(0));
  for (std::size_t g = 0; g < G; ++g) {
    std::vector<T> row(prob.num_vars, T(0));
    for (std::size_t x = 0; x < X; ++x) row[g * X + x] = T(1);
    prob.add(std::move(row), lp::Relation::eq, T(1));
    const auto& p = in.prefs[g];
    std::vector<T> contour(prob.num_vars, T(0));
    T held(0);
    for (std::size_t k = 0; k + 1 < p.num_tiers(); ++k) {
      for (auto x : p.tier(k)) {
        contour[g * X + x] = T(1);
        held += T(in.rows[g][x]);
        // maximize mass-weighted slack summed over every contour
        prob.objective[g * X + x] -= T(in.mass[g]) * T(static_cast<long>(p.num_tiers() - 1 - k));
      }
      prob.add(contour, lp::Relation::ge, held);
    }
  }
  for (std::size_t x = 0; x < X; ++x) {
    std::vector<T> col(prob.num_vars, T(0));
    for (std::size_t g = 0; g < G; ++g) col[g * X + x] = T(in.mass[g]);
    prob.add(std::move(col), lp::Relation::le, T(in.supply[x]));
  }
  return prob;
}

template <class T>
T held_value(const EfficiencyInstance& in) {
  T v(0);
  for (std::size_t g = 0; g < in.rows.size(); ++g) {
    const auto& p = in.prefs[g];
    for (std::size_t k = 0; k + 1 < p.num_tiers(); ++k)
      for (auto x : p.tier(k)) v += T(in.mass[g]) * T(in.rows[g][x]) * T(static_cast<long>(p.num_tiers() - 1 - k));
  }
  return v;
}

template <class T>
EfficiencyVerdict run_oracle(const EfficiencyInstance& in, double tol) {
  const auto sol = lp::solve(efficiency_lp<T>(in));
  if (sol.status != lp::Status::optimal) throw Error(ErrorCode::numerical, "efficiency LP did not reach an optimum");
  const T slack = -sol.objective - held_value<T>(in);
  EfficiencyVerdict v;
  v.exact = !std::is_floating_point_v<T>;
  v.total_slack = static_cast<double>(slack);
  v.efficient = !(v.total_slack > tol);
  if (!v.efficient) {
    const std::size_t X = in.supply.size();
    v.dominating.assign(in.rows.size(), std::vector<double>(X, 0.0));
    for (std::size_t g = 0; g < in.rows.size(); ++g)
      for (std::size_t x = 0; x < X; ++x) v.dominating[g][x] = static_cast<double>(sol.x[g * X + x]);
  }
  return v;
}

}  // namespace detail

/// Ordinal efficiency: no feasible reallocation is weakly better for all
/// and strictly better for some, in the stochastic-dominance sense.
inline EfficiencyVerdict ordinal_efficiency_oracle(const EfficiencyInstance& in, OracleMode mode = OracleMode::automatic) {
  const std::size_t G = in.rows.size(), X = in.supply.size();
  if (in.prefs.size() != G || in.mass.size() != G) throw Error(ErrorCode::invalid_argument, "instance size mismatch");
  for (std::size_t g = 0; g < G; ++g)
    if (in.rows[g].size() != X || in.prefs[g].num_objects() != X)
      throw Error(ErrorCode::invalid_argument, "row length mismatch");
  const bool exact = mode == OracleMode::exact || (mode == OracleMode::automatic && G * X <= 64);
  if (exact) return detail::run_oracle<boost::multiprecision::cpp_rational>(in, 1e-7);
  return detail::run_oracle<double>(in, 1e-5);
}

/// Efficiency instance for the groups of an equilibrium. Supply is raised to
/// demand where the solver overshot within tolerance, so the allocation
/// itself stays feasible.
inline EfficiencyInstance efficiency_instance(const EquilibriumResult& eq) {
  EfficiencyInstance in;
  for (const auto& g : eq.groups) {
    in.prefs.push_back(g.prefs);
    in.mass.push_back(g.mass);
  }
  in.rows = eq.allocation;
  in.supply = eq.supply;
  for (std::size_t x = 0; x < in.supply.size(); ++x) {
    double used = 0.0;
    for (std::size_t g = 0; g < in.rows.size(); ++g) used += in.mass[g] * in.rows[g][x];
    in.supply[x] = std::max(in.supply[x], used);
  }
  return in;
}

/// Efficiency instance for a realized ex-post allocation of whole arrivals.
inline EfficiencyInstance efficiency_instance(const std::vector<WeakOrder>& prefs, const std::vector<ObjectIndex>& assigned,
                                              const std::vector<std::int64_t>& supply) {
  EfficiencyInstance in;
  in.prefs = prefs;
  in.mass.assign(prefs.size(), 1.0);
  for (auto x : assigned) {
    std::vector<double> row(supply.size(), 0.0);
    row.at(x) = 1.0;
    in.rows.push_back(std::move(row));
  }
  for (auto s : supply) in.supply.push_back(static_cast<double>(s));
  return in;
}

struct GreedyViolation {
  int period = 0;
  std::size_t arrival = 0;
  ObjectIndex held = 0;
  ObjectIndex better = 0;
  double consumed = 0.0;
  double supply = 0.0;
};

struct GreedyReport {
  bool holds = true;
  std::vector<GreedyViolation> violations;
};

/// An arrival may hold mass on x only if every object it strictly prefers to
/// x is used up by arrivals of its period or earlier: realized units in past
/// periods plus lottery mass in its own.
inline GreedyReport greedy_check(const std::vector<PeriodRecord>& trace, double tol = 1e-6) {
  GreedyReport rep;
  if (trace.empty()) return rep;
  const auto& initial = trace.front().supply_before;
  const std::size_t X = initial.size();
  std::vector<double> past(X, 0.0);
  for (const auto& rec : trace) {
    std::vector<double> consumed = past;
    for (const auto& row : rec.lotteries)
      for (std::size_t x = 0; x < X; ++x) consumed[x] += row[x];
    for (std::size_t k = 0; k < rec.arrivals.size(); ++k) {
      const auto& prefs = rec.arrivals[k].prefs;
      for (std::size_t x = 0; x < X; ++x) {
        if (rec.lotteries[k][x] <= 1e-9) continue;
        for (std::size_t y = 0; y < X; ++y) {
          if (!prefs.prefers(y, x)) continue;
          if (consumed[y] + tol < static_cast<double>(initial[y]))
            rep.violations.push_back({rec.period, k, x, y, consumed[y], static_cast<double>(initial[y])});
        }
      }
    }
    for (auto x : rec.assignment) past[x] += 1.0;
  }
  rep.holds = rep.violations.empty();
  return rep;
}

struct EnvyPair {
  int period = 0;
  std::size_t arrival = 0;
  int other_period = 0;
  std::size_t other = 0;
};

struct EnvyReport {
  bool holds = true;
  std::vector<EnvyPair> pairs;
};

/// No arrival's lottery is strictly dominated, under its own preferences, by
/// the lottery of an arrival from the same or a later period.
inline EnvyReport envy_check(const std::vector<PeriodRecord>& trace, double tol = 1e-6) {
  EnvyReport rep;
  for (std::size_t t = 0; t < trace.size(); ++t)
    for (std::size_t k = 0; k < trace[t].arrivals.size(); ++k) {
      const auto& prefs = trace[t].arrivals[k].prefs;
      for (std::size_t u = t; u < trace.size(); ++u)
        for (std::size_t j = 0; j < trace[u].arrivals.size(); ++j) {
          if (u == t && j == k) continue;
          if (sd_compare(prefs, trace[u].lotteries[j], trace[t].lotteries[k], tol).relation ==
              Dominance::strictly_dominates)
            rep.pairs.push_back({trace[t].period, k, trace[u].period, j});
        }
    }
  rep.holds = rep.pairs.empty();
  return rep;
}

struct ProbeResult {
  std::size_t trials = 0;
  std::size_t profitable = 0;
  double frequency() const { return trials == 0 ? 0.0 : static_cast<double>(profitable) / static_cast<double>(trials); }
};

/// Paired runs in the n-replica market where the first period-`period`
/// arrival has type `truth` and reports either truthfully or as `report`.
/// Counts seeds where the misreport's lottery strictly dominates the
/// truthful one under the true preferences by at least eps somewhere.
inline ProbeResult sp1_probe(const MarketSpec& base, int n, TypeIndex truth, TypeIndex report,
                             const std::vector<std::uint64_t>& seeds, double eps = 0.05, int period = 1,
                             const SemOptions& opt = {}) {
  const auto spec = replicate(base, n);
  const auto& t_truth = spec.types.at(truth);
  const auto& t_report = spec.types.at(report);
  if (t_truth.arrival_time != t_report.arrival_time)
    throw Error(ErrorCode::invalid_argument, "misreport must share the arrival time of the true type");
  if (t_truth.arrival_time) period = *t_truth.arrival_time;
  ProbeResult res;
  for (auto seed : seeds) {
    const auto shocks = mechanism_shocks(spec, seed, opt.shock_draws);
    auto state = initial_state(spec);
    std::vector<std::vector<double>> lottery(2);
    for (int t = 1; t <= period; ++t) {
      auto arrivals = arrivals_of(spec, draw_arrivals(spec, t, seed));
      if (t < period) {
        state = sem_step(spec, state, arrivals, shocks, seed, opt).next;
        continue;
      }
      if (arrivals.empty()) break;
      arrivals[0] = arrival_of(spec, truth);
      lottery[0] = spot_lotteries(spec, t, state.remaining, arrivals, shocks, opt).lotteries[0];
      arrivals[0] = arrival_of(spec, report);
      lottery[1] = spot_lotteries(spec, t, state.remaining, arrivals, shocks, opt).lotteries[0];
    }
    if (lottery[0].empty()) continue;
    ++res.trials;
    double gap = 0.0;
    for (std::size_t x = 0; x < lottery[0].size(); ++x) gap = std::max(gap, std::abs(lottery[1][x] - lottery[0][x]));
    if (gap >= eps && sd_compare(t_truth.preferences, lottery[1], lottery[0]).relation == Dominance::strictly_dominates)
      ++res.profitable;
  }
  return res;
}

}  // namespace sem
