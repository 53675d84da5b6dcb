#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sem/error.hpp"
#include "sem/market.hpp"
#include "sem/rng.hpp"

namespace sem {

/// One object per arrival, in row order.
using ExPostAssignment = std::vector<ObjectIndex>;

namespace detail {

inline constexpr double kIntegralSnap = 1e-9;

inline bool fractional(double v) { return v > kIntegralSnap && v < 1.0 - kIntegralSnap; }

}  // namespace detail

/// Rounds a fractional assignment of arrivals (rows) to objects (columns) by
/// repeatedly shifting mass around a cycle or maximal path of fractional
/// entries. Each entry's marginal probability is preserved, each row ends
/// with exactly one object, column totals round to their floor or ceiling,
/// and indicators for the same object are negatively correlated.
inline ExPostAssignment dependent_round(const std::vector<std::vector<double>>& rows,
                                        const std::vector<std::int64_t>& capacity, std::uint64_t seed) {
  const std::size_t R = rows.size();
  const std::size_t X = capacity.size();
  std::vector<double> column(X, 0.0);
  auto a = rows;
  for (std::size_t r = 0; r < R; ++r) {
    if (a[r].size() != X) throw Error(ErrorCode::invalid_argument, "row length mismatch");
    double sum = 0.0;
    for (std::size_t x = 0; x < X; ++x) {
      double& v = a[r][x];
      if (!(v >= -detail::kIntegralSnap && v <= 1.0 + detail::kIntegralSnap))
        throw Error(ErrorCode::invalid_argument, "lottery entry outside [0,1]");
      if (v < detail::kIntegralSnap) v = 0.0;
      if (v > 1.0 - detail::kIntegralSnap) v = 1.0;
      sum += v;
      column[x] += v;
    }
    if (std::abs(sum - 1.0) > kProbabilityTolerance * 10) throw Error(ErrorCode::invalid_argument, "row does not sum to one");
  }
  for (std::size_t x = 0; x < X; ++x)
    if (column[x] > static_cast<double>(capacity[x]) + kSupplyTolerance)
      throw Error(ErrorCode::infeasible, "column mass exceeds capacity");

  auto eng = rng::make_engine(seed, {0xd0});
  // vertices: rows 0..R-1, columns R..R+X-1
  auto degree_of_column = [&](std::size_t x) {
    int d = 0;
    for (std::size_t r = 0; r < R; ++r) d += detail::fractional(a[r][x]);
    return d;
  };
  struct Edge {
    std::size_t row, col;
  };
  std::vector<Edge> walk;
  std::vector<long> seen_at(R + X);
  for (;;) {
    // start at a column touched by exactly one fractional entry if any, so
    // that a walk without cycles ends at another such column
    std::size_t start = R + X;
    for (std::size_t x = 0; x < X && start == R + X; ++x)
      if (degree_of_column(x) == 1) start = R + x;
    for (std::size_t r = 0; r < R && start == R + X; ++r)
      for (std::size_t x = 0; x < X; ++x)
        if (detail::fractional(a[r][x])) {
          start = r;
          break;
        }
    if (start == R + X) break;

    std::fill(seen_at.begin(), seen_at.end(), -1);
    walk.clear();
    std::size_t v = start;
    seen_at[v] = 0;
    std::size_t cycle_from = static_cast<std::size_t>(-1);
    for (;;) {
      // next fractional edge from v, avoiding the edge we came in on
      const Edge* prev = walk.empty() ? nullptr : &walk.back();
      bool moved = false;
      if (v < R) {
        for (std::size_t x = 0; x < X; ++x) {
          if (!detail::fractional(a[v][x]) || (prev && prev->row == v && prev->col == x)) continue;
          walk.push_back({v, x});
          v = R + x;
          moved = true;
          break;
        }
      } else {
        const std::size_t x = v - R;
        for (std::size_t r = 0; r < R; ++r) {
          if (!detail::fractional(a[r][x]) || (prev && prev->row == r && prev->col == x)) continue;
          walk.push_back({r, x});
          v = r;
          moved = true;
          break;
        }
      }
      if (!moved) break;
      if (seen_at[v] >= 0) {
        cycle_from = static_cast<std::size_t>(seen_at[v]);
        break;
      }
      seen_at[v] = static_cast<long>(walk.size());
    }
    const std::size_t first = cycle_from == static_cast<std::size_t>(-1) ? 0 : cycle_from;
    if (walk.size() == first) {
      // isolated fractional entry on a row: numerical residue, snap it
      for (std::size_t x = 0; x < X; ++x)
        if (start < R && detail::fractional(a[start][x])) a[start][x] = std::round(a[start][x]);
      continue;
    }
    double up = INFINITY, down = INFINITY;
    for (std::size_t k = first; k < walk.size(); ++k) {
      const double val = a[walk[k].row][walk[k].col];
      if ((k - first) % 2 == 0) {
        up = std::min(up, 1.0 - val);
        down = std::min(down, val);
      } else {
        up = std::min(up, val);
        down = std::min(down, 1.0 - val);
      }
    }
    const bool go_up = rng::uniform(eng) * (up + down) < down;
    const double delta = go_up ? up : -down;
    for (std::size_t k = first; k < walk.size(); ++k) {
      double& val = a[walk[k].row][walk[k].col];
      val += (k - first) % 2 == 0 ? delta : -delta;
      if (val < detail::kIntegralSnap) val = 0.0;
      if (val > 1.0 - detail::kIntegralSnap) val = 1.0;
    }
  }

  ExPostAssignment out(R);
  for (std::size_t r = 0; r < R; ++r) {
    std::size_t best = 0;
    for (std::size_t x = 1; x < X; ++x)
      if (a[r][x] > a[r][best]) best = x;
    out[r] = best;
  }
  return out;
}

}  // namespace sem
