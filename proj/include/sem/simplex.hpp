#pragma once

#include <cstddef>
#include <type_traits>
#include <vector>

#include "sem/error.hpp"

namespace sem::lp {

enum class Relation { le, eq, ge };
enum class Status { optimal, infeasible, unbounded };

template <class T>
struct Constraint {
  std::vector<T> coeffs;
  Relation relation = Relation::le;
  T rhs{};
};

/// minimize objective . x subject to constraints and x >= 0.
template <class T>
struct Problem {
  std::size_t num_vars = 0;
  std::vector<T> objective;
  std::vector<Constraint<T>> constraints;

  void add(std::vector<T> coeffs, Relation rel, T rhs) {
    coeffs.resize(num_vars, T(0));
    constraints.push_back({std::move(coeffs), rel, std::move(rhs)});
  }
};

template <class T>
struct Result {
  Status status = Status::infeasible;
  T objective{};
  std::vector<T> x;
};

/// Pivot tolerance: zero for exact arithmetic.
template <class T>
T epsilon() {
  if constexpr (std::is_floating_point_v<T>) return T(1e-9);
  else return T(0);
}

namespace detail {

template <class T>
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), a_(rows, std::vector<T>(cols + 1, T(0))), cost_(cols + 1, T(0)), basis_(rows, 0) {}

  std::vector<T>& row(std::size_t i) { return a_[i]; }
  std::vector<T>& cost() { return cost_; }
  std::vector<std::size_t>& basis() { return basis_; }
  const T& rhs(std::size_t i) const { return a_[i][n_]; }

  void pivot(std::size_t r, std::size_t c) {
    const T p = a_[r][c];
    for (auto& v : a_[r]) v /= p;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r || a_[i][c] == T(0)) continue;
      const T f = a_[i][c];
      for (std::size_t j = 0; j <= n_; ++j) a_[i][j] -= f * a_[r][j];
    }
    if (cost_[c] != T(0)) {
      const T f = cost_[c];
      for (std::size_t j = 0; j <= n_; ++j) cost_[j] -= f * a_[r][j];
    }
    basis_[r] = c;
  }

  /// Bland's rule iterations; `allowed` masks columns that may enter.
  Status run(const std::vector<bool>& allowed) {
    const T eps = epsilon<T>();
    for (;;) {
      std::size_t enter = n_;
      for (std::size_t j = 0; j < n_; ++j)
        if (allowed[j] && cost_[j] < -eps) {
          enter = j;
          break;
        }
      if (enter == n_) return Status::optimal;
      std::size_t leave = m_;
      T best{};
      for (std::size_t i = 0; i < m_; ++i) {
        if (!(a_[i][enter] > eps)) continue;
        T ratio = a_[i][n_] / a_[i][enter];
        if (leave == m_ || ratio < best || (ratio == best && basis_[i] < basis_[leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave == m_) return Status::unbounded;
      pivot(leave, enter);
    }
  }

  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }

 private:
  std::size_t m_, n_;
  std::vector<std::vector<T>> a_;
  std::vector<T> cost_;
  std::vector<std::size_t> basis_;
};

}  // namespace detail

/// Two-phase dense simplex with Bland's rule.
template <class T>
Result<T> solve(const Problem<T>& p) {
  const std::size_t n = p.num_vars;
  const std::size_t m = p.constraints.size();
  if (p.objective.size() != n) throw Error(ErrorCode::invalid_argument, "objective length mismatch");
  std::size_t slacks = 0, artificials = 0;
  for (const auto& c : p.constraints) {
    if (c.coeffs.size() != n) throw Error(ErrorCode::invalid_argument, "constraint length mismatch");
    const bool flip = c.rhs < T(0);
    auto rel = c.relation;
    if (flip && rel != Relation::eq) rel = rel == Relation::le ? Relation::ge : Relation::le;
    if (rel != Relation::eq) ++slacks;
    if (rel != Relation::le) ++artificials;
  }
  const std::size_t cols = n + slacks + artificials;
  detail::Tableau<T> tab(m, cols);
  std::vector<bool> is_artificial(cols, false);
  std::size_t next_slack = n, next_art = n + slacks;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& c = p.constraints[i];
    const bool flip = c.rhs < T(0);
    auto rel = c.relation;
    if (flip && rel != Relation::eq) rel = rel == Relation::le ? Relation::ge : Relation::le;
    auto& row = tab.row(i);
    for (std::size_t j = 0; j < n; ++j) row[j] = flip ? T(-c.coeffs[j]) : c.coeffs[j];
    row[cols] = flip ? T(-c.rhs) : c.rhs;
    if (rel == Relation::le) {
      row[next_slack] = T(1);
      tab.basis()[i] = next_slack++;
    } else {
      if (rel == Relation::ge) row[next_slack++] = T(-1);
      row[next_art] = T(1);
      is_artificial[next_art] = true;
      tab.basis()[i] = next_art++;
    }
  }

  std::vector<bool> allowed(cols, true);
  if (artificials > 0) {
    auto& cost = tab.cost();
    for (std::size_t i = 0; i < m; ++i)
      if (is_artificial[tab.basis()[i]])
        for (std::size_t j = 0; j <= cols; ++j)
          if (!is_artificial[j] || j == cols) cost[j] -= tab.row(i)[j];
    tab.run(allowed);
    // phase-one optimum is -cost[cols]
    T infeas = -tab.cost()[cols];
    if (infeas > epsilon<T>() * T(1000)) return {Status::infeasible, T(0), {}};
    for (std::size_t i = 0; i < m; ++i) {
      if (!is_artificial[tab.basis()[i]]) continue;
      for (std::size_t j = 0; j < cols; ++j)
        if (!is_artificial[j] && (tab.row(i)[j] > epsilon<T>() || tab.row(i)[j] < -epsilon<T>())) {
          tab.pivot(i, j);
          break;
        }
    }
    for (std::size_t j = 0; j < cols; ++j)
      if (is_artificial[j]) allowed[j] = false;
  }

  auto& cost = tab.cost();
  std::fill(cost.begin(), cost.end(), T(0));
  for (std::size_t j = 0; j < n; ++j) cost[j] = p.objective[j];
  for (std::size_t i = 0; i < m; ++i) {
    const auto b = tab.basis()[i];
    if (cost[b] == T(0)) continue;
    const T f = cost[b];
    for (std::size_t j = 0; j <= cols; ++j) cost[j] -= f * tab.row(i)[j];
  }
  if (tab.run(allowed) == Status::unbounded) return {Status::unbounded, T(0), {}};

  Result<T> r;
  r.status = Status::optimal;
  r.x.assign(n, T(0));
  for (std::size_t i = 0; i < m; ++i)
    if (tab.basis()[i] < n) r.x[tab.basis()[i]] = tab.rhs(i);
  r.objective = T(0);
  for (std::size_t j = 0; j < n; ++j) r.objective += p.objective[j] * r.x[j];
  return r;
}

}  // namespace sem::lp
