#include <gtest/gtest.h>

#include <map>

#include "sem/rounding.hpp"

using namespace sem;

namespace {

std::vector<std::vector<double>> random_lottery(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  auto eng = rng::make_engine(seed, {1});
  std::vector<std::vector<double>> a(rows, std::vector<double>(cols));
  for (auto& row : a) {
    double s = 0;
    for (auto& v : row) s += (v = rng::uniform(eng) < 0.3 ? 0.0 : rng::uniform(eng));
    if (s == 0) row[0] = s = 1;
    for (auto& v : row) v /= s;
  }
  return a;
}

std::vector<std::int64_t> ceil_columns(const std::vector<std::vector<double>>& a) {
  std::vector<std::int64_t> cap(a[0].size(), 0);
  for (std::size_t x = 0; x < cap.size(); ++x) {
    double s = 0;
    for (const auto& row : a) s += row[x];
    cap[x] = static_cast<std::int64_t>(std::ceil(s - 1e-9));
  }
  return cap;
}

}  // namespace

TEST(DependentRound, HalfHalfSplitsBetweenMatchings) {
  const std::vector<std::vector<double>> a{{0.5, 0.5}, {0.5, 0.5}};
  int first = 0;
  const int draws = 100000;
  for (int s = 0; s < draws; ++s) {
    const auto out = dependent_round(a, {1, 1}, static_cast<std::uint64_t>(s));
    ASSERT_NE(out[0], out[1]);
    first += out[0] == 0;
  }
  EXPECT_NEAR(first / double(draws), 0.5, 0.01);
}

TEST(DependentRound, IntegralInputUnchanged) {
  const std::vector<std::vector<double>> a{{0, 1, 0}, {1, 0, 0}, {0, 0, 1}, {0, 0, 1}};
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto out = dependent_round(a, {1, 1, 2}, s);
    EXPECT_EQ(out, (ExPostAssignment{1, 0, 2, 2}));
  }
}

TEST(DependentRound, PreservesMarginals) {
  const auto a = random_lottery(7, 5, 4);
  const auto cap = ceil_columns(a);
  const int draws = 100000;
  std::vector<std::vector<int>> hits(5, std::vector<int>(4, 0));
  for (int s = 0; s < draws; ++s) {
    const auto out = dependent_round(a, cap, static_cast<std::uint64_t>(s));
    for (std::size_t r = 0; r < 5; ++r) ++hits[r][out[r]];
  }
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(hits[r][x] / double(draws), a[r][x], 0.01) << r << "," << x;
}

TEST(DependentRound, ColumnsStayWithinFloorAndCeiling) {
  for (std::uint64_t m = 0; m < 200; ++m) {
    const std::size_t R = 2 + m % 9, X = 2 + m % 4;
    const auto a = random_lottery(m, R, X);
    const auto cap = ceil_columns(a);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto out = dependent_round(a, cap, s);
      for (std::size_t x = 0; x < X; ++x) {
        double mass = 0;
        std::int64_t got = 0;
        for (std::size_t r = 0; r < R; ++r) {
          mass += a[r][x];
          got += out[r] == x;
          if (a[r][x] == 0.0) {
            ASSERT_NE(out[r], x);
          }
        }
        ASSERT_GE(got, static_cast<std::int64_t>(std::floor(mass + 1e-9)));
        ASSERT_LE(got, cap[x]);
      }
    }
  }
}

TEST(DependentRound, SameObjectIndicatorsNegativelyCorrelated) {
  const auto a = random_lottery(11, 4, 3);
  const auto cap = ceil_columns(a);
  const int draws = 60000;
  // counts[x][r][q]: both r and q get x
  std::vector<std::vector<std::vector<int>>> both(3, std::vector<std::vector<int>>(4, std::vector<int>(4, 0)));
  for (int s = 0; s < draws; ++s) {
    const auto out = dependent_round(a, cap, static_cast<std::uint64_t>(s));
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t q = r + 1; q < 4; ++q)
        if (out[r] == out[q]) ++both[out[r]][r][q];
  }
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t q = r + 1; q < 4; ++q)
        EXPECT_LE(both[x][r][q] / double(draws), a[r][x] * a[q][x] + 0.01) << x << " " << r << " " << q;
}

TEST(DependentRound, ShareVarianceShrinksWithArrivals) {
  for (std::size_t n : {10u, 100u}) {
    std::vector<std::vector<double>> a(n, std::vector<double>{0.3, 0.45, 0.25});
    const auto cap = ceil_columns(a);
    const int draws = 4000;
    double sum = 0, sq = 0;
    for (int s = 0; s < draws; ++s) {
      const auto out = dependent_round(a, cap, static_cast<std::uint64_t>(s));
      double share = 0;
      for (auto o : out) share += o == 1;
      share /= double(n);
      sum += share;
      sq += share * share;
    }
    const double var = sq / draws - (sum / draws) * (sum / draws);
    // the realized count stays within one unit of its mean
    EXPECT_LE(var, 1.0 / (4.0 * double(n) * double(n)) + 1e-12);
  }
}

TEST(DependentRound, RejectsBadInput) {
  EXPECT_THROW(dependent_round({{0.5, 0.4}}, {1, 1}, 1), Error);
  EXPECT_THROW(dependent_round({{1.0, 0.0}, {1.0, 0.0}}, {1, 1}, 1), Error);
  EXPECT_THROW(dependent_round({{1.0}}, {1, 1}, 1), Error);
}

TEST(DependentRound, Deterministic) {
  const auto a = random_lottery(3, 8, 4);
  const auto cap = ceil_columns(a);
  EXPECT_EQ(dependent_round(a, cap, 42), dependent_round(a, cap, 42));
}
