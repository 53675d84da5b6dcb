#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sem/error.hpp"

namespace sem {

using ObjectIndex = std::size_t;
/// Bit set over object indices; markets are limited to 64 objects.
using ObjectMask = std::uint64_t;
inline constexpr std::size_t kMaxObjects = 64;

inline constexpr ObjectMask bit(ObjectIndex x) noexcept { return ObjectMask{1} << x; }
inline constexpr bool contains(ObjectMask m, ObjectIndex x) noexcept { return (m >> x) & 1U; }
inline int popcount(ObjectMask m) noexcept { return std::popcount(m); }

inline std::vector<ObjectIndex> members(ObjectMask m) {
  std::vector<ObjectIndex> out;
  while (m) {
    out.push_back(static_cast<ObjectIndex>(std::countr_zero(m)));
    m &= m - 1;
  }
  return out;
}

/// Complete, transitive preference over objects, stored as indifference
/// tiers, most preferred first. Tiers partition {0, ..., num_objects-1}.
class WeakOrder {
 public:
  WeakOrder() = default;

  WeakOrder(std::vector<std::vector<ObjectIndex>> tiers, std::size_t num_objects)
      : tiers_(std::move(tiers)), tier_of_(num_objects, npos) {
    if (num_objects == 0 || num_objects > kMaxObjects)
      throw Error(ErrorCode::invalid_argument, "object count must be in 1..64");
    for (std::size_t k = 0; k < tiers_.size(); ++k) {
      if (tiers_[k].empty()) throw Error(ErrorCode::invalid_spec, "empty preference tier");
      ObjectMask mask = 0;
      for (auto x : tiers_[k]) {
        if (x >= num_objects) throw Error(ErrorCode::invalid_spec, "unknown object in preference tier");
        if (tier_of_[x] != npos) throw Error(ErrorCode::invalid_spec, "object listed twice in preferences");
        tier_of_[x] = k;
        mask |= bit(x);
      }
      masks_.push_back(mask);
    }
    for (auto t : tier_of_)
      if (t == npos) throw Error(ErrorCode::invalid_spec, "preference tiers do not cover every object");
  }

  /// Builds an order from a possibly partial tier list: the null object is
  /// appended as its own tier if absent, and any other unlisted objects form
  /// one final tier below it.
  static WeakOrder with_fallback(std::vector<std::vector<ObjectIndex>> tiers, std::size_t num_objects,
                                 ObjectIndex null_object) {
    std::vector<bool> seen(num_objects, false);
    for (const auto& tier : tiers)
      for (auto x : tier)
        if (x < num_objects) seen[x] = true;
    if (null_object < num_objects && !seen[null_object]) {
      tiers.push_back({null_object});
      seen[null_object] = true;
    }
    std::vector<ObjectIndex> rest;
    for (ObjectIndex x = 0; x < num_objects; ++x)
      if (!seen[x]) rest.push_back(x);
    if (!rest.empty()) tiers.push_back(std::move(rest));
    return WeakOrder(std::move(tiers), num_objects);
  }

  std::size_t num_objects() const noexcept { return tier_of_.size(); }
  std::size_t num_tiers() const noexcept { return tiers_.size(); }
  const std::vector<ObjectIndex>& tier(std::size_t k) const { return tiers_.at(k); }
  const std::vector<std::vector<ObjectIndex>>& tiers() const noexcept { return tiers_; }
  ObjectMask tier_mask(std::size_t k) const { return masks_.at(k); }
  std::size_t tier_of(ObjectIndex x) const { return tier_of_.at(x); }

  bool prefers(ObjectIndex x, ObjectIndex y) const { return tier_of(x) < tier_of(y); }
  bool indifferent(ObjectIndex x, ObjectIndex y) const { return tier_of(x) == tier_of(y); }
  bool weakly_prefers(ObjectIndex x, ObjectIndex y) const { return tier_of(x) <= tier_of(y); }

  /// Objects in tiers 0..k.
  ObjectMask upper_contour(std::size_t k) const {
    ObjectMask m = 0;
    for (std::size_t j = 0; j <= k && j < masks_.size(); ++j) m |= masks_[j];
    return m;
  }

  /// Objects strictly preferred to x.
  ObjectMask strictly_better_than(ObjectIndex x) const {
    const auto k = tier_of(x);
    return k == 0 ? ObjectMask{0} : upper_contour(k - 1);
  }

  friend bool operator==(const WeakOrder& a, const WeakOrder& b) {
    if (a.tier_of_.size() != b.tier_of_.size() || a.masks_.size() != b.masks_.size()) return false;
    return a.masks_ == b.masks_;
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::vector<ObjectIndex>> tiers_;
  std::vector<std::size_t> tier_of_;
  std::vector<ObjectMask> masks_;
};

/// All weak orders over `num_objects` objects (ordered set partitions).
inline std::vector<WeakOrder> all_weak_orders(std::size_t num_objects) {
  std::vector<WeakOrder> out;
  std::vector<std::vector<ObjectIndex>> tiers;
  const ObjectMask full = num_objects >= 64 ? ~ObjectMask{0} : (bit(num_objects) - 1);
  auto rec = [&](auto&& self, ObjectMask remaining) -> void {
    if (remaining == 0) {
      out.emplace_back(tiers, num_objects);
      return;
    }
    // enumerate nonempty subsets of remaining as the next tier
    for (ObjectMask sub = remaining; sub; sub = (sub - 1) & remaining) {
      tiers.push_back(members(sub));
      self(self, remaining & ~sub);
      tiers.pop_back();
    }
  };
  rec(rec, full);
  return out;
}

}  // namespace sem
