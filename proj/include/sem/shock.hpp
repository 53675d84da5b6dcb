#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sem/error.hpp"
#include "sem/rng.hpp"

namespace sem {

/// ntb: one common shock c ~ U[-beta, beta] added to every price.
/// rtb: c plus an independent zeta_x ~ U[-z, z] per object.
enum class ShockKind { ntb, rtb };

struct ShockModel {
  ShockKind kind = ShockKind::ntb;
  double common_bound = 0.08;
  double rtb_halfwidth = 0.02;

  double upper() const noexcept { return common_bound + (kind == ShockKind::rtb ? rtb_halfwidth : 0.0); }
  double lower() const noexcept { return -upper(); }

  void validate() const {
    if (!(common_bound >= 0.0)) throw Error(ErrorCode::invalid_spec, "common bound must be nonnegative", "shock.beta");
    if (kind == ShockKind::rtb && !(rtb_halfwidth > 0.0))
      throw Error(ErrorCode::invalid_spec, "rtb half-width must be positive", "shock.z");
    if (kind == ShockKind::ntb && common_bound == 0.0)
      throw Error(ErrorCode::invalid_spec, "shock must be continuously distributed", "shock.beta");
  }

  friend bool operator==(const ShockModel&, const ShockModel&) = default;
};

/// A fixed Monte Carlo sample of shock vectors. Draw m depends only on
/// (seed, m), so any partition of the draws reproduces the same values.
class ShockSample {
 public:
  ShockSample() = default;

  static ShockSample draw(const ShockModel& model, std::size_t num_objects, std::size_t draws, std::uint64_t seed) {
    model.validate();
    ShockSample s;
    s.kind_ = model.kind;
    s.num_objects_ = num_objects;
    s.upper_ = model.upper();
    s.common_.resize(draws);
    for (std::size_t m = 0; m < draws; ++m)
      s.common_[m] = model.common_bound * (2.0 * rng::counter_uniform(seed, {m, 0}) - 1.0);
    if (model.kind == ShockKind::rtb) {
      s.idio_.resize(draws * num_objects);
      for (std::size_t m = 0; m < draws; ++m)
        for (std::size_t x = 0; x < num_objects; ++x)
          s.idio_[m * num_objects + x] = model.rtb_halfwidth * (2.0 * rng::counter_uniform(seed, {m, x + 1}) - 1.0);
    }
    s.sorted_common_ = s.common_;
    std::sort(s.sorted_common_.begin(), s.sorted_common_.end());
    return s;
  }

  /// Sample from explicit common shocks (NTB); used by tests and oracles.
  static ShockSample from_common(std::vector<double> common, std::size_t num_objects) {
    ShockSample s;
    s.kind_ = ShockKind::ntb;
    s.num_objects_ = num_objects;
    s.common_ = std::move(common);
    s.upper_ = 0.0;
    for (double c : s.common_) s.upper_ = std::max(s.upper_, std::abs(c));
    s.sorted_common_ = s.common_;
    std::sort(s.sorted_common_.begin(), s.sorted_common_.end());
    return s;
  }

  ShockKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return common_.size(); }
  bool empty() const noexcept { return common_.empty(); }
  std::size_t num_objects() const noexcept { return num_objects_; }
  /// Largest attainable shock coordinate.
  double upper() const noexcept { return upper_; }

  double common(std::size_t m) const { return common_[m]; }
  double value(std::size_t m, std::size_t x) const {
    return kind_ == ShockKind::rtb ? common_[m] + idio_[m * num_objects_ + x] : common_[m];
  }
  /// Common shocks sorted ascending.
  std::span<const double> sorted_common() const noexcept { return sorted_common_; }

  /// Number of draws with common shock <= v.
  std::size_t count_at_most(double v) const {
    return static_cast<std::size_t>(std::upper_bound(sorted_common_.begin(), sorted_common_.end(), v) -
                                    sorted_common_.begin());
  }

 private:
  ShockKind kind_ = ShockKind::ntb;
  std::size_t num_objects_ = 0;
  double upper_ = 0.0;
  std::vector<double> common_;
  std::vector<double> idio_;
  std::vector<double> sorted_common_;
};

}  // namespace sem
