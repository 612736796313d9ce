#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "reproguard/error.hpp"

namespace reproguard {

// Integer index of a quantization boundary. Bin n is the half-open interval
// [boundary(n), boundary(n + 1)).
using BoundaryIndex = std::int64_t;
using BinIndex = std::int64_t;

struct BoundaryRange {
  BoundaryIndex lo;
  BoundaryIndex hi;

  bool operator==(const BoundaryRange&) const = default;
};

// Uniform (step q, offset s) or explicit sorted-boundary scalar quantizer.
//
// All boundary positions are materialized from integer indices by a single
// function, boundary(i). Every derived quantity (floor/ceil/round, bin
// centers) is computed from those materialized doubles, so two callers that
// agree on an index agree on the value bit for bit.
class QuantGrid {
 public:
  enum class Kind : std::uint8_t { Uniform = 0, Boundaries = 1 };

  static QuantGrid uniform(double q, double s = 0.0) {
    if (!std::isfinite(q) || !(q > 0.0)) fail(ErrorKind::ConfigRejected, "uniform grid needs q > 0");
    if (!std::isfinite(s) || s < 0.0 || s >= 1.0)
      fail(ErrorKind::ConfigRejected, "uniform grid needs 0 <= s < 1");
    QuantGrid g;
    g.kind_ = Kind::Uniform;
    g.q_ = q;
    g.s_ = s;
    g.min_gap_ = q;
    return g;
  }

  // Uniform grid restricted to [lo, hi]; both ends must sit on boundaries.
  static QuantGrid uniform(double q, double s, double lo, double hi) {
    QuantGrid g = uniform(q, s);
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      fail(ErrorKind::ConfigRejected, "domain needs finite lo < hi");
    g.domain_ = BoundaryRange{g.snap_to_boundary(lo), g.snap_to_boundary(hi)};
    return g;
  }

  // Non-uniform grid. With clamp_to_domain the outer boundaries act as the
  // domain [b_0, b_K] and out-of-range inputs are clamped; otherwise they
  // are rejected.
  static QuantGrid boundaries(std::vector<double> b, bool clamp_to_domain = true) {
    if (b.size() < 2) fail(ErrorKind::ConfigRejected, "boundary table needs at least 2 entries");
    double gap = INFINITY;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!std::isfinite(b[i])) fail(ErrorKind::ConfigRejected, "boundary table has a non-finite entry");
      if (i > 0) {
        if (!(b[i] > b[i - 1])) fail(ErrorKind::ConfigRejected, "boundary table must be strictly increasing");
        gap = std::min(gap, b[i] - b[i - 1]);
      }
    }
    QuantGrid g;
    g.kind_ = Kind::Boundaries;
    g.table_ = std::move(b);
    g.min_gap_ = gap;
    if (clamp_to_domain) g.domain_ = BoundaryRange{0, static_cast<BoundaryIndex>(g.table_.size() - 1)};
    return g;
  }

  Kind kind() const noexcept { return kind_; }
  bool is_uniform() const noexcept { return kind_ == Kind::Uniform; }
  double q() const noexcept { return q_; }
  double s() const noexcept { return s_; }
  const std::vector<double>& table() const noexcept { return table_; }
  double min_gap() const noexcept { return min_gap_; }
  const std::optional<BoundaryRange>& domain() const noexcept { return domain_; }

  double domain_lo() const { return boundary(domain_.value().lo); }
  double domain_hi() const { return boundary(domain_.value().hi); }

  // Lowest/highest boundary index that exists at all (unbounded for a
  // uniform grid).
  BoundaryIndex first_boundary() const noexcept {
    return is_uniform() ? std::numeric_limits<BoundaryIndex>::min() / 4 : 0;
  }
  BoundaryIndex last_boundary() const noexcept {
    return is_uniform() ? std::numeric_limits<BoundaryIndex>::max() / 4
                        : static_cast<BoundaryIndex>(table_.size() - 1);
  }

  double boundary(BoundaryIndex i) const {
    if (is_uniform()) return (static_cast<double>(i) - s_) * q_;
    if (i < 0 || i >= static_cast<BoundaryIndex>(table_.size()))
      fail(ErrorKind::InvalidIndex, "boundary index " + std::to_string(i) + " out of range");
    return table_[static_cast<std::size_t>(i)];
  }

  // Clamp into the domain when one is set; identity otherwise.
  double clip(double v) const {
    if (!domain_) return v;
    return std::clamp(v, domain_lo(), domain_hi());
  }

  // Largest boundary index i with boundary(i) <= v.
  BoundaryIndex floor_index(double v) const {
    require_finite(v);
    if (is_uniform()) {
      const double t = v / q_ + s_;
      if (!(std::fabs(t) < 0x1p52)) fail(ErrorKind::InvalidInput, "value too large for the grid step");
      auto i = static_cast<BoundaryIndex>(std::floor(t));
      // v / q can round across a boundary; settle against materialized values.
      while (boundary(i + 1) <= v) ++i;
      while (boundary(i) > v) --i;
      return i;
    }
    if (v < table_.front() || v > table_.back()) fail(ErrorKind::Domain, "value outside boundary table");
    auto it = std::upper_bound(table_.begin(), table_.end(), v);
    return static_cast<BoundaryIndex>(it - table_.begin()) - 1;
  }

  // Boundary index of R(v): the closer of F(v) and C(v), ties to F(v).
  BoundaryIndex round_index(double v) const {
    const BoundaryIndex f = floor_index(v);
    if (f >= last_boundary()) return f;
    const double lo = boundary(f);
    const double hi = boundary(f + 1);
    return (v - lo > hi - v) ? f + 1 : f;
  }

  double floor_b(double v) const { return boundary(floor_index(v)); }

  double ceil_b(double v) const {
    const BoundaryIndex f = floor_index(v);
    if (f >= last_boundary()) fail(ErrorKind::Domain, "no boundary above the last table entry");
    return boundary(f + 1);
  }

  double round_b(double v) const { return boundary(round_index(v)); }

  BinIndex quantize(double v) const {
    require_finite(v);
    if (domain_) v = clip(v);
    BinIndex n = floor_index(v);
    if (domain_ && n >= domain_->hi) n = domain_->hi - 1;
    if (!is_uniform() && n >= last_boundary()) n = last_boundary() - 1;
    return n;
  }

  double dequantize(BinIndex n) const {
    if (is_uniform()) return (static_cast<double>(n) + 0.5 - s_) * q_;
    if (n < 0 || n + 1 >= static_cast<BinIndex>(table_.size()))
      fail(ErrorKind::InvalidIndex, "bin index " + std::to_string(n) + " out of range");
    const auto k = static_cast<std::size_t>(n);
    return (table_[k] + table_[k + 1]) / 2.0;
  }

  bool has_bin(BinIndex n) const {
    if (domain_) return n >= domain_->lo && n < domain_->hi;
    if (is_uniform()) return true;
    return n >= 0 && n + 1 < static_cast<BinIndex>(table_.size());
  }

  std::size_t bin_count() const {
    if (domain_) return static_cast<std::size_t>(domain_->hi - domain_->lo);
    if (is_uniform()) return 0;
    return table_.size() - 1;
  }

  // Empty string when the 4-epsilon margin holds, else a description of
  // the violated margin.
  std::string margin_violation(double epsilon) const {
    if (!std::isfinite(epsilon) || epsilon < 0.0) return "epsilon must be finite and >= 0";
    if (min_gap_ > 4.0 * epsilon) return {};
    return std::string(is_uniform() ? "step q" : "min boundary gap") + " = " + std::to_string(min_gap_) +
           " is not greater than 4*epsilon = " + std::to_string(4.0 * epsilon);
  }

  void validate(double epsilon) const {
    if (auto why = margin_violation(epsilon); !why.empty()) fail(ErrorKind::ConfigRejected, why);
  }

  bool operator==(const QuantGrid&) const = default;

 private:
  QuantGrid() = default;

  static void require_finite(double v) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "non-finite value");
  }

  BoundaryIndex snap_to_boundary(double x) const {
    const double t = x / q_ + s_;
    const double r = std::nearbyint(t);
    if (std::fabs(t - r) > 1e-9 * std::max(1.0, std::fabs(t)))
      fail(ErrorKind::ConfigRejected, "domain edge " + std::to_string(x) + " is not a grid boundary");
    return static_cast<BoundaryIndex>(r);
  }

  Kind kind_ = Kind::Uniform;
  double q_ = 1.0;
  double s_ = 0.0;
  std::vector<double> table_;
  double min_gap_ = 1.0;
  std::optional<BoundaryRange> domain_;
};

inline BinIndex quantize(const QuantGrid& g, double v) { return g.quantize(v); }
inline double dequantize(const QuantGrid& g, BinIndex n) { return g.dequantize(n); }
inline double floor_b(const QuantGrid& g, double v) { return g.floor_b(v); }
inline double ceil_b(const QuantGrid& g, double v) { return g.ceil_b(v); }
inline double round_b(const QuantGrid& g, double v) { return g.round_b(v); }
inline void validate(const QuantGrid& g, double epsilon) { g.validate(epsilon); }

}  // namespace reproguard
