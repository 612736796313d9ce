#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reproguard/error.hpp"
#include "reproguard/quantizer.hpp"

namespace reproguard {

// How a risky value is mapped to its protected output.
//   Full   - signal a direction flag and land on the bin center on v's side.
//   Left   - always the bin center left of R(v); no direction flag.
//   Right  - always the bin center right of R(v); no direction flag.
//   Center - R(v) itself (a boundary, not a bin center); no direction flag.
enum class GuardMode : std::uint8_t { Full = 0, LeftMajor = 1, RightMajor = 2, CenterMajor = 3 };

inline const char* to_string(GuardMode m) {
  switch (m) {
    case GuardMode::Full: return "full";
    case GuardMode::LeftMajor: return "left";
    case GuardMode::RightMajor: return "right";
    case GuardMode::CenterMajor: return "center";
  }
  return "?";
}

inline GuardMode parse_guard_mode(const std::string& s) {
  if (s == "full") return GuardMode::Full;
  if (s == "left") return GuardMode::LeftMajor;
  if (s == "right") return GuardMode::RightMajor;
  if (s == "center") return GuardMode::CenterMajor;
  fail(ErrorKind::InvalidInput, "unknown guard mode '" + s + "'");
}

// Domain edges where both platforms clip. A boundary sitting on a clipped
// edge can never separate v from v', so it is excluded from the risky test.
struct EdgeClip {
  double lo;
  std::optional<double> hi;
};

struct GuardConfig {
  QuantGrid grid;
  double epsilon = 0.0;
  GuardMode mode = GuardMode::CenterMajor;
  std::optional<EdgeClip> edge_clip;
};

struct Flag {
  bool risky = false;
  std::optional<bool> direction;  // Full mode only: false = left, true = right

  bool operator==(const Flag&) const = default;
};

struct GuardedValue {
  double v_out = 0.0;
  Flag flag;
};

// Validated form of a GuardConfig with the clip edges resolved to boundary
// indices. Construct once per coding session; encode/decode are const.
class Safeguard {
 public:
  explicit Safeguard(GuardConfig cfg) : cfg_(std::move(cfg)) {
    const QuantGrid& g = cfg_.grid;
    if (!std::isfinite(cfg_.epsilon) || cfg_.epsilon < 0.0)
      fail(ErrorKind::ConfigRejected, "epsilon must be finite and >= 0");
    g.validate(cfg_.epsilon);
    if (g.domain()) {
      lo_edge_ = g.domain()->lo;
      hi_edge_ = g.domain()->hi;
    }
    if (cfg_.edge_clip) {
      lo_edge_ = edge_index(cfg_.edge_clip->lo);
      if (cfg_.edge_clip->hi) hi_edge_ = edge_index(*cfg_.edge_clip->hi);
    }
    if (lo_edge_ && hi_edge_ && *lo_edge_ >= *hi_edge_)
      fail(ErrorKind::ConfigRejected, "edge clip range is empty");
  }

  const GuardConfig& config() const noexcept { return cfg_; }
  const QuantGrid& grid() const noexcept { return cfg_.grid; }
  double epsilon() const noexcept { return cfg_.epsilon; }
  GuardMode mode() const noexcept { return cfg_.mode; }
  std::optional<BoundaryIndex> lo_edge() const noexcept { return lo_edge_; }
  std::optional<BoundaryIndex> hi_edge() const noexcept { return hi_edge_; }

  double clip(double v) const {
    if (lo_edge_) v = std::max(v, cfg_.grid.boundary(*lo_edge_));
    if (hi_edge_) v = std::min(v, cfg_.grid.boundary(*hi_edge_));
    return cfg_.grid.clip(v);
  }

  // Bin of an already clipped value; the upper clip edge belongs to the
  // last bin below it.
  BinIndex bin_of(double clipped) const {
    BinIndex n = cfg_.grid.quantize(clipped);
    if (hi_edge_ && n >= *hi_edge_) n = *hi_edge_ - 1;
    return n;
  }

  bool in_edge_zone(double clipped) const {
    const double eps = cfg_.epsilon;
    if (lo_edge_ && clipped <= cfg_.grid.boundary(*lo_edge_) + eps) return true;
    if (hi_edge_ && clipped >= cfg_.grid.boundary(*hi_edge_) - eps) return true;
    return false;
  }

  bool is_interior(BoundaryIndex r) const {
    return (!lo_edge_ || r > *lo_edge_) && (!hi_edge_ || r < *hi_edge_) && r > cfg_.grid.first_boundary() &&
           r < cfg_.grid.last_boundary();
  }

  GuardedValue encode(double v) const {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "non-finite critical value");
    const QuantGrid& g = cfg_.grid;
    v = clip(v);
    GuardedValue out;
    if (!in_edge_zone(v)) {
      const BoundaryIndex r = g.round_index(v);
      if (is_interior(r) && std::fabs(g.boundary(r) - v) < cfg_.epsilon) {
        out.flag.risky = true;
        const bool right = g.floor_index(v) == r;  // v sits just above R(v)
        switch (cfg_.mode) {
          case GuardMode::Full:
            out.flag.direction = right;
            out.v_out = g.dequantize(right ? r : r - 1);
            break;
          case GuardMode::LeftMajor: out.v_out = g.dequantize(r - 1); break;
          case GuardMode::RightMajor: out.v_out = g.dequantize(r); break;
          case GuardMode::CenterMajor: out.v_out = g.boundary(r); break;
        }
        return out;
      }
    }
    out.v_out = g.dequantize(bin_of(v));
    return out;
  }

  double decode(double v_prime, const Flag& flag) const {
    if (!std::isfinite(v_prime)) fail(ErrorKind::InvalidInput, "non-finite critical value");
    const QuantGrid& g = cfg_.grid;
    v_prime = clip(v_prime);
    if (!flag.risky) return g.dequantize(bin_of(v_prime));
    const BoundaryIndex r = g.round_index(v_prime);
    if (!is_interior(r)) fail(ErrorKind::MalformedStream, "risky flag set next to a clipped edge");
    switch (cfg_.mode) {
      case GuardMode::Full:
        if (!flag.direction) fail(ErrorKind::MalformedStream, "risky value without a direction flag");
        return g.dequantize(*flag.direction ? r : r - 1);
      case GuardMode::LeftMajor: return g.dequantize(r - 1);
      case GuardMode::RightMajor: return g.dequantize(r);
      case GuardMode::CenterMajor: return g.boundary(r);
    }
    fail(ErrorKind::Internal, "unknown guard mode");
  }

 private:
  BoundaryIndex edge_index(double x) const {
    const QuantGrid& g = cfg_.grid;
    if (!std::isfinite(x)) fail(ErrorKind::ConfigRejected, "edge clip must be finite");
    if (!g.is_uniform() && (x < g.table().front() || x > g.table().back()))
      fail(ErrorKind::ConfigRejected, "edge clip outside the boundary table");
    const BoundaryIndex r = g.round_index(x);
    if (g.boundary(r) != x)
      fail(ErrorKind::ConfigRejected, "edge clip " + std::to_string(x) + " is not a grid boundary");
    if (g.domain() && (r < g.domain()->lo || r > g.domain()->hi))
      fail(ErrorKind::ConfigRejected, "edge clip outside the grid domain");
    return r;
  }

  GuardConfig cfg_;
  std::optional<BoundaryIndex> lo_edge_;
  std::optional<BoundaryIndex> hi_edge_;
};

inline GuardedValue guard_encode(const GuardConfig& cfg, double v) { return Safeguard(cfg).encode(v); }

inline double guard_decode(const GuardConfig& cfg, double v_prime, bool risky, std::optional<bool> direction) {
  return Safeguard(cfg).decode(v_prime, Flag{risky, direction});
}

// Flags of a finished session plus the signaled probability of f_r = 0.
struct FlagStream {
  std::vector<Flag> flags;
  double p0 = 0.5;
  std::uint16_t p0_q16 = 32768;
};

// p0_q16 = clamp(round(p0 * 65536), 1, 65535), computed in integers so the
// value does not depend on floating-point rounding.
inline std::uint16_t quantize_p0(std::uint64_t zeros, std::uint64_t total) {
  if (total == 0) return 32768;
  const std::uint64_t scaled = (zeros * 131072u + total) / (2u * total);
  return static_cast<std::uint16_t>(std::clamp<std::uint64_t>(scaled, 1u, 65535u));
}

inline FlagStream finalize_flags(std::vector<Flag> flags) {
  FlagStream fs;
  std::uint64_t zeros = 0;
  for (const Flag& f : flags) zeros += f.risky ? 0 : 1;
  fs.p0 = flags.empty() ? 0.5 : static_cast<double>(zeros) / static_cast<double>(flags.size());
  fs.p0_q16 = quantize_p0(zeros, flags.size());
  fs.flags = std::move(flags);
  return fs;
}

// Encoder-side session: guards every critical value in order and records
// the flags for the safeguarding bitstream.
class GuardSession {
 public:
  explicit GuardSession(GuardConfig cfg) : guard_(std::move(cfg)) {}

  double protect(double v) {
    GuardedValue gv = guard_.encode(v);
    flags_.push_back(gv.flag);
    return gv.v_out;
  }

  const Safeguard& guard() const noexcept { return guard_; }
  std::size_t size() const noexcept { return flags_.size(); }
  FlagStream finish() { return finalize_flags(std::move(flags_)); }

 private:
  Safeguard guard_;
  std::vector<Flag> flags_;
};

}  // namespace reproguard
