#pragma once

// Lossless octree occupancy codec for voxelized point clouds. Each level
// is coded in eight octant passes; the occupancy probability of every
// child comes from a deterministic predictor whose output is the critical
// value protected by the safeguard.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "reproguard/container.hpp"
#include "reproguard/entropy.hpp"
#include "reproguard/error.hpp"
#include "reproguard/platform_sim.hpp"
#include "reproguard/quantizer.hpp"
#include "reproguard/safeguard.hpp"

namespace reproguard {

inline constexpr int kMaxBitDepth = 21;

using Voxel = std::array<std::uint32_t, 3>;

namespace morton {

inline std::uint64_t spread(std::uint32_t v) {
  std::uint64_t x = v & 0x1FFFFFu;
  x = (x | x << 32) & 0x1F00000000FFFFull;
  x = (x | x << 16) & 0x1F0000FF0000FFull;
  x = (x | x << 8) & 0x100F00F00F00F00Full;
  x = (x | x << 4) & 0x10C30C30C30C30C3ull;
  x = (x | x << 2) & 0x1249249249249249ull;
  return x;
}

inline std::uint32_t compact(std::uint64_t x) {
  x &= 0x1249249249249249ull;
  x = (x ^ (x >> 2)) & 0x10C30C30C30C30C3ull;
  x = (x ^ (x >> 4)) & 0x100F00F00F00F00Full;
  x = (x ^ (x >> 8)) & 0x1F0000FF0000FFull;
  x = (x ^ (x >> 16)) & 0x1F00000000FFFFull;
  x = (x ^ (x >> 32)) & 0x1FFFFFull;
  return static_cast<std::uint32_t>(x);
}

// Octant bits are (x, y, z) from most to least significant.
inline std::uint64_t encode(const Voxel& v) { return spread(v[0]) << 2 | spread(v[1]) << 1 | spread(v[2]); }
inline Voxel decode(std::uint64_t c) { return {compact(c >> 2), compact(c >> 1), compact(c)}; }

}  // namespace morton

// Deduplicated voxel set in Morton order.
class VoxelCloud {
 public:
  VoxelCloud() = default;

  static VoxelCloud from_voxels(int bit_depth, const std::vector<Voxel>& voxels) {
    check_depth(bit_depth);
    VoxelCloud c;
    c.bit_depth_ = bit_depth;
    c.codes_.reserve(voxels.size());
    const std::uint64_t limit = std::uint64_t{1} << bit_depth;
    for (const Voxel& v : voxels) {
      for (std::uint32_t x : v)
        if (x >= limit) fail(ErrorKind::InvalidInput, "voxel coordinate outside [0, 2^n)");
      c.codes_.push_back(morton::encode(v));
    }
    c.normalize();
    return c;
  }

  static VoxelCloud from_codes(int bit_depth, std::vector<std::uint64_t> codes) {
    check_depth(bit_depth);
    VoxelCloud c;
    c.bit_depth_ = bit_depth;
    const std::uint64_t limit = std::uint64_t{1} << (3 * bit_depth);
    for (std::uint64_t code : codes)
      if (code >= limit) fail(ErrorKind::InvalidInput, "Morton code outside [0, 2^3n)");
    c.codes_ = std::move(codes);
    c.normalize();
    return c;
  }

  int bit_depth() const noexcept { return bit_depth_; }
  std::size_t size() const noexcept { return codes_.size(); }
  bool empty() const noexcept { return codes_.empty(); }
  const std::vector<std::uint64_t>& codes() const noexcept { return codes_; }
  Voxel voxel(std::size_t i) const { return morton::decode(codes_[i]); }

  std::vector<Voxel> voxels() const {
    std::vector<Voxel> out;
    out.reserve(codes_.size());
    for (std::uint64_t c : codes_) out.push_back(morton::decode(c));
    return out;
  }

  bool operator==(const VoxelCloud&) const = default;

 private:
  static void check_depth(int n) {
    if (n < 1 || n > kMaxBitDepth) fail(ErrorKind::InvalidInput, "bit depth must be in [1, 21]");
  }
  void normalize() {
    std::sort(codes_.begin(), codes_.end());
    codes_.erase(std::unique(codes_.begin(), codes_.end()), codes_.end());
  }

  int bit_depth_ = 1;
  std::vector<std::uint64_t> codes_;
};

// Min-max normalizes with one scale for all axes (aspect preserved) onto
// [0, 2^n - 1], then rounds.
inline VoxelCloud voxelize(const std::vector<std::array<double, 3>>& points, int bit_depth) {
  if (points.empty()) fail(ErrorKind::InvalidInput, "cannot voxelize an empty point set");
  if (bit_depth < 1 || bit_depth > kMaxBitDepth) fail(ErrorKind::InvalidInput, "bit depth must be in [1, 21]");
  std::array<double, 3> lo{INFINITY, INFINITY, INFINITY};
  std::array<double, 3> hi{-INFINITY, -INFINITY, -INFINITY};
  for (const auto& p : points) {
    for (int a = 0; a < 3; ++a) {
      if (!std::isfinite(p[a])) fail(ErrorKind::InvalidInput, "non-finite point coordinate");
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  const double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  const double top = static_cast<double>((std::uint64_t{1} << bit_depth) - 1);
  const double scale = extent > 0.0 ? top / extent : 0.0;
  std::vector<Voxel> voxels;
  voxels.reserve(points.size());
  for (const auto& p : points) {
    Voxel v;
    for (int a = 0; a < 3; ++a)
      v[a] = static_cast<std::uint32_t>(std::clamp(std::llround((p[a] - lo[a]) * scale), 0LL,
                                                   static_cast<long long>(top)));
    voxels.push_back(v);
  }
  return VoxelCloud::from_voxels(bit_depth, voxels);
}

// Causal context of one child occupancy bit.
struct OctreeContext {
  int depth = 1;             // level of the child, 1..n
  int bit_depth = 1;         // n
  int octant = 0;            // 0..7
  int coded_siblings = 0;    // occupied children of the same parent coded in earlier passes, 0..7
  int parent_siblings = 0;   // occupied children of the grandparent, 0..8 (0 at the first level)
  int neighbors = 0;         // occupied parent-level face neighbours on the child's outward sides, 0..3
  std::array<double, 3> position{0.5, 0.5, 0.5};  // parent center normalized to (0, 1)

  bool operator==(const OctreeContext&) const = default;
};

namespace detail {

inline constexpr std::size_t kPredictorFeatures = 9;

inline std::array<double, kPredictorFeatures> predictor_features(const OctreeContext& ctx) {
  double r2 = 0.0;
  for (double x : ctx.position) r2 += (x - 0.5) * (x - 0.5);
  return {
      static_cast<double>(ctx.depth) / ctx.bit_depth,
      ctx.octant / 7.0,
      ctx.coded_siblings / 7.0,
      ctx.parent_siblings / 8.0,
      ctx.neighbors / 3.0,
      ctx.octant > 0 ? static_cast<double>(ctx.coded_siblings) / ctx.octant : 0.5,
      ctx.octant == 7 && ctx.coded_siblings == 0 ? 1.0 : 0.0,
      2.0 * std::sqrt(r2),
      ctx.depth == ctx.bit_depth ? 1.0 : 0.0,
  };
}

// Fitted offline on synthetic dense and sparse clouds, then frozen.
inline constexpr std::array<double, kPredictorFeatures> kPredictorWeights{
    -2.969561, 0.075373, -2.645734, -0.216753, 2.139836, -0.411609, 9.485475, -0.459039, 0.409224};
inline constexpr double kPredictorBias = 0.953663;

}  // namespace detail

// Fixed-weight logistic occupancy model: P(child occupied | context).
inline double predict(const OctreeContext& ctx) {
  const auto f = detail::predictor_features(ctx);
  double z = detail::kPredictorBias;
  for (std::size_t i = 0; i < f.size(); ++i) z += detail::kPredictorWeights[i] * f[i];
  const double p = 1.0 / (1.0 + std::exp(-z));
  return std::clamp(p, 0.0, 1.0);
}

// One coded occupancy bit, reported to an optional observer.
struct OctreeTraceEntry {
  int level = 0;
  int octant = 0;
  std::size_t parent = 0;
  OctreeContext context;
  double probability = 0.0;  // clipped predictor output on this side
  double coded_probability = 0.0;
  bool bit = false;
};

using OctreeTrace = std::function<void(const OctreeTraceEntry&)>;

struct OctreeOptions {
  bool protect = true;
  // Unprotected streams only: quantize probabilities to bin centers without
  // emitting flags. Isolates the main-stream effect of quantization.
  bool prequantize = false;
  OctreeTrace trace;
};

// Safeguard configuration for probabilities: q = 1/k, s = 0, domain and
// clip edges at 0 and 1.
inline GuardConfig octree_guard_config(std::uint32_t k, double epsilon, GuardMode mode = GuardMode::CenterMajor) {
  if (k == 0) fail(ErrorKind::ConfigRejected, "k must be >= 1");
  GuardConfig cfg{QuantGrid::uniform(1.0 / k, 0.0, 0.0, 1.0), epsilon, mode, EdgeClip{0.0, 1.0}};
  return cfg;
}

namespace detail {

inline std::uint32_t step_to_k(double q) {
  if (!std::isfinite(q) || !(q > 0.0) || q > 1.0) fail(ErrorKind::ConfigRejected, "probability grid needs 0 < q <= 1");
  const double kd = std::nearbyint(1.0 / q);
  if (kd < 1.0 || kd > 1e9 || 1.0 / kd != q) fail(ErrorKind::ConfigRejected, "probability grid step must be 1/k");
  return static_cast<std::uint32_t>(kd);
}

inline void check_octree_config(const GuardConfig& cfg) {
  const QuantGrid& g = cfg.grid;
  if (!g.is_uniform() || g.s() != 0.0) fail(ErrorKind::ConfigRejected, "octree grid must be uniform with s = 0");
  step_to_k(g.q());
  if (!g.domain() || g.domain_lo() != 0.0 || g.domain_hi() != 1.0)
    fail(ErrorKind::ConfigRejected, "octree grid domain must be [0, 1]");
}

// Walks the octree level by level; `code_bit` codes (or decodes) the
// occupancy bit of one child given its context and returns it.
struct OctreeWalker {
  OctreeWalker(int bit_depth, std::uint64_t node_limit) : n(bit_depth), max_nodes(node_limit) {}

  int n;
  std::uint64_t max_nodes;

  template <class CodeBit, class Level>
  void run(CodeBit&& code_bit, Level&& level_codes) {
    std::vector<std::uint64_t> parents{0};
    std::vector<std::uint8_t> parent_family{0};  // occupancy byte of each parent's parent
    for (int d = 1; d <= n; ++d) {
      const std::size_t np = parents.size();
      const double cells = static_cast<double>(std::uint64_t{1} << (d - 1));
      std::vector<std::uint8_t> neigh(np);
      for (std::size_t i = 0; i < np; ++i) {
        const Voxel c = morton::decode(parents[i]);
        std::uint8_t mask = 0;
        for (int a = 0; a < 3; ++a) {
          for (int dir = 0; dir < 2; ++dir) {
            Voxel nb = c;
            if (dir == 0) {
              if (nb[a] == 0) continue;
              --nb[a];
            } else {
              if (nb[a] + 1 >= static_cast<std::uint64_t>(cells)) continue;
              ++nb[a];
            }
            if (std::binary_search(parents.begin(), parents.end(), morton::encode(nb)))
              mask |= static_cast<std::uint8_t>(1u << (2 * a + dir));
          }
        }
        neigh[i] = mask;
      }
      std::vector<std::uint8_t> occ = level_codes(d, parents);
      for (int o = 0; o < 8; ++o) {
        const int ox = (o >> 2) & 1, oy = (o >> 1) & 1, oz = o & 1;
        const std::uint8_t outward =
            static_cast<std::uint8_t>(1u << (0 + ox) | 1u << (2 + oy) | 1u << (4 + oz));
        for (std::size_t i = 0; i < np; ++i) {
          const Voxel c = morton::decode(parents[i]);
          OctreeContext ctx;
          ctx.depth = d;
          ctx.bit_depth = n;
          ctx.octant = o;
          ctx.coded_siblings = std::popcount(static_cast<unsigned>(occ[i] & ((1u << o) - 1u)));
          ctx.parent_siblings = std::popcount(static_cast<unsigned>(parent_family[i]));
          ctx.neighbors = std::popcount(static_cast<unsigned>(neigh[i] & outward));
          for (int a = 0; a < 3; ++a) ctx.position[a] = (c[a] + 0.5) / cells;
          const bool bit = code_bit(ctx, d, o, i, occ);
          if (bit) occ[i] = static_cast<std::uint8_t>(occ[i] | (1u << o));
        }
      }
      std::vector<std::uint64_t> next;
      std::vector<std::uint8_t> family;
      for (std::size_t i = 0; i < np; ++i) {
        if (occ[i] == 0) fail(ErrorKind::MalformedStream, "occupied node without children");
        for (int o = 0; o < 8; ++o) {
          if (occ[i] & (1u << o)) {
            next.push_back(parents[i] << 3 | static_cast<std::uint64_t>(o));
            family.push_back(occ[i]);
          }
        }
        if (next.size() > max_nodes) fail(ErrorKind::MalformedStream, "octree level larger than the point count");
      }
      parents = std::move(next);
      parent_family = std::move(family);
    }
    final_codes = std::move(parents);
  }

  std::vector<std::uint64_t> final_codes;
};

}  // namespace detail

inline GuardedStream encode_octree(const VoxelCloud& cloud, const GuardConfig& cfg, const OctreeOptions& opt = {}) {
  if (cloud.empty()) fail(ErrorKind::InvalidInput, "cannot encode an empty cloud");
  detail::check_octree_config(cfg);
  GuardSession session(cfg);
  const Safeguard& guard = session.guard();
  const int n = cloud.bit_depth();
  const auto& codes = cloud.codes();
  RangeEncoder enc;

  detail::OctreeWalker walker{n, cloud.size()};
  std::vector<std::uint8_t> truth;
  // Occupancy bytes of level d straight from the input, for the encoder.
  auto level_occupancy = [&](int d, const std::vector<std::uint64_t>& parents) {
    const int shift = 3 * (n - d);
    truth.assign(parents.size(), 0);
    std::size_t j = 0;
    for (std::uint64_t c : codes) {
      const std::uint64_t node = c >> shift;
      const std::uint64_t parent = node >> 3;
      while (parents[j] < parent) ++j;
      truth[j] = static_cast<std::uint8_t>(truth[j] | (1u << (node & 7u)));
    }
    return std::vector<std::uint8_t>(parents.size(), 0);
  };
  auto code_bit = [&](const OctreeContext& ctx, int d, int o, std::size_t i, const std::vector<std::uint8_t>&) {
    const bool bit = (truth[i] >> o) & 1u;
    const double p = predict(ctx);
    double coded = p;
    if (opt.protect) {
      coded = session.protect(p);
    } else if (opt.prequantize) {
      const double c = guard.clip(p);
      coded = guard.grid().dequantize(guard.bin_of(c));
    }
    enc.encode_bit(bit, prob_to_p16(coded));
    if (opt.trace) opt.trace(OctreeTraceEntry{d, o, i, ctx, p, coded, bit});
    return bit;
  };
  walker.run(code_bit, level_occupancy);

  GuardedStream s;
  s.mode = cfg.mode;
  s.is_protected = opt.protect;
  s.epsilon = cfg.epsilon;
  s.grid = GridDesc{QuantGrid::Kind::Uniform, cfg.grid.q(), 0.0, 0};
  s.payload = OctreeHeader{static_cast<std::uint8_t>(n), cloud.size()};
  if (opt.protect) {
    if (session.size() > 0xFFFFFFFFu) fail(ErrorKind::LengthOverflow, "too many flags for one stream");
    s.flag_count = static_cast<std::uint32_t>(session.size());
    FlagStream fs = session.finish();
    s.p0_q16 = fs.p0_q16;
    s.safeguard = encode_flags(fs, cfg.mode);
  }
  s.main = enc.finish();
  return s;
}

// Guard configuration implied by an octree stream header.
inline GuardConfig octree_config_from_stream(const GuardedStream& s) {
  if (s.payload_kind() != PayloadKind::Octree) fail(ErrorKind::MalformedStream, "not an octree payload");
  if (s.grid.kind != QuantGrid::Kind::Uniform || s.grid.s != 0.0)
    fail(ErrorKind::MalformedStream, "octree stream needs a uniform grid with s = 0");
  std::uint32_t k = 0;
  try {
    k = detail::step_to_k(s.grid.q);
  } catch (const Error& e) {
    fail(ErrorKind::MalformedStream, e.what());
  }
  return octree_guard_config(k, s.epsilon, s.mode);
}

inline VoxelCloud decode_octree(const GuardedStream& s, const Perturbation& perturbation = {},
                                const OctreeTrace& trace = {}) {
  const GuardConfig cfg = octree_config_from_stream(s);
  const auto& hdr = std::get<OctreeHeader>(s.payload);
  if (hdr.point_count == 0) fail(ErrorKind::MalformedStream, "octree stream with zero points");
  if (!s.is_protected && (s.flag_count != 0 || !s.safeguard.empty()))
    fail(ErrorKind::MalformedStream, "unprotected stream carries flags");
  std::optional<Safeguard> guard;
  try {
    guard.emplace(cfg);
  } catch (const Error& e) {
    fail(ErrorKind::MalformedStream, std::string("stream configuration rejected: ") + e.what());
  }
  const int n = hdr.bit_depth;
  FlagReader flags(s.safeguard, s.flag_count, s.p0_q16, s.mode);
  RangeDecoder dec(s.main);
  PlatformSim platform(perturbation);

  detail::OctreeWalker walker{n, hdr.point_count};
  auto level_occupancy = [](int, const std::vector<std::uint64_t>& parents) {
    return std::vector<std::uint8_t>(parents.size(), 0);
  };
  auto code_bit = [&](const OctreeContext& ctx, int d, int o, std::size_t i, const std::vector<std::uint8_t>&) {
    const double p = guard->clip(platform(predict(ctx), cfg.grid));
    double coded = p;
    if (s.is_protected) coded = guard->decode(p, flags.next());
    const bool bit = dec.decode_bit(prob_to_p16(coded));
    if (trace) trace(OctreeTraceEntry{d, o, i, ctx, p, coded, bit});
    return bit;
  };
  walker.run(code_bit, level_occupancy);
  if (walker.final_codes.size() != hdr.point_count)
    fail(ErrorKind::MalformedStream, "decoded voxel count differs from the header");
  flags.finish();
  if (!dec.exhausted()) fail(ErrorKind::MalformedStream, "trailing bytes in main stream");
  return VoxelCloud::from_codes(n, std::move(walker.final_codes));
}

enum class CloudKind { Dense, Sparse };

// Seeded synthetic clouds. Dense: points on a smoothly deformed sphere,
// strongly correlated occupancy. Sparse: uniform random voxels.
inline VoxelCloud synth_cloud(CloudKind kind, int bit_depth, std::size_t count, std::uint64_t seed) {
  if (count == 0) fail(ErrorKind::InvalidInput, "count must be >= 1");
  if (bit_depth < 1 || bit_depth > kMaxBitDepth) fail(ErrorKind::InvalidInput, "bit depth must be in [1, 21]");
  SplitMix64 rng(seed);
  const std::uint64_t side = std::uint64_t{1} << bit_depth;
  std::vector<Voxel> voxels;
  voxels.reserve(count);
  if (kind == CloudKind::Sparse) {
    for (std::size_t i = 0; i < count; ++i)
      voxels.push_back({static_cast<std::uint32_t>(rng.next() % side), static_cast<std::uint32_t>(rng.next() % side),
                        static_cast<std::uint32_t>(rng.next() % side)});
    return VoxelCloud::from_voxels(bit_depth, voxels);
  }
  const double a1 = rng.uniform(0.05, 0.2), a2 = rng.uniform(0.05, 0.15);
  const double f1 = std::floor(rng.uniform(2.0, 5.0)), f2 = std::floor(rng.uniform(2.0, 5.0));
  const double ph1 = rng.uniform(0.0, 6.283185307179586), ph2 = rng.uniform(0.0, 6.283185307179586);
  const double center = (static_cast<double>(side) - 1.0) / 2.0;
  const double radius = 0.38 * static_cast<double>(side);
  for (std::size_t i = 0; i < count; ++i) {
    double x = rng.normal(), y = rng.normal(), z = rng.normal();
    const double len = std::sqrt(x * x + y * y + z * z);
    if (len == 0.0) continue;
    x /= len;
    y /= len;
    z /= len;
    const double theta = std::acos(std::clamp(z, -1.0, 1.0));
    const double phi = std::atan2(y, x);
    const double r = radius * (1.0 + a1 * std::sin(f1 * theta + ph1) * std::cos(f2 * phi + ph2) +
                               a2 * std::cos(2.0 * theta + ph2));
    Voxel v;
    const std::array<double, 3> dir{x, y, z};
    for (int a = 0; a < 3; ++a)
      v[a] = static_cast<std::uint32_t>(
          std::clamp(std::llround(center + r * dir[a]), 0LL, static_cast<long long>(side - 1)));
    voxels.push_back(v);
  }
  return VoxelCloud::from_voxels(bit_depth, voxels);
}

// Mean number of occupied children per occupied internal node.
inline double mean_children_per_node(const VoxelCloud& cloud) {
  const auto& codes = cloud.codes();
  std::size_t children = 0, nodes = 0;
  for (int d = 1; d <= cloud.bit_depth(); ++d) {
    const int shift = 3 * (cloud.bit_depth() - d);
    std::size_t level = 0, parents = 0;
    std::uint64_t last = ~0ull, last_parent = ~0ull;
    for (std::uint64_t c : codes) {
      const std::uint64_t node = c >> shift;
      if (node != last) {
        ++level;
        last = node;
        if ((node >> 3) != last_parent) {
          ++parents;
          last_parent = node >> 3;
        }
      }
    }
    children += level;
    nodes += parents;
  }
  return nodes == 0 ? 0.0 : static_cast<double>(children) / static_cast<double>(nodes);
}

}  // namespace reproguard
