#pragma once

// Scale-hyperprior style latent codec. A fixed synthetic hyper-synthesis
// turns the transmitted hyper-latents z into per-element scales; the scale
// is the critical value, protected against a geometric boundary table, and
// selects the Gaussian CDF used to range-code each integer latent.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "reproguard/container.hpp"
#include "reproguard/entropy.hpp"
#include "reproguard/error.hpp"
#include "reproguard/platform_sim.hpp"
#include "reproguard/quantizer.hpp"
#include "reproguard/safeguard.hpp"

namespace reproguard {

inline constexpr int kLatentClamp = 32;
inline constexpr std::uint16_t kDefaultScaleTableId = 1;
inline constexpr std::uint64_t kAnalysisSeed = 0xA11A1A5Eull;
inline constexpr std::uint64_t kSynthesisSeed = 0x5CA1E5EEDull;

// 64 geometrically spaced boundaries from 0.11 to 256.
inline QuantGrid default_scale_table() {
  constexpr int count = 64;
  const double lo = std::log(0.11), hi = std::log(256.0);
  std::vector<double> b(count);
  for (int k = 0; k < count; ++k) b[static_cast<std::size_t>(k)] = std::exp(lo + k * (hi - lo) / (count - 1));
  b.front() = 0.11;
  b.back() = 256.0;
  return QuantGrid::boundaries(std::move(b), true);
}

inline QuantGrid lookup_boundary_table(std::uint16_t id) {
  if (id == kDefaultScaleTableId) return default_scale_table();
  fail(ErrorKind::ConfigRejected, "unknown boundary table id " + std::to_string(id));
}

// Latent tensors in channel-major raster order: index (c * H + h) * W + w.
// z has the same layout at a quarter of the spatial resolution (rounded up).
struct LatentGrid {
  std::uint32_t height = 1;
  std::uint32_t width = 1;
  std::uint32_t channels = 1;
  std::vector<double> y;
  std::vector<double> z;

  std::uint32_t z_height() const { return (height + 3) / 4; }
  std::uint32_t z_width() const { return (width + 3) / 4; }
  std::size_t y_size() const { return std::size_t{height} * width * channels; }
  std::size_t z_size() const { return std::size_t{z_height()} * z_width() * channels; }
};

namespace detail {

inline void check_dims(std::uint32_t h, std::uint32_t w, std::uint32_t c) {
  if (h == 0 || w == 0 || c == 0) fail(ErrorKind::InvalidInput, "latent dimensions must be >= 1");
  if (std::uint64_t{h} * w * c > (std::uint64_t{1} << 32)) fail(ErrorKind::InvalidInput, "latent tensor too large");
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

}  // namespace detail

// Per-channel true scales used by synth_latents for a given seed.
inline std::vector<double> synth_channel_scales(std::uint32_t channels, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> s(channels);
  for (double& v : s) v = std::exp(rng.uniform(std::log(0.2), std::log(64.0)));
  return s;
}

inline LatentGrid synth_latents(std::uint32_t height, std::uint32_t width, std::uint32_t channels, std::uint64_t seed) {
  detail::check_dims(height, width, channels);
  LatentGrid g;
  g.height = height;
  g.width = width;
  g.channels = channels;
  const std::vector<double> sigma = synth_channel_scales(channels, seed);
  SplitMix64 rng(splitmix64_mix(seed ^ 0x5EEDull));
  g.y.resize(g.y_size());
  for (std::uint32_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < std::size_t{height} * width; ++i) g.y[c * std::size_t{height} * width + i] = sigma[c] * rng.normal();

  // 4x4 average pooling followed by a fixed channel projection.
  const std::uint32_t zh = g.z_height(), zw = g.z_width();
  std::vector<double> pooled(g.z_size(), 0.0);
  for (std::uint32_t c = 0; c < channels; ++c)
    for (std::uint32_t bh = 0; bh < zh; ++bh)
      for (std::uint32_t bw = 0; bw < zw; ++bw) {
        double sum = 0.0;
        int n = 0;
        for (std::uint32_t h = 4 * bh; h < std::min(height, 4 * bh + 4); ++h)
          for (std::uint32_t w = 4 * bw; w < std::min(width, 4 * bw + 4); ++w, ++n)
            sum += g.y[(std::size_t{c} * height + h) * width + w];
        pooled[(std::size_t{c} * zh + bh) * zw + bw] = sum / n;
      }
  SplitMix64 wrng(kAnalysisSeed);
  std::vector<double> proj(std::size_t{channels} * channels);
  const double scale = 1.0 / std::sqrt(static_cast<double>(channels));
  for (double& p : proj) p = wrng.uniform(-1.0, 1.0) * scale;
  g.z.assign(g.z_size(), 0.0);
  const std::size_t plane = std::size_t{zh} * zw;
  for (std::uint32_t k = 0; k < channels; ++k)
    for (std::uint32_t c = 0; c < channels; ++c) {
      const double w = proj[std::size_t{k} * channels + c];
      for (std::size_t i = 0; i < plane; ++i) g.z[k * plane + i] += w * pooled[c * plane + i];
    }
  return g;
}

// Fixed weights of the synthetic hyper-synthesis.
struct HyperSynthesis {
  std::uint32_t channels = 1;
  std::vector<double> mix;       // channels x channels
  std::vector<double> bias;      // channels
  std::vector<double> position;  // channels x 16, indexed by (h % 4) * 4 + w % 4

  static HyperSynthesis make(std::uint32_t channels, std::uint64_t seed = kSynthesisSeed) {
    HyperSynthesis hs;
    hs.channels = channels;
    SplitMix64 rng(seed);
    const double scale = 0.1 / std::sqrt(static_cast<double>(channels));
    hs.mix.resize(std::size_t{channels} * channels);
    for (double& m : hs.mix) m = rng.uniform(-1.0, 1.0) * scale;
    hs.bias.resize(channels);
    for (double& b : hs.bias) b = rng.uniform(-1.5, 0.5);
    hs.position.resize(std::size_t{channels} * 16);
    for (double& p : hs.position) p = rng.uniform(-0.3, 0.3);
    return hs;
  }
};

// sigma = max(0, softplus(A z + c)) per latent element, z upsampled by
// nearest neighbour. Output has the layout of y.
inline std::vector<double> hyper_synthesis(const LatentGrid& dims, std::span<const double> z,
                                           std::uint64_t seed = kSynthesisSeed) {
  detail::check_dims(dims.height, dims.width, dims.channels);
  if (z.size() != dims.z_size()) fail(ErrorKind::InvalidInput, "hyper-latent size does not match dimensions");
  for (double v : z)
    if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "non-finite hyper-latent");
  const HyperSynthesis hs = HyperSynthesis::make(dims.channels, seed);
  const std::uint32_t H = dims.height, W = dims.width, C = dims.channels;
  const std::uint32_t zh = dims.z_height(), zw = dims.z_width();
  const std::size_t plane = std::size_t{zh} * zw;
  std::vector<double> mixed(std::size_t{C} * plane, 0.0);
  for (std::uint32_t c = 0; c < C; ++c)
    for (std::uint32_t k = 0; k < C; ++k) {
      const double a = hs.mix[std::size_t{c} * C + k];
      for (std::size_t i = 0; i < plane; ++i) mixed[c * plane + i] += a * z[k * plane + i];
    }
  std::vector<double> sigma(std::size_t{H} * W * C);
  for (std::uint32_t c = 0; c < C; ++c)
    for (std::uint32_t h = 0; h < H; ++h)
      for (std::uint32_t w = 0; w < W; ++w) {
        const double pre = mixed[(std::size_t{c} * zh + h / 4) * zw + w / 4] + hs.bias[c] +
                           hs.position[std::size_t{c} * 16 + (h % 4) * 4 + w % 4];
        sigma[(std::size_t{c} * H + h) * W + w] = std::max(0.0, detail::softplus(pre));
      }
  return sigma;
}

inline int quantize_latent(double y) {
  return static_cast<int>(std::clamp(std::round(y), -static_cast<double>(kLatentClamp), static_cast<double>(kLatentClamp)));
}

inline std::vector<int> quantize_latents(std::span<const double> y) {
  std::vector<int> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = quantize_latent(y[i]);
  return out;
}

// Safeguard configuration for scales: boundary table, clip edges at its
// outermost boundaries.
inline GuardConfig hyperprior_guard_config(double epsilon, GuardMode mode = GuardMode::CenterMajor,
                                           std::uint16_t table_id = kDefaultScaleTableId) {
  QuantGrid table = lookup_boundary_table(table_id);
  const double lo = table.table().front();
  return GuardConfig{std::move(table), epsilon, mode, EdgeClip{lo, std::nullopt}};
}

namespace detail {

// Gaussian tables for every bin of the scale grid, built on first use.
class ScaleTables {
 public:
  explicit ScaleTables(const QuantGrid& grid) : grid_(grid) {}
  const CdfTable& get(BinIndex bin) {
    auto it = cache_.find(bin);
    if (it == cache_.end()) it = cache_.emplace(bin, gaussian_cdf_table(grid_.dequantize(bin), kLatentClamp)).first;
    return it->second;
  }

 private:
  const QuantGrid& grid_;
  std::map<BinIndex, CdfTable> cache_;
};

}  // namespace detail

struct HyperpriorOptions {
  bool protect = true;
  std::uint16_t table_id = kDefaultScaleTableId;
  std::uint64_t synthesis_seed = kSynthesisSeed;
};

inline GuardedStream encode_hyperprior(const LatentGrid& lat, const GuardConfig& cfg,
                                       const HyperpriorOptions& opt = {}) {
  detail::check_dims(lat.height, lat.width, lat.channels);
  if (lat.y.size() != lat.y_size() || lat.z.size() != lat.z_size())
    fail(ErrorKind::InvalidInput, "latent tensors do not match dimensions");
  if (cfg.grid != lookup_boundary_table(opt.table_id))
    fail(ErrorKind::ConfigRejected, "guard grid is not the registered scale table");
  GuardSession session(cfg);
  const Safeguard& guard = session.guard();
  const std::vector<double> sigma = hyper_synthesis(lat, lat.z, opt.synthesis_seed);
  detail::ScaleTables tables(cfg.grid);
  RangeEncoder enc;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double v = opt.protect ? session.protect(sigma[i]) : guard.clip(sigma[i]);
    const BinIndex bin = guard.bin_of(v);
    enc.encode_symbol(tables.get(bin), quantize_latent(lat.y[i]));
  }
  GuardedStream s;
  s.mode = cfg.mode;
  s.is_protected = opt.protect;
  s.epsilon = cfg.epsilon;
  s.grid = GridDesc{QuantGrid::Kind::Boundaries, 1.0, 0.0, opt.table_id};
  s.payload = HyperpriorHeader{lat.height, lat.width, lat.channels, opt.table_id, lat.z};
  if (opt.protect) {
    s.flag_count = static_cast<std::uint32_t>(session.size());
    FlagStream fs = session.finish();
    s.p0_q16 = fs.p0_q16;
    s.safeguard = encode_flags(fs, cfg.mode);
  }
  s.main = enc.finish();
  return s;
}

struct DecodedLatents {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<int> y_hat;
};

inline DecodedLatents decode_hyperprior(const GuardedStream& s, const Perturbation& perturbation = {},
                                        std::uint64_t synthesis_seed = kSynthesisSeed) {
  if (s.payload_kind() != PayloadKind::Hyperprior) fail(ErrorKind::MalformedStream, "not a hyperprior payload");
  const auto& hdr = std::get<HyperpriorHeader>(s.payload);
  if (s.grid.kind != QuantGrid::Kind::Boundaries || s.grid.table_id != hdr.scale_table_id)
    fail(ErrorKind::MalformedStream, "hyperprior stream needs its scale table as the guard grid");
  if (!s.is_protected && (s.flag_count != 0 || !s.safeguard.empty()))
    fail(ErrorKind::MalformedStream, "unprotected stream carries flags");
  std::optional<Safeguard> guard;
  try {
    guard.emplace(hyperprior_guard_config(s.epsilon, s.mode, hdr.scale_table_id));
  } catch (const Error& e) {
    fail(ErrorKind::MalformedStream, std::string("stream configuration rejected: ") + e.what());
  }
  LatentGrid dims;
  dims.height = hdr.height;
  dims.width = hdr.width;
  dims.channels = hdr.channels;
  std::vector<double> sigma;
  try {
    sigma = hyper_synthesis(dims, hdr.z, synthesis_seed);
  } catch (const Error& e) {
    fail(ErrorKind::MalformedStream, e.what());
  }
  const QuantGrid& grid = guard->grid();
  detail::ScaleTables tables(grid);
  FlagReader flags(s.safeguard, s.flag_count, s.p0_q16, s.mode);
  RangeDecoder dec(s.main);
  PlatformSim platform(perturbation);
  DecodedLatents out{hdr.height, hdr.width, hdr.channels, std::vector<int>(sigma.size())};
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double v_prime = guard->clip(platform(sigma[i], grid));
    const double v = s.is_protected ? guard->decode(v_prime, flags.next()) : v_prime;
    out.y_hat[i] = dec.decode_symbol(tables.get(guard->bin_of(v)));
  }
  flags.finish();
  if (!dec.exhausted()) fail(ErrorKind::MalformedStream, "trailing bytes in main stream");
  return out;
}

// Ideal code length in bits of the quantized latents under the scale
// indices the encoder selects (no perturbation).
inline double latent_model_bits(const LatentGrid& lat, const GuardConfig& cfg, const HyperpriorOptions& opt = {}) {
  GuardSession session(cfg);
  const std::vector<double> sigma = hyper_synthesis(lat, lat.z, opt.synthesis_seed);
  detail::ScaleTables tables(cfg.grid);
  double bits = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double v = opt.protect ? session.protect(sigma[i]) : session.guard().clip(sigma[i]);
    const CdfTable& t = tables.get(session.guard().bin_of(v));
    bits -= std::log2(t.freq(quantize_latent(lat.y[i])) / 65536.0);
  }
  return bits;
}

}  // namespace reproguard
