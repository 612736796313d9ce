#pragma once

// .rgd container: one guarded compressed object.
//
//   offset  size  field
//   0       4     magic "RGRD"
//   4       1     version (1)
//   5       1     mode: bits 0-1 guard mode, bit 7 set = unprotected stream
//   6       1     payload kind (0 octree, 1 hyperprior latents, 2 raw values)
//   7       8     epsilon, IEEE-754 binary64
//   15      1     grid kind (0 uniform, 1 boundary table)
//   16      16|2  uniform: q, s as binary64 | table: table id u16
//   ..      2     p0_q16
//   ..      4     flag count
//   ..      4     safeguard length
//   ..      4     main length
//   ..      var   payload header (see PayloadHeader below)
//   ..      var   safeguard bytes, then main bytes
//
// All integers and doubles are big-endian.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "reproguard/error.hpp"
#include "reproguard/safeguard.hpp"

namespace reproguard {

inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::uint8_t kUnprotectedBit = 0x80;

enum class PayloadKind : std::uint8_t { Octree = 0, Hyperprior = 1, RawValues = 2 };

struct GridDesc {
  QuantGrid::Kind kind = QuantGrid::Kind::Uniform;
  double q = 1.0;
  double s = 0.0;
  std::uint16_t table_id = 0;

  bool operator==(const GridDesc& o) const {
    if (kind != o.kind) return false;
    if (kind == QuantGrid::Kind::Uniform)
      return std::bit_cast<std::uint64_t>(q) == std::bit_cast<std::uint64_t>(o.q) &&
             std::bit_cast<std::uint64_t>(s) == std::bit_cast<std::uint64_t>(o.s);
    return table_id == o.table_id;
  }
};

struct OctreeHeader {
  std::uint8_t bit_depth = 1;
  std::uint64_t point_count = 0;
  bool operator==(const OctreeHeader&) const = default;
};

// z (hyper-latents) travels losslessly as raw doubles right after the
// fixed hyperprior fields; its length follows from the dimensions.
struct HyperpriorHeader {
  std::uint32_t height = 1;
  std::uint32_t width = 1;
  std::uint32_t channels = 1;
  std::uint16_t scale_table_id = 1;
  std::vector<double> z;

  static std::uint64_t z_count(std::uint64_t h, std::uint64_t w, std::uint64_t c) {
    return ((h + 3) / 4) * ((w + 3) / 4) * c;
  }

  bool operator==(const HyperpriorHeader& o) const {
    if (height != o.height || width != o.width || channels != o.channels || scale_table_id != o.scale_table_id ||
        z.size() != o.z.size())
      return false;
    return std::memcmp(z.data(), o.z.data(), z.size() * sizeof(double)) == 0;
  }
};

struct RawHeader {
  std::uint64_t value_count = 0;
  bool operator==(const RawHeader&) const = default;
};

using PayloadHeader = std::variant<OctreeHeader, HyperpriorHeader, RawHeader>;

struct GuardedStream {
  GuardMode mode = GuardMode::CenterMajor;
  bool is_protected = true;
  double epsilon = 1e-6;
  GridDesc grid;
  std::uint16_t p0_q16 = 32768;
  std::uint32_t flag_count = 0;
  PayloadHeader payload = RawHeader{};
  std::vector<std::uint8_t> safeguard;
  std::vector<std::uint8_t> main;

  PayloadKind payload_kind() const { return static_cast<PayloadKind>(payload.index()); }

  bool operator==(const GuardedStream& o) const {
    return mode == o.mode && is_protected == o.is_protected &&
           std::bit_cast<std::uint64_t>(epsilon) == std::bit_cast<std::uint64_t>(o.epsilon) && grid == o.grid &&
           p0_q16 == o.p0_q16 && flag_count == o.flag_count && payload == o.payload && safeguard == o.safeguard &&
           main == o.main;
  }
};

// Bytes of the safeguarding side information: the flag stream plus the
// header fields that exist only for it (p0_q16, flag count).
inline std::size_t guard_bytes(const GuardedStream& s) { return s.safeguard.size() + 2 + 4; }

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { be(v, 2); }
  void u32(std::uint32_t v) { be(v, 4); }
  void u64(std::uint64_t v) { be(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void be(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(be(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(be(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(be(4)); }
  std::uint64_t u64() { return be(8); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::span<const std::uint8_t> bytes(std::uint64_t n, const char* what) {
    if (n > remaining()) fail(ErrorKind::TruncatedStream, std::string(what) + " length exceeds remaining bytes");
    auto s = in_.subspan(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
  }

  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  std::uint64_t be(std::size_t n) {
    if (n > remaining()) fail(ErrorKind::TruncatedStream, "header truncated");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += n;
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline void check_fields(const GuardedStream& s) {
  if (!std::isfinite(s.epsilon) || !(s.epsilon > 0.0)) fail(ErrorKind::MalformedStream, "epsilon must be > 0");
  if (s.p0_q16 == 0) fail(ErrorKind::MalformedStream, "p0_q16 must be nonzero");
  if (static_cast<std::uint8_t>(s.mode) > 3) fail(ErrorKind::MalformedStream, "unknown guard mode");
  if (s.grid.kind == QuantGrid::Kind::Uniform) {
    if (!std::isfinite(s.grid.q) || !(s.grid.q > 0.0)) fail(ErrorKind::MalformedStream, "grid q must be > 0");
    if (!std::isfinite(s.grid.s) || s.grid.s < 0.0 || s.grid.s >= 1.0)
      fail(ErrorKind::MalformedStream, "grid s must be in [0, 1)");
  } else if (s.grid.kind != QuantGrid::Kind::Boundaries) {
    fail(ErrorKind::MalformedStream, "unknown grid kind");
  }
  if (auto* h = std::get_if<OctreeHeader>(&s.payload)) {
    if (h->bit_depth < 1 || h->bit_depth > 21) fail(ErrorKind::MalformedStream, "octree bit depth out of [1, 21]");
  }
  if (auto* h = std::get_if<HyperpriorHeader>(&s.payload)) {
    if (h->height == 0 || h->width == 0 || h->channels == 0)
      fail(ErrorKind::MalformedStream, "hyperprior dimensions must be >= 1");
    if (h->z.size() != HyperpriorHeader::z_count(h->height, h->width, h->channels))
      fail(ErrorKind::MalformedStream, "hyper-latent count does not match dimensions");
  }
  if (s.safeguard.size() > 0xFFFFFFFFu || s.main.size() > 0xFFFFFFFFu)
    fail(ErrorKind::LengthOverflow, "stream section longer than 2^32 - 1 bytes");
}

}  // namespace detail

inline std::vector<std::uint8_t> write_container(const GuardedStream& s) {
  try {
    detail::check_fields(s);
  } catch (const Error& e) {
    fail(ErrorKind::Serialization, std::string("cannot serialize: ") + e.what());
  }
  detail::ByteWriter w;
  w.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("RGRD"), 4));
  w.u8(kContainerVersion);
  w.u8(static_cast<std::uint8_t>(static_cast<std::uint8_t>(s.mode) | (s.is_protected ? 0 : kUnprotectedBit)));
  w.u8(static_cast<std::uint8_t>(s.payload_kind()));
  w.f64(s.epsilon);
  w.u8(static_cast<std::uint8_t>(s.grid.kind));
  if (s.grid.kind == QuantGrid::Kind::Uniform) {
    w.f64(s.grid.q);
    w.f64(s.grid.s);
  } else {
    w.u16(s.grid.table_id);
  }
  w.u16(s.p0_q16);
  w.u32(s.flag_count);
  w.u32(static_cast<std::uint32_t>(s.safeguard.size()));
  w.u32(static_cast<std::uint32_t>(s.main.size()));
  std::visit(
      [&](const auto& h) {
        using H = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<H, OctreeHeader>) {
          w.u8(h.bit_depth);
          w.u64(h.point_count);
        } else if constexpr (std::is_same_v<H, HyperpriorHeader>) {
          w.u32(h.height);
          w.u32(h.width);
          w.u32(h.channels);
          w.u16(h.scale_table_id);
          for (double z : h.z) w.f64(z);
        } else {
          w.u64(h.value_count);
        }
      },
      s.payload);
  w.bytes(s.safeguard);
  w.bytes(s.main);
  return w.take();
}

inline GuardedStream read_container(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "RGRD", 4) != 0) fail(ErrorKind::BadMagic, "not an .rgd stream");
  r.bytes(4, "magic");
  const std::uint8_t version = r.u8();
  if (version != kContainerVersion)
    fail(ErrorKind::UnsupportedVersion, "container version " + std::to_string(version));
  GuardedStream s;
  const std::uint8_t mode = r.u8();
  if ((mode & ~(kUnprotectedBit | 0x03)) != 0) fail(ErrorKind::MalformedStream, "unknown mode byte");
  s.mode = static_cast<GuardMode>(mode & 0x03);
  s.is_protected = (mode & kUnprotectedBit) == 0;
  const std::uint8_t kind = r.u8();
  if (kind > 2) fail(ErrorKind::MalformedStream, "unknown payload kind");
  s.epsilon = r.f64();
  const std::uint8_t grid_kind = r.u8();
  if (grid_kind > 1) fail(ErrorKind::MalformedStream, "unknown grid kind");
  s.grid.kind = static_cast<QuantGrid::Kind>(grid_kind);
  if (s.grid.kind == QuantGrid::Kind::Uniform) {
    s.grid.q = r.f64();
    s.grid.s = r.f64();
  } else {
    s.grid.table_id = r.u16();
  }
  s.p0_q16 = r.u16();
  s.flag_count = r.u32();
  const std::uint32_t safeguard_len = r.u32();
  const std::uint32_t main_len = r.u32();
  switch (static_cast<PayloadKind>(kind)) {
    case PayloadKind::Octree: {
      OctreeHeader h;
      h.bit_depth = r.u8();
      h.point_count = r.u64();
      s.payload = h;
      break;
    }
    case PayloadKind::Hyperprior: {
      HyperpriorHeader h;
      h.height = r.u32();
      h.width = r.u32();
      h.channels = r.u32();
      h.scale_table_id = r.u16();
      // Bound the element count by what is left before multiplying it out.
      const std::uint64_t hw = ((std::uint64_t{h.height} + 3) / 4) * ((std::uint64_t{h.width} + 3) / 4);
      const std::uint64_t room = r.remaining() / 8;
      if (h.channels != 0 && hw > room / h.channels)
        fail(ErrorKind::LengthOverflow, "hyper-latent block larger than the stream");
      const std::uint64_t n = hw * h.channels;
      h.z.resize(static_cast<std::size_t>(n));
      for (double& z : h.z) z = r.f64();
      s.payload = std::move(h);
      break;
    }
    case PayloadKind::RawValues: {
      RawHeader h;
      h.value_count = r.u64();
      s.payload = h;
      break;
    }
  }
  if (std::uint64_t{safeguard_len} + main_len > r.remaining())
    fail(ErrorKind::TruncatedStream, "declared section lengths exceed remaining bytes");
  auto sg = r.bytes(safeguard_len, "safeguard");
  auto mn = r.bytes(main_len, "main");
  s.safeguard.assign(sg.begin(), sg.end());
  s.main.assign(mn.begin(), mn.end());
  if (r.remaining() != 0) fail(ErrorKind::TrailingBytes, std::to_string(r.remaining()) + " bytes after main stream");
  detail::check_fields(s);
  return s;
}

}  // namespace reproguard
