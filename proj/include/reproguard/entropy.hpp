#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reproguard/error.hpp"
#include "reproguard/safeguard.hpp"

namespace reproguard {

// Probability of the symbol 0, scaled by 2^16. Both symbols always keep a
// nonzero share of the range.
class Prob16 {
 public:
  constexpr explicit Prob16(std::uint32_t p16) : p16_(static_cast<std::uint16_t>(p16)) {
    if (p16 < 1 || p16 > 65535) fail(ErrorKind::InvalidInput, "Prob16 out of [1, 65535]");
  }
  constexpr std::uint32_t value() const noexcept { return p16_; }
  constexpr bool operator==(const Prob16&) const = default;

 private:
  std::uint16_t p16_;
};

inline constexpr Prob16 kHalf{32768};
inline constexpr std::uint32_t kProbBits = 16;
inline constexpr std::uint32_t kProbTotal = 1u << kProbBits;
inline constexpr std::uint32_t kRangeTop = 1u << 24;

// Maps a probability of the bit being 1 onto the coder's integer scale.
// This is the only place where a double enters the coding path, and it is
// only ever fed values that are already identical on both sides.
inline Prob16 prob_to_p16(double p_one) {
  if (!(p_one >= 0.0 && p_one <= 1.0)) fail(ErrorKind::Internal, "probability outside [0, 1]; missed a clip");
  const long long ones = std::llround(p_one * 65536.0);
  return Prob16(static_cast<std::uint32_t>(std::clamp<long long>(65536 - ones, 1, 65535)));
}

// Cumulative frequency table over the symbols [-A, A], total 2^16.
struct CdfTable {
  int half_width = 0;                // A
  std::vector<std::uint32_t> cum;    // size 2A + 2, cum[0] = 0, cum.back() = 65536

  int min_symbol() const noexcept { return -half_width; }
  int max_symbol() const noexcept { return half_width; }
  std::size_t index(int symbol) const { return static_cast<std::size_t>(symbol + half_width); }
  std::uint32_t freq(int symbol) const { return cum[index(symbol) + 1] - cum[index(symbol)]; }
  std::uint32_t low(int symbol) const { return cum[index(symbol)]; }
};

// Binary + multi-symbol range encoder: 64-bit low with a pending carry byte,
// 32-bit range, byte-wise renormalization. The leading byte of the classic
// formulation is always zero and is not emitted.
class RangeEncoder {
 public:
  void encode_bit(bool bit, Prob16 p) {
    const std::uint32_t bound = (range_ >> kProbBits) * p.value();
    if (!bit) {
      range_ = bound;
    } else {
      low_ += bound;
      range_ -= bound;
    }
    ++symbols_;
    normalize();
  }

  void encode_symbol(const CdfTable& table, int symbol) {
    if (symbol < table.min_symbol() || symbol > table.max_symbol())
      fail(ErrorKind::InvalidInput, "symbol outside the table alphabet");
    const std::uint32_t unit = range_ >> kProbBits;
    low_ += static_cast<std::uint64_t>(unit) * table.low(symbol);
    range_ = unit * table.freq(symbol);
    ++symbols_;
    normalize();
  }

  std::uint32_t range() const noexcept { return range_; }
  std::uint64_t symbols() const noexcept { return symbols_; }

  // Flushes and returns the stream. An encoder that coded nothing yields
  // an empty stream.
  std::vector<std::uint8_t> finish() {
    if (symbols_ == 0) return {};
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
  }

 private:
  void normalize() {
    while (range_ < kRangeTop) {
      range_ <<= 8;
      shift_low();
    }
  }

  void shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      const auto carry = static_cast<std::uint8_t>(low_ >> 32);
      std::uint8_t pending = cache_;
      do {
        emit(static_cast<std::uint8_t>(pending + carry));
        pending = 0xFF;
      } while (--cache_size_ != 0);
      cache_ = static_cast<std::uint8_t>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ & 0x00FFFFFFu) << 8;
  }

  void emit(std::uint8_t b) {
    if (skip_leading_) {
      skip_leading_ = false;
      return;
    }
    out_.push_back(b);
  }

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  bool skip_leading_ = true;
  std::uint64_t symbols_ = 0;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  RangeDecoder() = default;
  explicit RangeDecoder(std::span<const std::uint8_t> data) : data_(data) {}

  bool decode_bit(Prob16 p) {
    prime();
    const std::uint32_t bound = (range_ >> kProbBits) * p.value();
    bool bit;
    if (code_ < bound) {
      range_ = bound;
      bit = false;
    } else {
      code_ -= bound;
      range_ -= bound;
      bit = true;
    }
    normalize();
    return bit;
  }

  int decode_symbol(const CdfTable& table) {
    prime();
    const std::uint32_t unit = range_ >> kProbBits;
    const std::uint32_t target = code_ / unit;
    if (target >= kProbTotal) fail(ErrorKind::MalformedStream, "range decoder state outside the table");
    auto it = std::upper_bound(table.cum.begin(), table.cum.end(), target);
    const int symbol = static_cast<int>(it - table.cum.begin()) - 1 - table.half_width;
    code_ -= unit * table.low(symbol);
    range_ = unit * table.freq(symbol);
    normalize();
    return symbol;
  }

  std::uint32_t range() const noexcept { return range_; }
  std::size_t consumed() const noexcept { return pos_; }
  bool exhausted() const noexcept { return pos_ == data_.size(); }

 private:
  void prime() {
    if (primed_) return;
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
    primed_ = true;
  }

  std::uint8_t next_byte() {
    if (pos_ >= data_.size()) fail(ErrorKind::TruncatedStream, "range decoder ran past the end of its stream");
    return data_[pos_++];
  }

  void normalize() {
    while (range_ < kRangeTop) {
      range_ <<= 8;
      code_ = (code_ << 8) | next_byte();
    }
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
  bool primed_ = false;
};

// Safeguarding bitstream: f_r at p0_q16, each f_d (Full mode, right after
// its f_r = 1) at one half.
inline std::vector<std::uint8_t> encode_flags(const FlagStream& fs, GuardMode mode) {
  RangeEncoder enc;
  const Prob16 p0(fs.p0_q16);
  for (const Flag& f : fs.flags) {
    enc.encode_bit(f.risky, p0);
    if (mode == GuardMode::Full && f.risky) {
      if (!f.direction) fail(ErrorKind::InvalidInput, "Full-mode risky flag without direction");
      enc.encode_bit(*f.direction, kHalf);
    }
  }
  return enc.finish();
}

// Lazy reader used by decoders that consume flags in lockstep with their
// critical values.
class FlagReader {
 public:
  FlagReader(std::span<const std::uint8_t> bytes, std::uint64_t count, std::uint16_t p0_q16, GuardMode mode)
      : dec_(bytes), count_(count), p0_(p0_q16 == 0 ? 1u : p0_q16), mode_(mode) {
    if (p0_q16 == 0) fail(ErrorKind::MalformedStream, "p0_q16 must be nonzero");
    if (count == 0 && !bytes.empty()) fail(ErrorKind::MalformedStream, "flag bytes present but flag count is 0");
  }

  Flag next() {
    if (read_ >= count_) fail(ErrorKind::MalformedStream, "more critical values than signaled flags");
    Flag f;
    f.risky = dec_.decode_bit(p0_);
    if (mode_ == GuardMode::Full && f.risky) f.direction = dec_.decode_bit(kHalf);
    ++read_;
    return f;
  }

  std::uint64_t read() const noexcept { return read_; }

  // Every signaled flag consumed and every byte used.
  void finish() const {
    if (read_ != count_)
      fail(ErrorKind::MalformedStream,
           "flag count mismatch: " + std::to_string(read_) + " read, " + std::to_string(count_) + " signaled");
    if (count_ > 0 && !dec_.exhausted()) fail(ErrorKind::MalformedStream, "trailing bytes in safeguarding stream");
  }

 private:
  RangeDecoder dec_;
  std::uint64_t count_;
  std::uint64_t read_ = 0;
  Prob16 p0_;
  GuardMode mode_;
};

inline std::vector<Flag> decode_flags(std::span<const std::uint8_t> bytes, std::uint64_t count,
                                      std::uint16_t p0_q16, GuardMode mode) {
  FlagReader reader(bytes, count, p0_q16, mode);
  std::vector<Flag> flags;
  flags.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) flags.push_back(reader.next());
  reader.finish();
  return flags;
}

namespace detail {

// Abramowitz-Stegun 7.1.26 erf approximation, x >= 0.
inline double erf_as(double x) {
  constexpr double p = 0.3275911;
  constexpr double a1 = 0.254829592;
  constexpr double a2 = -0.284496736;
  constexpr double a3 = 1.421413741;
  constexpr double a4 = -1.453152027;
  constexpr double a5 = 1.061405429;
  const double t = 1.0 / (1.0 + p * x);
  const double poly = ((((a5 * t + a4) * t + a3) * t + a2) * t + a1) * t;
  return 1.0 - poly * std::exp(-x * x);
}

}  // namespace detail

// Discretized zero-mean Gaussian over [-A, A] with the tails folded onto
// the end symbols, every frequency >= 1 and the total exactly 2^16.
inline CdfTable gaussian_cdf_table(double sigma, int half_width) {
  if (!std::isfinite(sigma) || !(sigma > 0.0)) fail(ErrorKind::InvalidInput, "sigma must be > 0");
  if (half_width < 1 || half_width > 16000) fail(ErrorKind::InvalidInput, "half width out of range");
  const auto A = static_cast<std::size_t>(half_width);
  const double scale = 1.0 / (sigma * std::sqrt(2.0));

  // Mass of symbol k >= 0; the table is built from these and mirrored.
  std::vector<double> mass(A + 1);
  double prev = detail::erf_as(0.5 * scale);
  mass[0] = prev;
  for (std::size_t k = 1; k <= A; ++k) {
    if (k == A) {
      mass[k] = 0.5 * (1.0 - prev);
    } else {
      const double next = detail::erf_as((static_cast<double>(k) + 0.5) * scale);
      mass[k] = std::max(0.0, 0.5 * (next - prev));
      prev = next;
    }
  }
  double total = mass[0];
  for (std::size_t k = 1; k <= A; ++k) total += 2.0 * mass[k];

  const std::uint32_t spread = kProbTotal - static_cast<std::uint32_t>(2 * A + 1);
  std::vector<std::uint32_t> freq(A + 1);
  std::vector<double> frac(A + 1);
  std::uint32_t used = 0;
  for (std::size_t k = 0; k <= A; ++k) {
    const double raw = mass[k] / total * spread;
    const double fl = std::floor(raw);
    freq[k] = 1 + static_cast<std::uint32_t>(fl);
    frac[k] = raw - fl;
    used += (k == 0 ? 1 : 2) * freq[k];
  }
  if (used > kProbTotal) fail(ErrorKind::Internal, "gaussian table overflow");
  std::uint32_t remaining = kProbTotal - used;
  if (remaining % 2 == 1) {
    ++freq[0];
    --remaining;
  }
  std::vector<std::size_t> order(A);
  std::iota(order.begin(), order.end(), std::size_t{1});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; remaining > 0; i = (i + 1) % A) {
    ++freq[order[i]];
    remaining -= 2;
  }

  CdfTable t;
  t.half_width = half_width;
  t.cum.resize(2 * A + 2);
  t.cum[0] = 0;
  for (std::size_t i = 0; i < 2 * A + 1; ++i) {
    const long long k = static_cast<long long>(i) - static_cast<long long>(A);
    t.cum[i + 1] = t.cum[i] + freq[static_cast<std::size_t>(k < 0 ? -k : k)];
  }
  return t;
}

}  // namespace reproguard
