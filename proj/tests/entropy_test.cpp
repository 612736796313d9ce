#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "reproguard/entropy.hpp"

using namespace reproguard;

namespace {

double binary_entropy(double p) { return -(p * std::log2(p) + (1 - p) * std::log2(1 - p)); }

std::vector<bool> decode_bits(const std::vector<std::uint8_t>& bytes, const std::vector<Prob16>& probs) {
  RangeDecoder dec(bytes);
  std::vector<bool> out;
  for (Prob16 p : probs) out.push_back(dec.decode_bit(p));
  EXPECT_TRUE(dec.exhausted());
  return out;
}

}  // namespace

TEST(RangeCoder, NearZeroEntropyStream) {
  RangeEncoder enc;
  const Prob16 p(65535);
  for (int i = 0; i < 100000; ++i) enc.encode_bit(false, p);
  const auto bytes = enc.finish();
  EXPECT_LE(bytes.size(), 50u);
  RangeDecoder dec(bytes);
  for (int i = 0; i < 100000; ++i) ASSERT_FALSE(dec.decode_bit(p));
  EXPECT_TRUE(dec.exhausted());
}

TEST(RangeCoder, SingleBit) {
  RangeEncoder enc;
  enc.encode_bit(true, kHalf);
  const auto bytes = enc.finish();
  RangeDecoder dec(bytes);
  EXPECT_TRUE(dec.decode_bit(kHalf));
}

TEST(RangeCoder, EmptyCoderEmptyStream) {
  RangeEncoder enc;
  EXPECT_TRUE(enc.finish().empty());
}

TEST(RangeCoder, IidEfficiency) {
  std::mt19937_64 rng(31);
  const int n = 1000000;
  const Prob16 p(static_cast<std::uint32_t>(std::llround(0.9 * 65536)));
  std::bernoulli_distribution one(0.1);
  std::vector<bool> bits(n);
  RangeEncoder enc;
  for (int i = 0; i < n; ++i) {
    bits[i] = one(rng);
    enc.encode_bit(bits[i], p);
  }
  const auto bytes = enc.finish();
  const double shannon = n * binary_entropy(0.9);
  EXPECT_LE(bytes.size() * 8.0, 1.01 * shannon + 32.0);
  EXPECT_EQ(decode_bits(bytes, std::vector<Prob16>(n, p)), bits);
}

TEST(RangeCoder, RangeInvariantAndDeterminism) {
  std::mt19937_64 rng(32);
  RangeEncoder a, b;
  for (int i = 0; i < 50000; ++i) {
    const Prob16 p(1 + static_cast<std::uint32_t>(rng() % 65535));
    const bool bit = rng() & 1;
    a.encode_bit(bit, p);
    b.encode_bit(bit, p);
    ASSERT_GE(a.range(), kRangeTop);
  }
  EXPECT_EQ(a.finish(), b.finish());
}

TEST(RangeCoder, FuzzRoundTrip) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t len = rng() % 3000;
    std::vector<Prob16> probs;
    std::vector<bool> bits;
    RangeEncoder enc;
    for (std::size_t i = 0; i < len; ++i) {
      // Extreme probabilities are common on purpose.
      const std::uint32_t raw = (rng() % 4 == 0) ? ((rng() & 1) ? 1u : 65535u) : 1u + static_cast<std::uint32_t>(rng() % 65535);
      probs.emplace_back(raw);
      bits.push_back(rng() & 1);
      enc.encode_bit(bits.back(), probs.back());
    }
    const auto bytes = enc.finish();
    ASSERT_EQ(decode_bits(bytes, probs), bits) << "trial " << trial;
  }
}

TEST(RangeCoder, TruncationDetected) {
  std::mt19937_64 rng(34);
  RangeEncoder enc;
  std::vector<Prob16> probs;
  for (int i = 0; i < 4000; ++i) {
    probs.emplace_back(kHalf);
    enc.encode_bit(rng() & 1, kHalf);
  }
  auto bytes = enc.finish();
  bytes.resize(bytes.size() / 2);
  RangeDecoder dec(bytes);
  try {
    for (Prob16 p : probs) dec.decode_bit(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TruncatedStream);
  }
}

TEST(RangeCoder, SymbolRoundTrip) {
  std::mt19937_64 rng(35);
  std::vector<CdfTable> tables;
  for (double s : {0.05, 0.3, 1.0, 4.0, 20.0, 200.0}) tables.push_back(gaussian_cdf_table(s, 32));
  std::vector<std::pair<int, int>> seq;
  RangeEncoder enc;
  for (int i = 0; i < 50000; ++i) {
    const int t = static_cast<int>(rng() % tables.size());
    const int sym = static_cast<int>(rng() % 65) - 32;
    seq.emplace_back(t, sym);
    enc.encode_symbol(tables[t], sym);
    if (i % 3 == 0) enc.encode_bit(sym > 0, kHalf);
  }
  const auto bytes = enc.finish();
  RangeDecoder dec(bytes);
  for (int i = 0; i < 50000; ++i) {
    ASSERT_EQ(dec.decode_symbol(tables[seq[i].first]), seq[i].second);
    if (i % 3 == 0) ASSERT_EQ(dec.decode_bit(kHalf), seq[i].second > 0);
  }
  EXPECT_TRUE(dec.exhausted());
  EXPECT_THROW(enc.encode_symbol(tables[0], 33), Error);
}

TEST(ProbMapping, Examples) {
  EXPECT_EQ(prob_to_p16(0.015).value(), 64553u);
  EXPECT_EQ(prob_to_p16(0.5).value(), 32768u);
  EXPECT_EQ(prob_to_p16(1.0).value(), 1u);
  EXPECT_EQ(prob_to_p16(0.0).value(), 65535u);
  for (double bad : {-1e-12, 1.0000001, double(NAN)}) {
    try {
      prob_to_p16(bad);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Internal);
    }
  }
  EXPECT_THROW(Prob16(0), Error);
  EXPECT_THROW(Prob16(65536), Error);
}

TEST(FlagCoding, OneRiskyInThousand) {
  std::vector<Flag> flags(1000);
  flags[417].risky = true;
  const FlagStream fs = finalize_flags(flags);
  EXPECT_EQ(fs.p0_q16, 65470);
  const auto bytes = encode_flags(fs, GuardMode::CenterMajor);
  EXPECT_LE(bytes.size(), 6u);
  EXPECT_EQ(decode_flags(bytes, 1000, fs.p0_q16, GuardMode::CenterMajor), flags);
}

TEST(FlagCoding, ZeroFlags) {
  EXPECT_TRUE(encode_flags(finalize_flags({}), GuardMode::Full).empty());
  EXPECT_TRUE(decode_flags({}, 0, 32768, GuardMode::Full).empty());
}

TEST(FlagCoding, FullModeDirections) {
  const std::vector<Flag> flags{{true, false}, {false, std::nullopt}, {true, true}};
  const FlagStream fs = finalize_flags(flags);
  const auto bytes = encode_flags(fs, GuardMode::Full);
  EXPECT_EQ(decode_flags(bytes, 3, fs.p0_q16, GuardMode::Full), flags);
}

TEST(FlagCoding, CountMismatch) {
  std::mt19937_64 rng(36);
  std::vector<Flag> flags(5000);
  for (auto& f : flags) f.risky = rng() % 10 == 0;
  const FlagStream fs = finalize_flags(flags);
  const auto bytes = encode_flags(fs, GuardMode::CenterMajor);
  EXPECT_THROW(decode_flags(bytes, 4000, fs.p0_q16, GuardMode::CenterMajor), Error);
  try {
    decode_flags(bytes, 9000, fs.p0_q16, GuardMode::CenterMajor);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TruncatedStream);
  }
  FlagReader reader(bytes, 5000, fs.p0_q16, GuardMode::CenterMajor);
  for (int i = 0; i < 4999; ++i) reader.next();
  EXPECT_THROW(reader.finish(), Error);
  reader.next();
  EXPECT_NO_THROW(reader.finish());
  EXPECT_THROW(reader.next(), Error);
}

TEST(GaussianTable, TotalsAndFloor) {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 1000; ++i) {
    const double sigma = std::exp(std::uniform_real_distribution<double>(std::log(1e-3), std::log(1e4))(rng));
    const int A = 1 + static_cast<int>(rng() % 40);
    const auto t = gaussian_cdf_table(sigma, A);
    ASSERT_EQ(t.cum.front(), 0u);
    ASSERT_EQ(t.cum.back(), 65536u);
    ASSERT_EQ(t.cum.size(), static_cast<std::size_t>(2 * A + 2));
    for (int k = -A; k <= A; ++k) {
      ASSERT_GE(t.freq(k), 1u);
      ASSERT_EQ(t.freq(k), t.freq(-k));
    }
  }
}

TEST(GaussianTable, CloseToExactGaussian) {
  for (double sigma : {0.3, 1.0, 3.0, 10.0}) {
    const int A = 32;
    const auto t = gaussian_cdf_table(sigma, A);
    auto Phi = [&](double x) { return 0.5 * std::erfc(-x / (sigma * std::sqrt(2.0))); };
    for (int k = -A; k <= A; ++k) {
      double m = Phi(k + 0.5) - Phi(k - 0.5);
      if (k == -A) m = Phi(k + 0.5);
      if (k == A) m = 1.0 - Phi(k - 0.5);
      // One count per symbol is reserved, the rest is spread by mass.
      const double expect = 1.0 + m * (65536.0 - (2 * A + 1));
      EXPECT_NEAR(t.freq(k), expect, 1.5) << "sigma " << sigma << " k " << k;
    }
  }
}

TEST(GaussianTable, HugeSigmaFoldsIntoEnds) {
  const auto t = gaussian_cdf_table(1e6, 2);
  EXPECT_EQ(t.freq(-2), t.freq(2));
  EXPECT_GE(t.freq(2), 32760u);
  EXPECT_LE(t.freq(0), 2u);
}

TEST(GaussianTable, Errors) {
  EXPECT_THROW(gaussian_cdf_table(0.0, 4), Error);
  EXPECT_THROW(gaussian_cdf_table(-1.0, 4), Error);
  EXPECT_THROW(gaussian_cdf_table(1.0, 0), Error);
}
