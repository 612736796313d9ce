// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "reproguard/reproguard.hpp"

using namespace reproguard;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

constexpr GuardMode kModes[] = {GuardMode::Full, GuardMode::LeftMajor, GuardMode::RightMajor, GuardMode::CenterMajor};

void reproduction_guarantee() {
  const auto t0 = Clock::now();
  constexpr long kPerMode = 1'000'000;
  long total = 0, bad = 0;
  std::string worst;
  for (GuardMode mode : kModes) {
    std::mt19937_64 rng(1000 + static_cast<int>(mode));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    long cases = 0;
    for (double q : {0.004, 0.008}) {
      for (double eps : {1e-5, 1e-6}) {
        const Safeguard g(GuardConfig{QuantGrid::uniform(q), eps, mode, {}});
        for (long i = 0; i < kPerMode / 4; ++i) {
          double v;
          switch (i % 4) {
            case 0: v = u(rng); break;
            case 1: {
              // Boundary plus a multiple of epsilon from the adversarial set.
              static constexpr double ks[] = {0.0, 0.5, 0.999, 1.0, 1.001, 2.0};
              const double b = g.grid().boundary(static_cast<BoundaryIndex>(rng() % 250));
              v = b + ((rng() & 1) ? 1.0 : -1.0) * ks[rng() % 6] * eps;
              break;
            }
            case 2: {
              const double b = g.grid().boundary(static_cast<BoundaryIndex>(rng() % 250));
              v = b + (2.0 * u(rng) - 1.0) * 1.5 * eps;
              break;
            }
            default: {
              // A few ulps around a boundary.
              double b = g.grid().boundary(static_cast<BoundaryIndex>(rng() % 250));
              for (int s = static_cast<int>(rng() % 5); s > 0; --s) b = std::nextafter(b, (rng() & 1) ? 1.0 : -1.0);
              v = b;
            }
          }
          double d;
          switch (rng() % 3) {
            case 0: d = 0.999 * eps; break;
            case 1: d = -0.999 * eps; break;
            default: d = (2.0 * u(rng) - 1.0) * 0.999 * eps;
          }
          const GuardedValue enc = g.encode(v);
          const double got = g.decode(v + d, enc.flag);
          ++cases;
          if (!same_bits(got, enc.v_out)) {
            ++bad;
            if (worst.empty()) worst = fmt(" first miss: mode %s q %g eps %g v %.17g d %.3g", to_string(mode), q, eps, v, d);
          }
        }
      }
    }
    total += cases;
  }
  const double t = seconds_since(t0);
  report(1, "reproduction guarantee", bad == 0 && t < 30.0 && total >= 4 * kPerMode,
         fmt("%ld cases over 4 modes, %ld mismatches, %.2f s (limit 30 s)", total, bad, t) + worst);
}

void bin_drift() {
  std::mt19937_64 rng(2000);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const QuantGrid grids[] = {QuantGrid::uniform(0.004), QuantGrid::uniform(0.008), QuantGrid::uniform(0.004, 0.5),
                             default_scale_table()};
  long cases = 0, bad = 0;
  for (long i = 0; i < 1'000'000; ++i) {
    const QuantGrid& g = grids[i % 4];
    const double eps = (i % 8 < 4) ? 1e-5 : 1e-6;
    g.validate(eps);
    double v;
    if (g.is_uniform()) {
      v = (i % 2) ? u(rng) : g.boundary(static_cast<BoundaryIndex>(rng() % 250)) + (2.0 * u(rng) - 1.0) * eps;
    } else {
      const auto& t = g.table();
      v = (i % 2) ? std::exp(std::log(0.11) + u(rng) * (std::log(256.0) - std::log(0.11)))
                  : t[rng() % t.size()] + (2.0 * u(rng) - 1.0) * eps;
    }
    double d = (2.0 * u(rng) - 1.0) * eps;
    if (i % 16 == 0) d = eps;
    if (i % 16 == 1) d = -eps;
    ++cases;
    if (std::llabs(g.quantize(v) - g.quantize(v + d)) > 1) ++bad;
  }
  report(2, "bin drift bound", bad == 0, fmt("%ld cases, %ld violations of |Q(v) - Q(v+d)| <= 1", cases, bad));
}

void octree_interop() {
  const auto t0 = Clock::now();
  constexpr int kTrials = 20;
  const auto cfg = octree_guard_config(250, 1e-6);
  std::vector<int> exact(kTrials, 0), broken(kTrials, 0);
  std::vector<std::size_t> sizes(kTrials, 0);
  parallel_for(kTrials, [&](std::size_t i) {
    const auto cloud = synth_cloud(CloudKind::Dense, 10, 100000, 300 + i);
    sizes[i] = cloud.size();
    const auto s = read_container(write_container(encode_octree(cloud, cfg)));
    try {
      exact[i] = decode_octree(s, Perturbation{5e-7, PerturbDist::Uniform, 400 + i, 0}) == cloud;
    } catch (const Error&) {
    }
    OctreeOptions off;
    off.protect = false;
    const auto u = read_container(write_container(encode_octree(cloud, cfg, off)));
    try {
      broken[i] = !(decode_octree(u, Perturbation{5e-7, PerturbDist::Adversarial, 400 + i, 0}) == cloud);
    } catch (const Error&) {
      broken[i] = 1;
    }
  });
  int n_exact = 0, n_broken = 0;
  for (int i = 0; i < kTrials; ++i) n_exact += exact[i], n_broken += broken[i];
  const double t = seconds_since(t0);
  report(3, "octree interoperability", n_exact == kTrials && n_broken >= 19 && t < 120.0,
         fmt("protected exact %d/20 (need 20), unprotected adversarial broken %d/20 (need >= 19), "
             "~%zu voxels per cloud, %.1f s (limit 120 s)",
             n_exact, n_broken, sizes[0], t));
}

void overhead_trend() {
  const double eps_list[] = {1e-5, 5e-6, 1e-6, 5e-7, 1e-7};
  constexpr int kSeeds = 3;
  std::vector<std::array<double, 5>> ovh(kSeeds);
  std::vector<int> exact(kSeeds, 1);
  parallel_for(kSeeds, [&](std::size_t s) {
    const auto cloud = synth_cloud(CloudKind::Dense, 10, 100000, 500 + s);
    for (int j = 0; j < 5; ++j) {
      const auto stream = encode_octree(cloud, octree_guard_config(250, eps_list[j]));
      ovh[s][j] = 100.0 * static_cast<double>(guard_bytes(stream)) / static_cast<double>(stream.main.size());
    }
  });
  bool ok = true;
  std::string detail;
  for (int s = 0; s < kSeeds; ++s) {
    detail += fmt("seed %d:", 500 + s);
    for (int j = 0; j < 5; ++j) {
      detail += fmt(" %.3f%%", ovh[s][j]);
      if (j > 0 && !(ovh[s][j] < ovh[s][j - 1])) ok = false;
    }
    if (!(ovh[s][2] <= 5.0)) ok = false;
    detail += "; ";
  }
  report(4, "overhead trend", ok, detail + "strictly decreasing and <= 5% at eps 1e-6 required");
}

void flag_rate() {
  std::string detail;
  bool ok = true;
  for (double eps : {1e-5, 1e-6}) {
    const Safeguard g(GuardConfig{QuantGrid::uniform(1.0 / 250, 0.0, 0.0, 1.0), eps, GuardMode::CenterMajor,
                                  EdgeClip{0.0, 1.0}});
    std::mt19937_64 rng(eps == 1e-5 ? 601 : 602);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    constexpr long n = 1'000'000;
    long risky = 0;
    for (long i = 0; i < n; ++i) risky += g.encode(u(rng)).flag.risky;
    const double p = 2.0 * eps * 249.0;
    const double sd = std::sqrt(p * (1.0 - p) / n);
    const double z = (static_cast<double>(risky) / n - p) / sd;
    ok = ok && std::fabs(z) <= 3.0;
    detail += fmt("eps %g: measured %.6f expected %.6f (z = %+.2f); ", eps, static_cast<double>(risky) / n, p, z);
  }
  report(5, "flag rate model", ok, detail + "|z| <= 3 required");
}

void range_coder() {
  std::mt19937_64 rng(700);
  long bad = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t len = rng() % 2000;
    const bool skewed = rng() & 1;
    const std::uint32_t base = 1 + static_cast<std::uint32_t>(rng() % 65535);
    std::vector<Prob16> probs;
    std::vector<bool> bits;
    RangeEncoder enc;
    for (std::size_t i = 0; i < len; ++i) {
      const std::uint32_t p = skewed ? base : 1 + static_cast<std::uint32_t>(rng() % 65535);
      probs.emplace_back(p);
      bits.push_back((rng() % 65536) >= p);
      enc.encode_bit(bits.back(), probs.back());
    }
    const auto bytes = enc.finish();
    try {
      RangeDecoder dec(bytes);
      for (std::size_t i = 0; i < len; ++i)
        if (dec.decode_bit(probs[i]) != bits[i]) {
          ++bad;
          break;
        }
      if (len > 0 && !dec.exhausted()) ++bad;
    } catch (const Error&) {
      ++bad;
    }
  }
  constexpr long n = 1'000'000;
  const Prob16 p(static_cast<std::uint32_t>(std::llround(0.9 * 65536)));
  std::bernoulli_distribution one(0.1);
  RangeEncoder enc;
  std::vector<bool> bits(n);
  for (long i = 0; i < n; ++i) enc.encode_bit(bits[i] = one(rng), p);
  const auto bytes = enc.finish();
  RangeDecoder dec(bytes);
  bool iid_ok = true;
  for (long i = 0; i < n; ++i) iid_ok = iid_ok && dec.decode_bit(p) == bits[i];
  const double h = -(0.9 * std::log2(0.9) + 0.1 * std::log2(0.1));
  const double shannon = n * h;
  const double limit = 1.01 * shannon + 32.0;
  const double got = 8.0 * static_cast<double>(bytes.size());
  report(6, "range coder soundness", bad == 0 && iid_ok && got <= limit,
         fmt("10000 fuzz streams, %ld failures; iid p=0.9 N=1e6: %.0f bits vs limit %.0f (Shannon %.0f)", bad, got,
             limit, shannon));
}

void hyperprior_demo() {
  constexpr int kTrials = 20;
  const auto cfg = hyperprior_guard_config(1e-4);
  std::vector<int> exact(kTrials, 0), broken(kTrials, 0);
  parallel_for(kTrials, [&](std::size_t i) {
    const auto lat = synth_latents(64, 64, 8, 800 + i);
    const auto expect = quantize_latents(lat.y);
    const auto s = read_container(write_container(encode_hyperprior(lat, cfg)));
    try {
      exact[i] = decode_hyperprior(s, Perturbation{8e-6, PerturbDist::Uniform, 900 + i, 0}).y_hat == expect;
    } catch (const Error&) {
    }
    HyperpriorOptions off;
    off.protect = false;
    const auto u = read_container(write_container(encode_hyperprior(lat, cfg, off)));
    try {
      broken[i] = decode_hyperprior(u, Perturbation{8e-6, PerturbDist::Adversarial, 900 + i, 0}).y_hat != expect;
    } catch (const Error&) {
      broken[i] = 1;
    }
  });
  int n_exact = 0, n_broken = 0;
  for (int i = 0; i < kTrials; ++i) n_exact += exact[i], n_broken += broken[i];
  report(7, "hyperprior demo", n_exact == kTrials && n_broken >= 19,
         fmt("64x64x8 latents, eps 1e-4, e 8e-6: protected exact %d/20 (need 20), unprotected adversarial broken "
             "%d/20 (need >= 19)",
             n_exact, n_broken));
}

GuardedStream random_valid_stream(std::mt19937_64& rng) {
  GuardedStream s;
  s.mode = static_cast<GuardMode>(rng() % 4);
  s.is_protected = rng() % 4 != 0;
  s.epsilon = std::ldexp(1.0 + static_cast<double>(rng() % 4096) / 4096.0, -1 - static_cast<int>(rng() % 40));
  if (rng() & 1)
    s.grid = GridDesc{QuantGrid::Kind::Uniform, 1.0 / (1 + static_cast<double>(rng() % 1000)),
                      static_cast<double>(rng() % 64) / 64.0, 0};
  else
    s.grid = GridDesc{QuantGrid::Kind::Boundaries, 1.0, 0.0, static_cast<std::uint16_t>(rng())};
  s.p0_q16 = static_cast<std::uint16_t>(1 + rng() % 65535);
  s.flag_count = static_cast<std::uint32_t>(rng());
  switch (rng() % 3) {
    case 0: s.payload = OctreeHeader{static_cast<std::uint8_t>(1 + rng() % 21), rng()}; break;
    case 1: {
      HyperpriorHeader h;
      h.height = 1 + static_cast<std::uint32_t>(rng() % 13);
      h.width = 1 + static_cast<std::uint32_t>(rng() % 13);
      h.channels = 1 + static_cast<std::uint32_t>(rng() % 3);
      h.scale_table_id = static_cast<std::uint16_t>(rng());
      h.z.resize(HyperpriorHeader::z_count(h.height, h.width, h.channels));
      for (double& z : h.z) z = std::bit_cast<double>(rng());
      s.payload = std::move(h);
      break;
    }
    default: s.payload = RawHeader{rng()};
  }
  s.safeguard.resize(rng() % 40);
  s.main.resize(rng() % 120);
  for (auto& b : s.safeguard) b = static_cast<std::uint8_t>(rng());
  for (auto& b : s.main) b = static_cast<std::uint8_t>(rng());
  return s;
}

void container_robustness() {
  std::mt19937_64 rng(1100);
  std::vector<GuardedStream> corpus;
  for (int i = 0; i < 2000; ++i) corpus.push_back(random_valid_stream(rng));
  corpus.push_back(encode_octree(synth_cloud(CloudKind::Dense, 8, 3000, 1), octree_guard_config(250, 1e-6)));
  corpus.push_back(encode_hyperprior(synth_latents(16, 16, 4, 1), hyperprior_guard_config(1e-4)));
  corpus.push_back(guard_values(std::vector<double>{0.1, 0.5, 0.9}, GridDesc{QuantGrid::Kind::Uniform, 0.004, 0.0, 0},
                                1e-6, GuardMode::Full)
                       .stream);
  long identity_bad = 0;
  std::vector<std::vector<std::uint8_t>> seeds;
  for (const auto& s : corpus) {
    const auto bytes = write_container(s);
    const auto back = read_container(bytes);
    if (!(back == s) || write_container(back) != bytes) ++identity_bad;
    seeds.push_back(bytes);
  }
  long accepted = 0, typed = 0, untyped = 0, reencode_bad = 0;
  for (long i = 0; i < 100000; ++i) {
    std::vector<std::uint8_t> b;
    if (i % 10 == 0) {
      b.resize(rng() % 200);
      for (auto& x : b) x = static_cast<std::uint8_t>(rng());
      if (b.size() >= 5 && (rng() & 1)) b[0] = 'R', b[1] = 'G', b[2] = 'R', b[3] = 'D', b[4] = 1;
    } else {
      b = seeds[rng() % seeds.size()];
      for (int e = 1 + static_cast<int>(rng() % 4); e > 0 && !b.empty(); --e) {
        switch (rng() % 4) {
          case 0: b[rng() % b.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8)); break;
          case 1: b[rng() % b.size()] = static_cast<std::uint8_t>(rng()); break;
          case 2: b.resize(rng() % (b.size() + 1)); break;
          default: b.insert(b.begin() + static_cast<long>(rng() % (b.size() + 1)), static_cast<std::uint8_t>(rng()));
        }
      }
    }
    try {
      const auto s = read_container(b);
      ++accepted;
      if (write_container(s) != b) ++reencode_bad;
    } catch (const Error&) {
      ++typed;
    } catch (...) {
      ++untyped;
    }
  }
  report(8, "format robustness", identity_bad == 0 && untyped == 0 && reencode_bad == 0,
         fmt("%zu valid streams, %ld identity failures; 100000 fuzzed inputs: %ld accepted (%ld re-encode "
             "mismatches), %ld typed errors, %ld untyped",
             corpus.size(), identity_bad, accepted, reencode_bad, typed, untyped));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  reproduction_guarantee();
  bin_drift();
  octree_interop();
  overhead_trend();
  flag_rate();
  range_coder();
  hyperprior_demo();
  container_robustness();
  std::printf("%d criteria failed, %.1f s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
