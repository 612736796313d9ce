#pragma once

// Generic payload: a sequence of critical values that both sides compute
// themselves (e.g. a reconstruction). Only the flags travel; the decoder
// feeds its own values through them and recovers the encoder's outputs.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "reproguard/container.hpp"
#include "reproguard/entropy.hpp"
#include "reproguard/hyperprior.hpp"
#include "reproguard/safeguard.hpp"

namespace reproguard {

struct GuardedValues {
  GuardedStream stream;
  std::vector<double> values;  // protected outputs on the encoder side
};

// Uniform grids are unbounded here; boundary tables use their registered
// id and clip at their outer boundaries.
inline GuardConfig raw_guard_config(const GridDesc& grid, double epsilon, GuardMode mode) {
  if (grid.kind == QuantGrid::Kind::Uniform) return GuardConfig{QuantGrid::uniform(grid.q, grid.s), epsilon, mode, {}};
  return hyperprior_guard_config(epsilon, mode, grid.table_id);
}

inline GuardedValues guard_values(std::span<const double> values, const GridDesc& grid, double epsilon,
                                  GuardMode mode) {
  GuardSession session(raw_guard_config(grid, epsilon, mode));
  GuardedValues out;
  out.values.reserve(values.size());
  for (double v : values) out.values.push_back(session.protect(v));
  GuardedStream& s = out.stream;
  s.mode = mode;
  s.epsilon = epsilon;
  s.grid = grid;
  s.payload = RawHeader{values.size()};
  if (session.size() > 0xFFFFFFFFu) fail(ErrorKind::LengthOverflow, "too many flags for one stream");
  s.flag_count = static_cast<std::uint32_t>(session.size());
  FlagStream fs = session.finish();
  s.p0_q16 = fs.p0_q16;
  s.safeguard = encode_flags(fs, mode);
  return out;
}

inline std::vector<double> restore_values(const GuardedStream& s, std::span<const double> local_values) {
  if (s.payload_kind() != PayloadKind::RawValues) fail(ErrorKind::MalformedStream, "not a raw-values payload");
  const auto& hdr = std::get<RawHeader>(s.payload);
  if (!s.is_protected) fail(ErrorKind::MalformedStream, "raw-values streams are always protected");
  if (hdr.value_count != local_values.size() || hdr.value_count != s.flag_count)
    fail(ErrorKind::MalformedStream, "value count does not match the stream");
  if (!s.main.empty()) fail(ErrorKind::MalformedStream, "raw-values stream has a main section");
  std::optional<Safeguard> guard;
  try {
    guard.emplace(raw_guard_config(s.grid, s.epsilon, s.mode));
  } catch (const Error& e) {
    fail(ErrorKind::MalformedStream, std::string("stream configuration rejected: ") + e.what());
  }
  FlagReader flags(s.safeguard, s.flag_count, s.p0_q16, s.mode);
  std::vector<double> out;
  out.reserve(local_values.size());
  for (double v : local_values) out.push_back(guard->decode(v, flags.next()));
  flags.finish();
  return out;
}

}  // namespace reproguard
