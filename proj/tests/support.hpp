#pragma once

// Shared helpers for the test binaries: random space trees and a simple
// reader for the checked-in transcript format.

#include <cstdint>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "netgym/des.hpp"
#include "netgym/spaces.hpp"
#include "netgym/wire.hpp"

namespace netgym::testkit {

/// Random valid SpaceSpec with nesting depth at most `max_depth`.
inline SpaceSpec random_space(RngStream& rng, std::size_t max_depth = 4) {
  const auto pick = max_depth <= 1 ? rng.below(2) : rng.below(4);
  switch (pick) {
    case 0:
      return discrete(rng.uniform_int(1, 1000));
    case 1: {
      Shape shape(rng.uniform_int(1, 3));
      for (auto& d : shape) d = static_cast<std::uint32_t>(rng.uniform_int(1, 4));
      const auto dtype = static_cast<DType>(rng.below(4));
      double lo = 0, hi = 0;
      switch (dtype) {
        case DType::kU32:
          lo = static_cast<double>(rng.uniform_int(0, 100));
          hi = lo + static_cast<double>(rng.uniform_int(0, 5000));
          break;
        case DType::kI32:
          lo = static_cast<double>(rng.uniform_int(-5000, 100));
          hi = lo + static_cast<double>(rng.uniform_int(0, 10000));
          break;
        default:
          lo = rng.uniform_real(-1e3, 1e3);
          hi = lo + rng.uniform_real(0, 1e4);
          if (rng.bernoulli(0.1)) hi = lo = static_cast<float>(lo);
          break;
      }
      return box(lo, hi, std::move(shape), dtype);
    }
    case 2: {
      TupleSpace t;
      const auto n = rng.uniform_int(1, 3);
      for (std::int64_t i = 0; i < n; ++i) t.children.push_back(random_space(rng, max_depth - 1));
      return t;
    }
    default: {
      DictSpace d;
      const auto n = rng.uniform_int(1, 3);
      for (std::int64_t i = 0; i < n; ++i) {
        std::string key = "k" + std::to_string(rng.below(50));
        if (rng.bernoulli(0.2)) key += "_\xC3\xA9\"\\";  // non-ASCII and escapes
        d.entries.emplace(std::move(key), random_space(rng, max_depth - 1));
      }
      return d;
    }
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// One recorded frame: 'C' (client to server) or 'S' (server to client)
/// followed by the complete frame bytes.
struct TranscriptRecord {
  char direction;
  std::string frame;
};

inline std::vector<TranscriptRecord> parse_transcript(const std::string& bytes) {
  std::vector<TranscriptRecord> out;
  std::size_t at = 0;
  while (at < bytes.size()) {
    if (bytes.size() - at < 5) throw std::runtime_error("transcript truncated");
    const char dir = bytes[at];
    if (dir != 'C' && dir != 'S') throw std::runtime_error("bad transcript direction byte");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + at + 1);
    const std::size_t len = (std::size_t{p[0]} << 24) | (std::size_t{p[1]} << 16) | (std::size_t{p[2]} << 8) | p[3];
    if (bytes.size() - at - 5 < len) throw std::runtime_error("transcript frame truncated");
    out.push_back({dir, bytes.substr(at + 1, 4 + len)});
    at += 5 + len;
  }
  return out;
}

inline std::string serialize_transcript(const std::vector<TranscriptRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out.push_back(r.direction);
    out += r.frame;
  }
  return out;
}

inline constexpr const char* kGoldenFile = "interference_episode.bin";

/// Client side of the recorded episode: a two-second interference run that
/// always picks action 1, one step past the end, then close.
inline std::vector<Message> golden_requests() {
  std::vector<Message> out;
  out.push_back(InitReq{{{"seed", "7"}, {"sim_time_s", "2"}}});
  out.push_back(ResetReq{});
  for (int i = 0; i < 21; ++i) out.push_back(StepReq{make_discrete(1)});
  out.push_back(CloseReq{});
  return out;
}

/// Plays requests through a fresh session and records both directions.
template <typename Session>
std::vector<TranscriptRecord> record_session(Session& session, const std::vector<Message>& requests) {
  std::vector<TranscriptRecord> out;
  for (const auto& m : requests) {
    const std::string c = encode(m);
    out.push_back({'C', c});
    out.push_back({'S', encode(session.handle_payload(std::string_view(c).substr(4)))});
  }
  return out;
}

}  // namespace netgym::testkit
