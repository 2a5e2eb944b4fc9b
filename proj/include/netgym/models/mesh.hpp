#pragma once

// Slotted CSMA/CA on a linear chain 0 -> 1 -> ... -> n-1 with a saturated
// source at node 0 and uniform backoff (CWmin == CWmax == cw).
//
// Per slot:
//  * every non-destination node with a queued packet and zero backoff sends
//    one packet to its right neighbour;
//  * a send succeeds iff no other sender lies within `interference_range`
//    hops of the receiver (a busy receiver counts, being at distance 0);
//  * successes move the packet (dropping it if the receiver queue is full,
//    counting it as delivered at the destination);
//  * senders redraw backoff uniformly in {0..cw}, the others count down;
//  * the source is topped up to one packet if it ran empty.

#include <cstdint>
#include <algorithm>
#include <cstdlib>
#include <vector>

#include "netgym/des.hpp"
#include "netgym/error.hpp"

namespace netgym::models {

struct MeshConfig {
  std::uint32_t num_nodes = 5;
  std::uint32_t queue_capacity = 100;
  std::uint32_t interference_range = 2;
  std::uint64_t slot_ticks = 9'000;
  std::uint32_t initial_cw = 15;
};

struct MeshNode {
  std::uint32_t queue_len = 0;
  std::uint32_t cw = 0;
  std::uint32_t backoff_remaining = 0;
};

struct SlotOutcome {
  std::vector<std::uint32_t> transmitters;
  std::vector<std::uint32_t> collisions;  // senders whose packet was lost
  std::uint32_t deliveries = 0;           // packets that reached the destination
};

class CsmaChain {
 public:
  /// Node i draws its backoff from RngStream(seed, i). `cw` optionally gives
  /// the starting window per node; otherwise every node starts at initial_cw.
  CsmaChain(MeshConfig config, std::uint64_t seed, const std::vector<std::uint32_t>& cw = {}) : config_(config) {
    if (config_.num_nodes < 2) throw ValidationError("num_nodes must be at least 2");
    if (config_.queue_capacity < 1) throw ValidationError("queue_capacity must be at least 1");
    if (config_.interference_range < 1) throw ValidationError("interference_range must be at least 1");
    if (!cw.empty() && cw.size() != config_.num_nodes) throw ValidationError("cw vector length must equal num_nodes");
    nodes_.resize(config_.num_nodes);
    rngs_.reserve(config_.num_nodes);
    for (std::uint32_t i = 0; i < config_.num_nodes; ++i) {
      rngs_.emplace_back(seed, i);
      nodes_[i].cw = cw.empty() ? config_.initial_cw : cw[i];
      nodes_[i].backoff_remaining = draw_backoff(i);
    }
    nodes_[0].queue_len = 1;
    injected_ = 1;
  }

  const MeshConfig& config() const noexcept { return config_; }
  const std::vector<MeshNode>& nodes() const noexcept { return nodes_; }
  std::uint32_t destination() const noexcept { return config_.num_nodes - 1; }

  std::uint64_t delivered() const noexcept { return delivered_; }
  std::uint64_t dropped() const noexcept { return dropped_; }
  std::uint64_t injected() const noexcept { return injected_; }
  std::uint64_t slots() const noexcept { return slots_; }

  std::uint64_t queued_total() const noexcept {
    std::uint64_t total = 0;
    for (const auto& n : nodes_) total += n.queue_len;
    return total;
  }

  std::vector<std::uint32_t> queue_lengths() const {
    std::vector<std::uint32_t> out;
    out.reserve(nodes_.size());
    for (const auto& n : nodes_) out.push_back(n.queue_len);
    return out;
  }

  /// New window applies at the node's next redraw; a pending backoff larger
  /// than the new window is clamped so backoff_remaining <= cw holds.
  void set_cw(std::uint32_t node, std::uint32_t cw) {
    if (node >= nodes_.size()) throw RangeError("unknown node index");
    nodes_[node].cw = cw;
    if (nodes_[node].backoff_remaining > cw) nodes_[node].backoff_remaining = cw;
  }

  /// Test hook: overrides a node's pending backoff (clamped to its cw).
  void set_backoff(std::uint32_t node, std::uint32_t slots) {
    if (node >= nodes_.size()) throw RangeError("unknown node index");
    nodes_[node].backoff_remaining = std::min(slots, nodes_[node].cw);
  }

  SlotOutcome tick() {
    SlotOutcome out;
    const std::uint32_t dest = destination();
    for (std::uint32_t i = 0; i < dest; ++i) {
      if (nodes_[i].queue_len > 0 && nodes_[i].backoff_remaining == 0) out.transmitters.push_back(i);
    }

    std::vector<std::uint32_t> successes;
    for (auto sender : out.transmitters) {
      const std::int64_t receiver = sender + 1;
      bool clear = true;
      for (auto other : out.transmitters) {
        if (other != sender && std::llabs(static_cast<std::int64_t>(other) - receiver) <= config_.interference_range) {
          clear = false;
          break;
        }
      }
      (clear ? successes : out.collisions).push_back(sender);
    }

    for (auto s : successes) --nodes_[s].queue_len;
    for (auto s : successes) {
      const std::uint32_t r = s + 1;
      if (r == dest) {
        ++delivered_;
        ++out.deliveries;
      } else if (nodes_[r].queue_len < config_.queue_capacity) {
        ++nodes_[r].queue_len;
      } else {
        ++dropped_;
      }
    }

    std::size_t next_tx = 0;
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
      if (next_tx < out.transmitters.size() && out.transmitters[next_tx] == i) {
        nodes_[i].backoff_remaining = draw_backoff(i);
        ++next_tx;
      } else if (nodes_[i].backoff_remaining > 0) {
        --nodes_[i].backoff_remaining;
      }
    }

    if (nodes_[0].queue_len == 0) {
      nodes_[0].queue_len = 1;
      ++injected_;
    }
    ++slots_;
    return out;
  }

 private:
  std::uint32_t draw_backoff(std::uint32_t node) {
    return static_cast<std::uint32_t>(rngs_[node].uniform_int(0, nodes_[node].cw));
  }

  MeshConfig config_;
  std::vector<MeshNode> nodes_;
  std::vector<RngStream> rngs_;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
  std::uint64_t injected_ = 0;
  std::uint64_t slots_ = 0;
};

/// Packets delivered after `slots` slots with a fixed per-node cw vector.
inline std::uint64_t run_fixed_cw(const MeshConfig& base, const std::vector<std::uint32_t>& cw, std::uint64_t slots,
                                  std::uint64_t seed) {
  CsmaChain chain(base, seed, cw);
  for (std::uint64_t s = 0; s < slots; ++s) chain.tick();
  return chain.delivered();
}

}  // namespace netgym::models
