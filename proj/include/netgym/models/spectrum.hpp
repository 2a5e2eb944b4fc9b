#pragma once

// Slotted multi-channel spectrum with one interferer sweeping channels
// 1..N in order, one channel per slot.

#include <cstdint>
#include <vector>

#include "netgym/error.hpp"

namespace netgym::models {

struct SpectrumConfig {
  std::uint32_t num_channels = 4;
  std::uint64_t slot_ticks = 100'000'000;
};

class SweepingInterferer {
 public:
  explicit SweepingInterferer(SpectrumConfig config) : config_(config) {
    if (config_.num_channels < 2) throw ValidationError("num_channels must be at least 2");
    if (config_.slot_ticks == 0) throw ValidationError("slot_ticks must be positive");
  }

  const SpectrumConfig& config() const noexcept { return config_; }
  std::uint32_t num_channels() const noexcept { return config_.num_channels; }

  /// Channel (1-based) occupied during `slot` (1-based).
  std::uint32_t interferer_channel(std::uint64_t slot) const {
    if (slot < 1) throw RangeError("slots are numbered from 1");
    return static_cast<std::uint32_t>((slot - 1) % config_.num_channels) + 1;
  }

  /// Wideband occupancy for `slot`: one entry per channel, 1 where busy.
  std::vector<std::uint32_t> sense(std::uint64_t slot) const {
    std::vector<std::uint32_t> occupancy(config_.num_channels, 0);
    occupancy[interferer_channel(slot) - 1] = 1;
    return occupancy;
  }

  bool check_collision(std::uint32_t channel, std::uint64_t slot) const {
    if (channel < 1 || channel > config_.num_channels) throw RangeError("channel out of range");
    return channel == interferer_channel(slot);
  }

 private:
  SpectrumConfig config_;
};

}  // namespace netgym::models
