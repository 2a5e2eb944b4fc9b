#pragma once

// Cognitive-radio channel selection against a periodic sweeping interferer.
//
// Slot s occupies [(s-1)*T, s*T). Reset observes slot 1; each action picks
// the channel for the next slot, and the step that follows reports that
// slot's wideband occupancy and +1/-1 for no collision/collision. The episode
// is over once more than three of the last ten scored slots collided.

#include <cstdint>
#include <deque>
#include <memory>
#include <sstream>
#include <string>

#include "netgym/bridge.hpp"
#include "netgym/models/spectrum.hpp"

namespace netgym::envs {

inline constexpr std::size_t kCollisionWindow = 10;
inline constexpr std::size_t kMaxCollisionsInWindow = 3;

struct InterferenceSettings {
  models::SpectrumConfig spectrum;
  std::uint64_t sim_time_ticks = 10 * ticks::kPerSecond;

  static InterferenceSettings from_args(const EnvArgs& args) {
    ArgReader r(args);
    InterferenceSettings s;
    const auto channels = r.get_positive("num_channels", s.spectrum.num_channels);
    if (channels < 2 || channels > 1'000'000) throw ValidationError("num_channels must be in [2, 1000000]");
    s.spectrum.num_channels = static_cast<std::uint32_t>(channels);
    s.spectrum.slot_ticks = r.get_duration("step_interval_ms", 100.0, ticks::kPerMillisecond);
    s.sim_time_ticks = r.get_duration("sim_time_s", 10.0, ticks::kPerSecond);
    r.warn_unused("interference-pattern");
    return s;
  }
};

class InterferencePatternEnv final : public Environment {
 public:
  explicit InterferencePatternEnv(InterferenceSettings settings) : settings_(settings), spectrum_(settings.spectrum) {}

  SpaceSpec get_observation_space() override { return box(0, 1, {spectrum_.num_channels()}, DType::kU32); }
  SpaceSpec get_action_space() override { return discrete(spectrum_.num_channels()); }

  DataContainer get_observation() override {
    return make_box<std::uint32_t>({spectrum_.num_channels()}, spectrum_.sense(slot_));
  }

  float get_reward() override {
    if (!scored_any_) return 0.0f;
    return last_collision_ ? -1.0f : 1.0f;
  }

  bool get_game_over() override { return collisions_in_window() > kMaxCollisionsInWindow; }

  std::string get_extra_info() override {
    std::ostringstream os;
    os << "slot=" << slot_ << ";channel=" << chosen_channel_ << ";interferer=" << spectrum_.interferer_channel(slot_)
       << ";collision=" << (last_collision_ ? 1 : 0);
    return os.str();
  }

  /// DiscreteValue v selects channel v+1 for the next slot.
  bool execute_actions(const DataContainer& action) override {
    const auto* v = action.as<DiscreteValue>();
    if (!v || v->value < 0 || v->value >= spectrum_.num_channels()) return false;
    chosen_channel_ = static_cast<std::uint32_t>(v->value) + 1;
    return true;
  }

  StepTrigger trigger() const override { return EventBased{}; }
  std::uint64_t sim_time_ticks() const override { return settings_.sim_time_ticks; }

  void start(Simulator& sim, StepNotifier& notifier) override {
    sim_ = &sim;
    notifier_ = &notifier;
    sim.schedule(settings_.spectrum.slot_ticks, [this] { on_slot_start(); });
  }

  std::uint64_t current_slot() const noexcept { return slot_; }
  std::uint32_t chosen_channel() const noexcept { return chosen_channel_; }
  std::size_t collisions_in_window() const {
    std::size_t n = 0;
    for (bool c : window_) n += c ? 1 : 0;
    return n;
  }
  const models::SweepingInterferer& spectrum() const noexcept { return spectrum_; }

 private:
  void on_slot_start() {
    ++slot_;
    if (chosen_channel_ != 0) {
      last_collision_ = spectrum_.check_collision(chosen_channel_, slot_);
      scored_any_ = true;
      window_.push_back(last_collision_);
      if (window_.size() > kCollisionWindow) window_.pop_front();
      notifier_->notify_step();
    }
    sim_->schedule(settings_.spectrum.slot_ticks, [this] { on_slot_start(); });
  }

  InterferenceSettings settings_;
  models::SweepingInterferer spectrum_;
  std::uint64_t slot_ = 1;
  std::uint32_t chosen_channel_ = 0;
  bool last_collision_ = false;
  bool scored_any_ = false;
  std::deque<bool> window_;
  Simulator* sim_ = nullptr;
  StepNotifier* notifier_ = nullptr;
};

inline EnvFactory interference_pattern_factory() {
  return [](const EnvArgs& args, std::uint64_t) -> std::unique_ptr<Environment> {
    return std::make_unique<InterferencePatternEnv>(InterferenceSettings::from_args(args));
  };
}

}  // namespace netgym::envs
