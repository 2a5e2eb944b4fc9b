#pragma once

// Random-access control on a linear chain: observe per-node queue lengths,
// set per-node contention windows, earn the packets delivered at the chain's
// end during the last step interval. Steps are time-based.

#include <memory>
#include <sstream>
#include <string>

#include "netgym/bridge.hpp"
#include "netgym/models/mesh.hpp"

namespace netgym::envs {

struct LinearMeshSettings {
  models::MeshConfig mesh;
  std::uint64_t step_interval_ticks = 100 * ticks::kPerMillisecond;
  std::uint64_t sim_time_ticks = 10 * ticks::kPerSecond;
  std::uint32_t cw_max_limit = 1023;

  static LinearMeshSettings from_args(const EnvArgs& args) {
    ArgReader r(args);
    LinearMeshSettings s;
    s.mesh.num_nodes = narrow(r.get_positive("num_nodes", s.mesh.num_nodes), "num_nodes");
    s.mesh.queue_capacity = narrow(r.get_positive("queue_capacity", s.mesh.queue_capacity), "queue_capacity");
    s.mesh.interference_range =
        narrow(r.get_positive("interference_range", s.mesh.interference_range), "interference_range");
    s.mesh.slot_ticks = r.get_duration("slot_us", 9.0, ticks::kPerMicrosecond);
    s.cw_max_limit = narrow(r.get_u64("cw_max_limit", s.cw_max_limit), "cw_max_limit");
    s.mesh.initial_cw = narrow(r.get_u64("initial_cw", s.mesh.initial_cw), "initial_cw");
    s.step_interval_ticks = r.get_duration("step_interval_ms", 100.0, ticks::kPerMillisecond);
    s.sim_time_ticks = r.get_duration("sim_time_s", 10.0, ticks::kPerSecond);
    if (s.mesh.initial_cw > s.cw_max_limit) throw ValidationError("initial_cw exceeds cw_max_limit");
    if (s.mesh.num_nodes < 2) throw ValidationError("num_nodes must be at least 2");
    r.warn_unused("linear-mesh");
    return s;
  }

 private:
  static std::uint32_t narrow(std::uint64_t v, const char* key) {
    if (v > 0xFFFFFFFFull) throw ValidationError(std::string("argument '") + key + "' too large");
    return static_cast<std::uint32_t>(v);
  }
};

class LinearMeshEnv final : public Environment {
 public:
  LinearMeshEnv(LinearMeshSettings settings, std::uint64_t seed)
      : settings_(settings), chain_(settings.mesh, seed) {}

  SpaceSpec get_observation_space() override {
    return box(0, settings_.mesh.queue_capacity, {settings_.mesh.num_nodes}, DType::kU32);
  }
  SpaceSpec get_action_space() override {
    return box(0, settings_.cw_max_limit, {settings_.mesh.num_nodes}, DType::kU32);
  }

  DataContainer get_observation() override {
    return make_box<std::uint32_t>({settings_.mesh.num_nodes}, chain_.queue_lengths());
  }

  /// Packets delivered since the previous call.
  float get_reward() override {
    const auto delta = chain_.delivered() - reward_snapshot_;
    reward_snapshot_ = chain_.delivered();
    return static_cast<float>(delta);
  }

  bool get_game_over() override { return false; }

  std::string get_extra_info() override {
    std::ostringstream os;
    os << "delivered=" << chain_.delivered() << ";dropped=" << chain_.dropped() << ";slots=" << chain_.slots();
    return os.str();
  }

  bool execute_actions(const DataContainer& action) override {
    if (!conforms(action, get_action_space())) return false;
    const auto& cw = std::get<BoxValue>(action.value).values<std::uint32_t>();
    for (std::uint32_t i = 0; i < cw.size(); ++i) chain_.set_cw(i, cw[i]);
    return true;
  }

  StepTrigger trigger() const override { return TimeBased{settings_.step_interval_ticks}; }
  std::uint64_t sim_time_ticks() const override { return settings_.sim_time_ticks; }

  void start(Simulator& sim, StepNotifier&) override {
    sim_ = &sim;
    sim.schedule(0, [this] { on_slot(); });
  }

  const models::CsmaChain& chain() const noexcept { return chain_; }
  const LinearMeshSettings& settings() const noexcept { return settings_; }

 private:
  void on_slot() {
    chain_.tick();
    sim_->schedule(settings_.mesh.slot_ticks, [this] { on_slot(); });
  }

  LinearMeshSettings settings_;
  models::CsmaChain chain_;
  std::uint64_t reward_snapshot_ = 0;
  Simulator* sim_ = nullptr;
};

inline EnvFactory linear_mesh_factory() {
  return [](const EnvArgs& args, std::uint64_t seed) -> std::unique_ptr<Environment> {
    return std::make_unique<LinearMeshEnv>(LinearMeshSettings::from_args(args), seed);
  };
}

}  // namespace netgym::envs
