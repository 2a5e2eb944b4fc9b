#pragma once

// In-process counterpart of RemoteEnv: drives an EnvSession through the same
// messages without a socket. Used by tests and benchmarks.

#include <string>
#include <utility>

#include "netgym/bridge.hpp"
#include "netgym/client.hpp"

namespace netgym {

class LocalEnv {
 public:
  LocalEnv(EnvFactory factory, EnvArgs args) : session_(std::move(factory), {}) {
    Message reply = request(InitReq{std::move(args)});
    auto& r = std::get<InitResp>(reply);
    observation_space_ = std::move(r.observation_space);
    action_space_ = std::move(r.action_space);
  }

  const SpaceSpec& observation_space() const noexcept { return observation_space_; }
  const SpaceSpec& action_space() const noexcept { return action_space_; }
  bool episode_active() const noexcept { return active_; }

  DataContainer reset() {
    Message reply = request(ResetReq{});
    active_ = true;
    return std::move(std::get<ResetResp>(reply).observation);
  }

  StepResult step(const DataContainer& action) {
    if (!active_) throw LifecycleError("step requires an active episode; call reset first");
    if (!conforms(action, action_space_)) throw ValidationError("action does not conform to the action space");
    Message reply = request(StepReq{action});
    auto& r = std::get<StepResp>(reply);
    if (r.done) active_ = false;
    return StepResult{std::move(r.observation), r.reward, r.done, r.done_reason, std::move(r.info)};
  }

  void close() { request(CloseReq{}); }

  EnvSession& session() noexcept { return session_; }

 private:
  Message request(const Message& m) {
    Message reply = session_.handle(m);
    if (auto* err = std::get_if<ErrorResp>(&reply)) throw RemoteError(err->code, err->detail);
    return reply;
  }

  EnvSession session_;
  SpaceSpec observation_space_;
  SpaceSpec action_space_;
  bool active_ = false;
};

}  // namespace netgym
