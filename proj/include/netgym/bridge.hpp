#pragma once

// Environment-side driver. A scenario implements EnvHooks (plus the wiring in
// Environment); EnvSession turns protocol requests into episode lifecycle
// operations and simulation advances, and serve() binds a session to one TCP
// connection.

#include <charconv>
#include <cmath>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <variant>

#include "netgym/des.hpp"
#include "netgym/error.hpp"
#include "netgym/log.hpp"
#include "netgym/socket.hpp"
#include "netgym/spaces.hpp"
#include "netgym/wire.hpp"

namespace netgym {

/// The seven functions every scenario provides.
class EnvHooks {
 public:
  virtual ~EnvHooks() = default;

  virtual SpaceSpec get_observation_space() = 0;
  virtual SpaceSpec get_action_space() = 0;
  virtual DataContainer get_observation() = 0;
  virtual float get_reward() = 0;
  virtual bool get_game_over() = 0;
  virtual std::string get_extra_info() = 0;
  virtual bool execute_actions(const DataContainer& action) = 0;
};

/// Step every `interval` ticks of virtual time.
struct TimeBased {
  std::uint64_t interval = 0;
};
/// The scenario decides when to step by calling StepNotifier::notify_step().
struct EventBased {};

using StepTrigger = std::variant<TimeBased, EventBased>;

class StepNotifier {
 public:
  virtual ~StepNotifier() = default;
  /// Requests a step rendezvous once the current event finishes. Throws
  /// LogicError when no episode is active.
  virtual void notify_step() = 0;
};

class Environment : public EnvHooks {
 public:
  virtual StepTrigger trigger() const = 0;
  virtual std::uint64_t sim_time_ticks() const = 0;
  /// Schedules the scenario's initial events on a fresh simulator.
  virtual void start(Simulator& sim, StepNotifier& notifier) = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>(const EnvArgs& args, std::uint64_t episode_seed)>;

/// Typed access to string arguments; remembers which keys were consumed.
class ArgReader {
 public:
  explicit ArgReader(const EnvArgs& args) : args_(args) {}

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    auto it = find(key);
    if (!it) return fallback;
    std::uint64_t v = 0;
    const auto& s = **it;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw ValidationError("argument '" + key + "' must be a non-negative integer, got '" + s + "'");
    }
    return v;
  }

  std::uint64_t get_positive(const std::string& key, std::uint64_t fallback) {
    const auto v = get_u64(key, fallback);
    if (v == 0) throw ValidationError("argument '" + key + "' must be positive");
    return v;
  }

  double get_positive_double(const std::string& key, double fallback) {
    auto it = find(key);
    if (!it) return fallback;
    const auto& s = **it;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v) || v <= 0) {
      throw ValidationError("argument '" + key + "' must be a positive number, got '" + s + "'");
    }
    return v;
  }

  /// Converts a positive duration argument in `unit` ticks.
  std::uint64_t get_duration(const std::string& key, double fallback, std::uint64_t unit) {
    const double v = get_positive_double(key, fallback) * static_cast<double>(unit);
    if (v >= 9.2e18) throw ValidationError("argument '" + key + "' overflows the tick counter");
    const auto t = static_cast<std::uint64_t>(std::llround(v));
    if (t == 0) throw ValidationError("argument '" + key + "' rounds to zero ticks");
    return t;
  }

  void warn_unused(std::string_view env_name) const {
    for (const auto& [k, v] : args_) {
      if (!used_.contains(k)) log::warn(env_name, ": ignoring unknown argument '", k, "'");
    }
  }

 private:
  std::optional<const std::string*> find(const std::string& key) {
    used_.insert(key);
    auto it = args_.find(key);
    if (it == args_.end()) return std::nullopt;
    return &it->second;
  }

  const EnvArgs& args_;
  std::set<std::string> used_{"seed"};
};

/// Error codes carried by ErrorResp.
namespace error_code {
inline constexpr const char* kBadState = "bad_state";
inline constexpr const char* kEpisodeOver = "episode_over";
inline constexpr const char* kActionRejected = "action_rejected";
inline constexpr const char* kHookFailure = "hook_failure";
inline constexpr const char* kBadArgs = "bad_args";
inline constexpr const char* kParseError = "parse_error";
inline constexpr const char* kProtocolError = "protocol_error";
inline constexpr const char* kSizeError = "size_error";
inline constexpr const char* kInternal = "internal";
}  // namespace error_code

/// One protocol session: Init (Reset Step*)* Close.
class EnvSession final : private StepNotifier {
 public:
  enum class State { kFresh, kReady, kRunning, kDone, kClosed };

  EnvSession(EnvFactory factory, EnvArgs defaults = {})
      : factory_(std::move(factory)), defaults_(std::move(defaults)) {}

  EnvSession(const EnvSession&) = delete;
  EnvSession& operator=(const EnvSession&) = delete;

  State state() const noexcept { return state_; }
  bool closed() const noexcept { return state_ == State::kClosed; }
  std::uint64_t base_seed() const noexcept { return base_seed_; }
  /// Seed of the most recent episode; episode i (0-based) uses base_seed + i.
  std::uint64_t episode_seed() const noexcept { return episode_seed_; }
  std::uint64_t episodes_started() const noexcept { return episodes_; }
  const Simulator* simulator() const noexcept { return episode_ ? &episode_->sim : nullptr; }
  Environment* environment() noexcept { return episode_ ? episode_->env.get() : nullptr; }

  /// Decodes and handles one payload. Never throws for bad input: decoding
  /// failures become ErrorResp.
  Message handle_payload(std::string_view payload) {
    Message request;
    try {
      request = decode_payload(payload);
    } catch (const ParseError& e) {
      return ErrorResp{error_code::kParseError, e.what()};
    } catch (const ProtocolError& e) {
      return ErrorResp{error_code::kProtocolError, e.what()};
    }
    return handle(request);
  }

  Message handle(const Message& request) {
    return std::visit(
        [this](const auto& m) -> Message {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, InitReq>) {
            return on_init(m);
          } else if constexpr (std::is_same_v<T, ResetReq>) {
            return on_reset();
          } else if constexpr (std::is_same_v<T, StepReq>) {
            return on_step(m);
          } else if constexpr (std::is_same_v<T, CloseReq>) {
            return on_close();
          } else {
            return ErrorResp{error_code::kProtocolError, "unexpected message type '" + std::string(type_name(m)) + "'"};
          }
        },
        request);
  }

 private:
  struct Episode {
    Simulator sim;
    std::unique_ptr<Environment> env;
  };

  Message bad_state(std::string_view what) const {
    static constexpr const char* kNames[] = {"fresh", "ready", "running", "done", "closed"};
    return ErrorResp{error_code::kBadState,
                     std::string(what) + " not allowed in state " + kNames[static_cast<int>(state_)]};
  }

  Message on_init(const InitReq& req) {
    if (state_ != State::kFresh) return bad_state("init_req");
    EnvArgs merged = defaults_;
    for (const auto& [k, v] : req.args) merged[k] = v;
    try {
      base_seed_ = ArgReader(merged).get_u64("seed", 0);
      auto env = factory_(merged, base_seed_);
      observation_space_ = env->get_observation_space();
      action_space_ = env->get_action_space();
      prototype_ = std::move(env);
    } catch (const ValidationError& e) {
      return ErrorResp{error_code::kBadArgs, e.what()};
    } catch (const RangeError& e) {
      return ErrorResp{error_code::kBadArgs, e.what()};
    } catch (const std::exception& e) {
      return ErrorResp{error_code::kHookFailure, e.what()};
    }
    if (!is_valid(observation_space_) || !is_valid(action_space_)) {
      prototype_.reset();
      return ErrorResp{error_code::kInternal, "scenario declared an invalid space"};
    }
    args_ = std::move(merged);
    state_ = State::kReady;
    return InitResp{observation_space_, action_space_};
  }

  Message on_reset() {
    if (state_ == State::kFresh || state_ == State::kClosed) return bad_state("reset_req");
    const std::uint64_t seed = base_seed_ + episodes_;
    try {
      auto env = (episodes_ == 0 && prototype_) ? std::move(prototype_) : factory_(args_, seed);
      auto ep = std::make_unique<Episode>();
      ep->env = std::move(env);
      episode_ = std::move(ep);
      episode_seed_ = seed;
      ++episodes_;
      state_ = State::kRunning;
      episode_->env->start(episode_->sim, *this);
      const StepTrigger trigger = episode_->env->trigger();
      if (const auto* tb = std::get_if<TimeBased>(&trigger)) schedule_periodic_step(tb->interval);
      DataContainer obs = episode_->env->get_observation();
      if (!conforms(obs, observation_space_)) {
        state_ = State::kDone;
        return ErrorResp{error_code::kInternal, "initial observation does not conform to the observation space"};
      }
      return ResetResp{std::move(obs)};
    } catch (const std::exception& e) {
      state_ = State::kDone;
      return ErrorResp{error_code::kHookFailure, e.what()};
    }
  }

  Message on_step(const StepReq& req) {
    if (state_ == State::kDone) return ErrorResp{error_code::kEpisodeOver, "episode finished; reset required"};
    if (state_ != State::kRunning) return bad_state("step_req");
    if (!conforms(req.action, action_space_)) {
      return ErrorResp{error_code::kActionRejected, "action does not conform to the action space"};
    }
    auto& env = *episode_->env;
    auto& sim = episode_->sim;
    try {
      if (!env.execute_actions(req.action)) {
        return ErrorResp{error_code::kActionRejected, "scenario rejected the action"};
      }
      const SimTime end{env.sim_time_ticks()};
      if (sim.now() < end) sim.run_until(end);
      const bool sim_end = sim.now() >= end;

      StepResp resp;
      resp.observation = env.get_observation();
      resp.reward = env.get_reward();
      const bool game_over = env.get_game_over();
      resp.info = env.get_extra_info();
      if (!conforms(resp.observation, observation_space_)) {
        state_ = State::kDone;
        return ErrorResp{error_code::kInternal, "observation does not conform to the observation space"};
      }
      if (!std::isfinite(resp.reward)) {
        state_ = State::kDone;
        return ErrorResp{error_code::kInternal, "reward is not finite"};
      }
      if (game_over || sim_end) {
        resp.done = true;
        resp.done_reason = game_over ? DoneReason::kGameOver : DoneReason::kSimulationEnd;
        state_ = State::kDone;
      }
      return resp;
    } catch (const std::exception& e) {
      // aborted; reported to the agent as a GameOver termination
      state_ = State::kDone;
      return ErrorResp{error_code::kHookFailure, e.what()};
    }
  }

  Message on_close() {
    if (state_ == State::kClosed) return bad_state("close_req");
    state_ = State::kClosed;
    episode_.reset();
    prototype_.reset();
    return CloseResp{};
  }

  void schedule_periodic_step(std::uint64_t interval) {
    if (interval == 0) throw ValidationError("time-based step interval must be positive");
    episode_->sim.schedule(interval, [this, interval] { periodic_tick(interval); });
  }

  void periodic_tick(std::uint64_t interval) {
    notify_step();
    episode_->sim.schedule(interval, [this, interval] { periodic_tick(interval); });
  }

  void notify_step() override {
    if (state_ != State::kRunning || !episode_) throw LogicError("notify_step called with no active episode");
    episode_->sim.stop();
  }

  EnvFactory factory_;
  EnvArgs defaults_;
  EnvArgs args_;
  State state_ = State::kFresh;
  std::uint64_t base_seed_ = 0;
  std::uint64_t episode_seed_ = 0;
  std::uint64_t episodes_ = 0;
  SpaceSpec observation_space_;
  SpaceSpec action_space_;
  std::unique_ptr<Environment> prototype_;
  std::unique_ptr<Episode> episode_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 5555;
  /// Receives the `LISTENING <port>` line; null to suppress.
  std::ostream* announce = &std::cout;
  /// Called with the bound port before accept().
  std::function<void(std::uint16_t)> on_listening;
};

/// Serves one connection. Returns 0 after a clean Close, 1 if the peer
/// vanished or the stream became unusable. Throws StartupError if the port
/// cannot be bound.
inline int serve(EnvFactory factory, EnvArgs defaults, const ServeOptions& options) {
  TcpListener listener(options.host, options.port);
  if (options.announce) {
    *options.announce << "LISTENING " << listener.port() << std::endl;
  }
  if (options.on_listening) options.on_listening(listener.port());

  TcpStream conn = listener.accept();
  log::info("agent connected");
  EnvSession session(std::move(factory), std::move(defaults));
  std::string payload;
  for (;;) {
    ReadStatus status;
    try {
      status = conn.read_frame(payload);
    } catch (const TransportError& e) {
      log::error("connection failed: ", e.what());
      return 1;
    }
    switch (status) {
      case ReadStatus::kFrame: break;
      case ReadStatus::kClosed:
        log::warn("agent disconnected without close_req");
        return 1;
      case ReadStatus::kTruncated:
        log::error("framing error: connection closed mid-frame");
        return 1;
      case ReadStatus::kOversized:
        log::error("size error: frame length prefix exceeds 16 MiB");
        try {
          conn.write_message(ErrorResp{error_code::kSizeError, "frame length prefix exceeds 16 MiB"});
        } catch (const TransportError&) {
        }
        return 1;
    }
    Message reply = session.handle_payload(payload);
    if (const auto* err = std::get_if<ErrorResp>(&reply)) log::info("error_resp ", err->code, ": ", err->detail);
    std::string bytes;
    try {
      bytes = encode(reply);
    } catch (const Error& e) {
      bytes = encode(ErrorResp{error_code::kInternal, e.what()});
    }
    try {
      conn.write_all(bytes);
    } catch (const TransportError& e) {
      log::error("connection failed: ", e.what());
      return 1;
    }
    if (session.closed()) return 0;
  }
}

}  // namespace netgym
