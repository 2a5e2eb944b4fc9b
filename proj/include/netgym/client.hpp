#pragma once

// Agent-side handle on a remote environment: make (connect or spawn), reset,
// step and close over the framed request/reply protocol.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "netgym/error.hpp"
#include "netgym/log.hpp"
#include "netgym/socket.hpp"
#include "netgym/spaces.hpp"
#include "netgym/wire.hpp"

namespace netgym {

inline constexpr std::chrono::milliseconds kDefaultStartupTimeout{10'000};

/// Lockstep request/reply over one stream: at most one request in flight.
class Channel {
 public:
  Channel() = default;
  explicit Channel(TcpStream stream) : stream_(std::move(stream)) {}

  bool is_open() const noexcept { return stream_.is_open(); }
  bool awaiting_reply() const noexcept { return outstanding_; }

  void send(const Message& m) {
    if (!stream_.is_open()) throw LifecycleError("channel is closed");
    if (outstanding_) throw LifecycleError("a request is already awaiting its reply; pipelining is not allowed");
    const std::string bytes = encode(m);
    stream_.write_all(bytes);
    outstanding_ = true;
  }

  Message receive() {
    if (!stream_.is_open()) throw LifecycleError("channel is closed");
    std::string payload;
    const ReadStatus status = stream_.read_frame(payload);
    switch (status) {
      case ReadStatus::kFrame: break;
      case ReadStatus::kClosed: fail<TransportError>("peer closed the connection before replying");
      case ReadStatus::kTruncated: fail<TransportError>("peer closed the connection mid-reply");
      case ReadStatus::kOversized: fail<SizeError>("reply length prefix exceeds 16 MiB");
    }
    outstanding_ = false;
    return decode_payload(payload);
  }

  /// Sends `m` and returns the reply; an ErrorResp reply is thrown as RemoteError.
  Message request_reply(const Message& m) {
    send(m);
    Message reply = receive();
    if (auto* err = std::get_if<ErrorResp>(&reply)) throw RemoteError(err->code, err->detail);
    return reply;
  }

  void close() noexcept {
    stream_.close();
    outstanding_ = false;
  }

 private:
  template <typename E>
  [[noreturn]] void fail(const char* what) {
    close();
    throw E(what);
  }

  TcpStream stream_;
  bool outstanding_ = false;
};

struct SpawnSpec {
  std::string command;
  std::vector<std::string> args;
};

/// A child environment server. Its stdout and stderr are captured until the
/// `LISTENING <port>` line and forwarded to our stderr afterwards.
class ServerProcess {
 public:
  ServerProcess() = default;
  ServerProcess(const ServerProcess&) = delete;
  ServerProcess& operator=(const ServerProcess&) = delete;
  ServerProcess(ServerProcess&& o) noexcept
      : pid_(std::exchange(o.pid_, -1)), port_(o.port_), forwarder_(std::move(o.forwarder_)) {}
  ServerProcess& operator=(ServerProcess&& o) noexcept {
    if (this != &o) {
      terminate();
      pid_ = std::exchange(o.pid_, -1);
      port_ = o.port_;
      forwarder_ = std::move(o.forwarder_);
    }
    return *this;
  }
  ~ServerProcess() { terminate(); }

  static ServerProcess launch(const SpawnSpec& spec, std::chrono::milliseconds timeout = kDefaultStartupTimeout) {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) throw StartupError(errno_text("pipe"));
    FileDescriptor read_end(fds[0]);
    FileDescriptor write_end(fds[1]);

    std::vector<std::string> argv_storage;
    argv_storage.push_back(spec.command);
    argv_storage.insert(argv_storage.end(), spec.args.begin(), spec.args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());
    argv.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) throw StartupError(errno_text("fork"));
    if (pid == 0) {
      ::dup2(write_end.get(), STDOUT_FILENO);
      ::dup2(write_end.get(), STDERR_FILENO);
      ::execvp(argv[0], argv.data());
      const char msg[] = "exec failed\n";
      [[maybe_unused]] auto n = ::write(STDERR_FILENO, msg, sizeof msg - 1);
      ::_exit(127);
    }
    write_end.reset();

    ServerProcess proc;
    proc.pid_ = pid;
    std::string captured;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto port = find_listening(captured)) {
        proc.port_ = *port;
        break;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        throw StartupError("server did not report LISTENING within the startup timeout; output:\n" + captured);
      }
      pollfd p{read_end.get(), POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0 && errno != EINTR) throw StartupError(errno_text("poll"));
      if (rc <= 0) continue;
      char buf[4096];
      const ssize_t n = ::read(read_end.get(), buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        int status = 0;
        ::waitpid(pid, &status, 0);
        proc.pid_ = -1;
        throw StartupError("server exited before listening (status " + std::to_string(exit_code(status)) +
                           "); output:\n" + captured);
      }
      captured.append(buf, static_cast<std::size_t>(n));
    }

    const auto line_end = captured.find('\n', captured.find("LISTENING "));
    std::string rest = line_end == std::string::npos ? std::string() : captured.substr(line_end + 1);
    proc.forwarder_ = std::thread([fd = std::move(read_end), rest = std::move(rest)]() mutable {
      if (!rest.empty()) std::cerr << rest;
      char buf[4096];
      for (;;) {
        const ssize_t n = ::read(fd.get(), buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        std::cerr.write(buf, n);
      }
    });
    return proc;
  }

  std::uint16_t port() const noexcept { return port_; }
  bool running() const noexcept { return pid_ > 0; }

  /// Waits up to `grace` for a voluntary exit, then kills. Returns the exit
  /// status, or -1 if the process had to be killed.
  int wait(std::chrono::milliseconds grace = std::chrono::milliseconds(2000)) {
    int code = 0;
    if (pid_ > 0) {
      const auto deadline = std::chrono::steady_clock::now() + grace;
      int status = 0;
      for (;;) {
        const pid_t r = ::waitpid(pid_, &status, WNOHANG);
        if (r == pid_) {
          code = exit_code(status);
          break;
        }
        if (std::chrono::steady_clock::now() >= deadline) {
          ::kill(pid_, SIGKILL);
          ::waitpid(pid_, &status, 0);
          code = -1;
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
      }
      pid_ = -1;
    }
    if (forwarder_.joinable()) forwarder_.join();
    return code;
  }

 private:
  static int exit_code(int status) {
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return -1;
  }

  static std::optional<std::uint16_t> find_listening(const std::string& text) {
    const auto at = text.find("LISTENING ");
    if (at == std::string::npos) return std::nullopt;
    const auto end = text.find('\n', at);
    if (end == std::string::npos) return std::nullopt;
    unsigned long port = 0;
    const char* first = text.data() + at + 10;
    auto [ptr, ec] = std::from_chars(first, text.data() + end, port);
    if (ec != std::errc{} || port > 65535) return std::nullopt;
    return static_cast<std::uint16_t>(port);
  }

  void terminate() noexcept {
    if (pid_ > 0) {
      ::kill(pid_, SIGTERM);
      int status = 0;
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
    if (forwarder_.joinable()) forwarder_.join();
  }

  pid_t pid_ = -1;
  std::uint16_t port_ = 0;
  std::thread forwarder_;
};

struct StepResult {
  DataContainer observation;
  float reward = 0.0f;
  bool done = false;
  DoneReason done_reason = DoneReason::kNone;
  std::string info;
};

class RemoteEnv {
 public:
  RemoteEnv(RemoteEnv&&) noexcept = default;
  RemoteEnv& operator=(RemoteEnv&&) noexcept = default;
  ~RemoteEnv() { close_quietly(); }

  /// Connects to a running server ("tcp://host:port") and performs Init.
  static RemoteEnv connect(std::string_view endpoint, const EnvArgs& args = {},
                           std::chrono::milliseconds timeout = kDefaultStartupTimeout) {
    RemoteEnv env(Channel(netgym::connect(parse_endpoint(endpoint), timeout)));
    env.init(args);
    return env;
  }

  /// Starts a server process, waits for its LISTENING line, connects and
  /// performs Init.
  static RemoteEnv spawn(const SpawnSpec& spec, const EnvArgs& args = {},
                         std::chrono::milliseconds timeout = kDefaultStartupTimeout) {
    ServerProcess proc = ServerProcess::launch(spec, timeout);
    RemoteEnv env(Channel(netgym::connect(Endpoint{"127.0.0.1", proc.port()}, timeout)));
    env.process_ = std::move(proc);
    env.init(args);
    return env;
  }

  const SpaceSpec& observation_space() const noexcept { return observation_space_; }
  const SpaceSpec& action_space() const noexcept { return action_space_; }
  bool episode_active() const noexcept { return active_; }

  DataContainer reset() {
    require_open();
    Message reply = channel_.request_reply(ResetReq{});
    auto* r = std::get_if<ResetResp>(&reply);
    if (!r) throw ProtocolError("expected reset_resp, got " + std::string(type_name(reply)));
    check_observation(r->observation);
    active_ = true;
    return std::move(r->observation);
  }

  StepResult step(const DataContainer& action) {
    require_open();
    if (!active_) throw LifecycleError("step requires an active episode; call reset first");
    if (!conforms(action, action_space_)) throw ValidationError("action does not conform to the action space");
    Message reply = channel_.request_reply(StepReq{action});
    auto* r = std::get_if<StepResp>(&reply);
    if (!r) throw ProtocolError("expected step_resp, got " + std::string(type_name(reply)));
    check_observation(r->observation);
    if (r->done) active_ = false;
    return StepResult{std::move(r->observation), r->reward, r->done, r->done_reason, std::move(r->info)};
  }

  /// Sends Close and, for a spawned server, waits for it to exit.
  void close() {
    if (!channel_.is_open()) return;
    Message reply = channel_.request_reply(CloseReq{});
    if (!std::holds_alternative<CloseResp>(reply)) throw ProtocolError("expected close_resp");
    channel_.close();
    active_ = false;
    if (process_.running()) process_.wait();
  }

  Channel& channel() noexcept { return channel_; }

 private:
  explicit RemoteEnv(Channel channel) : channel_(std::move(channel)) {}

  void init(const EnvArgs& args) {
    Message reply = channel_.request_reply(InitReq{args});
    auto* r = std::get_if<InitResp>(&reply);
    if (!r) throw ProtocolError("expected init_resp, got " + std::string(type_name(reply)));
    observation_space_ = std::move(r->observation_space);
    action_space_ = std::move(r->action_space);
  }

  void require_open() const {
    if (!channel_.is_open()) throw LifecycleError("environment is closed");
  }

  void check_observation(const DataContainer& obs) const {
    if (!conforms(obs, observation_space_)) throw ProtocolError("observation does not conform to the observation space");
  }

  void close_quietly() noexcept {
    try {
      if (channel_.is_open() && !channel_.awaiting_reply()) close();
    } catch (const std::exception& e) {
      log::debug("close during teardown failed: ", e.what());
    }
    channel_.close();
  }

  ServerProcess process_;
  Channel channel_;
  SpaceSpec observation_space_;
  SpaceSpec action_space_;
  bool active_ = false;
};

}  // namespace netgym
