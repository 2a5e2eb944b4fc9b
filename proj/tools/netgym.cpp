// netgym: environment server, agent runner and CW benchmark.

#include <unistd.h>

#include <cerrno>
#include <climits>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "netgym/agents.hpp"
#include "netgym/bench.hpp"
#include "netgym/bridge.hpp"
#include "netgym/client.hpp"
#include "netgym/envs/registry.hpp"
#include "netgym/log.hpp"

namespace {

namespace exit_code {
constexpr int kOk = 0;
constexpr int kStartup = 1;  // bind failure, unreachable endpoint, spawn failure
constexpr int kUsage = 2;
constexpr int kProtocol = 3;
constexpr int kTransport = 4;
constexpr int kIo = 5;
constexpr int kInternal = 6;
constexpr int kLifecycle = 7;
}  // namespace exit_code

int fail(int code, const std::string& what) {
  std::cerr << "ERROR: " << what << std::endl;
  return code;
}

std::string self_path() {
  char buf[PATH_MAX];
  const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof buf - 1);
  if (n <= 0) return "netgym";
  return std::string(buf, static_cast<std::size_t>(n));
}

bool apply_log_level(const std::string& name) {
  if (name.empty()) return true;
  auto level = netgym::log::parse_level(name);
  if (!level) return false;
  netgym::log::set_level(*level);
  return true;
}

struct ServeFlags {
  std::string env;
  std::string host = "127.0.0.1";
  std::uint16_t port = 5555;
  std::string log_level;
  // Scenario parameters, forwarded verbatim as default Init args when given.
  std::vector<std::pair<std::string, std::string>> params = {
      {"seed", ""},           {"sim_time_s", ""},     {"step_interval_ms", ""},
      {"num_nodes", ""},      {"queue_capacity", ""}, {"num_channels", ""},
  };
};

netgym::EnvArgs serve_defaults(const ServeFlags& f) {
  netgym::EnvArgs args;
  for (const auto& [k, v] : f.params) {
    if (!v.empty()) args[k] = v;
  }
  return args;
}

int run_serve(const ServeFlags& f) {
  if (!apply_log_level(f.log_level)) return fail(exit_code::kUsage, "unknown log level '" + f.log_level + "'");
  netgym::EnvFactory factory;
  netgym::EnvArgs defaults = serve_defaults(f);
  try {
    factory = netgym::envs::factory(f.env);
    // Validate the flags up front so a bad value is a usage error, not a
    // failure at Init time.
    netgym::ArgReader(defaults).get_u64("seed", 0);
    factory(defaults, 0);
  } catch (const netgym::ValidationError& e) {
    return fail(exit_code::kUsage, e.what());
  } catch (const netgym::RangeError& e) {
    return fail(exit_code::kUsage, e.what());
  }
  netgym::ServeOptions options;
  options.host = f.host;
  options.port = f.port;
  try {
    return netgym::serve(std::move(factory), std::move(defaults), options);
  } catch (const netgym::StartupError& e) {
    return fail(exit_code::kStartup, e.what());
  }
}

struct AgentFlags {
  std::string endpoint;
  std::string spawn;
  std::string agent = "random";
  std::uint64_t episodes = 1;
  std::uint64_t max_steps = 0;
  std::uint64_t seed = 0;
  std::string metrics_out = "-";
  std::vector<std::string> env_args;
  double timeout_s = 10.0;
  std::string log_level;
};

std::unique_ptr<netgym::Agent> make_agent(const AgentFlags& f, const netgym::RemoteEnv& env) {
  const auto* act_discrete = env.action_space().as<netgym::DiscreteSpace>();
  const auto* act_box = env.action_space().as<netgym::BoxSpace>();
  const auto* obs_box = env.observation_space().as<netgym::BoxSpace>();
  if (f.agent == "random") return std::make_unique<netgym::RandomAgent>(env.action_space(), f.seed);
  if (f.agent == "oracle" || f.agent == "qlearn") {
    if (!act_discrete || !obs_box) throw netgym::ValidationError("agent '" + f.agent + "' needs a channel-selection environment");
    const auto n = static_cast<std::size_t>(act_discrete->n);
    if (f.agent == "oracle") return std::make_unique<netgym::OracleChannelAgent>(n);
    return std::make_unique<netgym::ChannelQAgent>(n, f.seed);
  }
  if (f.agent == "graded-cw" || f.agent == "hillclimb-cw") {
    if (!act_box || act_box->dtype != netgym::DType::kU32 || act_box->shape.size() != 1) {
      throw netgym::ValidationError("agent '" + f.agent + "' needs a contention-window environment");
    }
    auto cw = netgym::graded_cw(act_box->shape[0]);
    if (f.agent == "graded-cw") return std::make_unique<netgym::FixedCwAgent>(std::move(cw));
    return std::make_unique<netgym::HillClimbCwAgent>(std::move(cw), static_cast<std::uint32_t>(act_box->high), f.seed);
  }
  throw netgym::ValidationError("unknown agent '" + f.agent + "'");
}

int run_agent(const AgentFlags& f) {
  if (!apply_log_level(f.log_level)) return fail(exit_code::kUsage, "unknown log level '" + f.log_level + "'");
  if (f.endpoint.empty() == f.spawn.empty()) return fail(exit_code::kUsage, "exactly one of --endpoint or --spawn is required");

  netgym::EnvArgs args;
  args["seed"] = std::to_string(f.seed);
  for (const auto& kv : f.env_args) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) return fail(exit_code::kUsage, "--arg expects key=value, got '" + kv + "'");
    args[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(f.timeout_s * 1000));

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (f.metrics_out != "-") {
    file.open(f.metrics_out, std::ios::out | std::ios::trunc);
    if (!file) return fail(exit_code::kIo, "cannot open '" + f.metrics_out + "': " + std::strerror(errno));
    out = &file;
  }

  std::optional<netgym::RemoteEnv> env;
  try {
    if (!f.endpoint.empty()) {
      env.emplace(netgym::RemoteEnv::connect(f.endpoint, args, timeout));
    } else {
      netgym::SpawnSpec spec{self_path(), {"serve", "--env", f.spawn, "--port", "0"}};
      if (!f.log_level.empty()) {
        spec.args.push_back("--log-level");
        spec.args.push_back(f.log_level);
      }
      env.emplace(netgym::RemoteEnv::spawn(spec, args, timeout));
    }
  } catch (const netgym::StartupError& e) {
    return fail(exit_code::kStartup, e.what());
  } catch (const netgym::RemoteError& e) {
    return fail(e.code() == "bad_args" ? exit_code::kUsage : exit_code::kProtocol, e.what());
  } catch (const netgym::Error& e) {
    return fail(exit_code::kProtocol, e.what());
  }

  std::unique_ptr<netgym::Agent> agent;
  try {
    agent = make_agent(f, *env);
  } catch (const netgym::ValidationError& e) {
    return fail(exit_code::kUsage, e.what());
  }

  netgym::CsvMetricsWriter csv(*out);
  try {
    netgym::run_episodes(*env, *agent, f.episodes, f.max_steps, [&](const netgym::EpisodeMetrics& m) {
      csv.write(m);
      if (!*out) throw netgym::TransportError("writing metrics failed");
    });
    env->close();
  } catch (const netgym::LifecycleError& e) {
    return fail(exit_code::kLifecycle, e.what());
  } catch (const netgym::TransportError& e) {
    return fail(out->good() ? exit_code::kTransport : exit_code::kIo, e.what());
  } catch (const netgym::FramingError& e) {
    return fail(exit_code::kTransport, e.what());
  } catch (const netgym::Error& e) {
    return fail(exit_code::kProtocol, e.what());
  }
  return exit_code::kOk;
}

struct BenchFlags {
  std::uint64_t seeds = 10;
  std::uint64_t slots = 10'000;
  std::uint64_t base_seed = 1;
  std::uint32_t num_nodes = 5;
  std::vector<std::uint32_t> graded;
  std::vector<std::uint32_t> uniform = netgym::bench::kUniformCandidates;
};

int run_bench(const BenchFlags& f) {
  netgym::models::MeshConfig config;
  config.num_nodes = f.num_nodes;
  const auto graded = f.graded.empty() ? netgym::graded_cw(f.num_nodes) : f.graded;
  if (graded.size() != f.num_nodes) return fail(exit_code::kUsage, "--graded must list one window per node");
  if (f.uniform.empty()) return fail(exit_code::kUsage, "--uniform needs at least one window");
  std::vector<netgym::bench::CwPair> pairs;
  try {
    pairs = netgym::bench::compare_cw_seeds(config, graded, f.uniform, f.slots, f.base_seed, f.seeds);
  } catch (const netgym::ValidationError& e) {
    return fail(exit_code::kUsage, e.what());
  }
  std::cout << "graded,uniform\n";
  for (const auto& p : pairs) std::cout << p.graded << ',' << p.uniform << '\n';
  std::cout << "GRADED_WINS " << netgym::bench::graded_wins(pairs) << '/' << pairs.size() << std::endl;
  return exit_code::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"netgym: discrete-event network environments for reinforcement-learning agents"};
  app.require_subcommand(1);

  ServeFlags serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve one environment session over TCP");
  serve_cmd->add_option("--env", serve.env, "Environment name")
      ->required()
      ->check(CLI::IsMember(netgym::envs::names()));
  serve_cmd->add_option("--host", serve.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve.port, "TCP port (0 = ephemeral)")->capture_default_str();
  serve_cmd->add_option("--seed", serve.params[0].second, "Base seed; episode i uses seed + i");
  serve_cmd->add_option("--sim-time-s", serve.params[1].second, "Simulated seconds per episode");
  serve_cmd->add_option("--step-interval-ms", serve.params[2].second, "Step interval (slot length for interference-pattern)");
  serve_cmd->add_option("--num-nodes", serve.params[3].second, "linear-mesh: chain length");
  serve_cmd->add_option("--queue-capacity", serve.params[4].second, "linear-mesh: per-node queue capacity");
  serve_cmd->add_option("--num-channels", serve.params[5].second, "interference-pattern: channel count");
  serve_cmd->add_option("--log-level", serve.log_level, "debug|info|warn|error|off");

  AgentFlags agent;
  auto* agent_cmd = app.add_subcommand("agent", "Run a reference agent against an environment");
  auto* ep = agent_cmd->add_option("--endpoint", agent.endpoint, "tcp://host:port of a running server");
  auto* sp = agent_cmd->add_option("--spawn", agent.spawn, "Start a server for this environment")
                 ->check(CLI::IsMember(netgym::envs::names()));
  ep->excludes(sp);
  agent_cmd->add_option("--agent", agent.agent, "random|oracle|qlearn|graded-cw|hillclimb-cw")
      ->check(CLI::IsMember({"random", "oracle", "qlearn", "graded-cw", "hillclimb-cw"}))
      ->capture_default_str();
  agent_cmd->add_option("--episodes", agent.episodes, "Episode count")->capture_default_str();
  agent_cmd->add_option("--max-steps", agent.max_steps, "Step cap per episode (0 = until done)")->capture_default_str();
  agent_cmd->add_option("--seed", agent.seed, "Seed for the agent and the environment")->capture_default_str();
  agent_cmd->add_option("--metrics-out", agent.metrics_out, "CSV path, '-' for stdout")->capture_default_str();
  agent_cmd->add_option("--arg", agent.env_args, "Extra environment argument key=value (repeatable)");
  agent_cmd->add_option("--timeout-s", agent.timeout_s, "Connect/startup timeout")->capture_default_str();
  agent_cmd->add_option("--log-level", agent.log_level, "debug|info|warn|error|off");

  BenchFlags bench;
  auto* bench_cmd = app.add_subcommand("bench", "Benchmarks");
  bench_cmd->require_subcommand(1);
  auto* cw_cmd = bench_cmd->add_subcommand("cw-compare", "Graded vs best uniform contention window, paired seeds");
  cw_cmd->add_option("--seeds", bench.seeds, "Number of paired seeds")->capture_default_str()->check(CLI::PositiveNumber);
  cw_cmd->add_option("--slots", bench.slots, "Slots per run")->capture_default_str();
  cw_cmd->add_option("--base-seed", bench.base_seed, "First seed")->capture_default_str();
  cw_cmd->add_option("--num-nodes", bench.num_nodes, "Chain length")->capture_default_str()->check(CLI::Range(2u, 1000u));
  cw_cmd->add_option("--graded", bench.graded, "Graded window per node (default n-2-i, destination 0)");
  cw_cmd->add_option("--uniform", bench.uniform, "Uniform windows to try")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR: " << e.what() << "\n\n" << app.help();
    return exit_code::kUsage;
  }

  try {
    if (*serve_cmd) return run_serve(serve);
    if (*agent_cmd) return run_agent(agent);
    if (*cw_cmd) return run_bench(bench);
  } catch (const std::exception& e) {
    return fail(exit_code::kInternal, e.what());
  }
  return fail(exit_code::kUsage, "no command given");
}
