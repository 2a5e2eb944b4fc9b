// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/socket.h>
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "netgym/agents.hpp"
#include "netgym/bench.hpp"
#include "netgym/envs/registry.hpp"
#include "netgym/local_env.hpp"
#include "support.hpp"

using namespace netgym;

namespace {

// Tolerances and sizes, pinned.
constexpr double kRandomMean = 0.5;
constexpr double kRandomTolerance = 0.02;
constexpr std::uint64_t kRandomSlots = 100'000;
constexpr std::uint64_t kOracleSlots = 1'000;
constexpr std::uint64_t kQMaxEpisodes = 500;
constexpr std::uint64_t kQWindow = 100;
constexpr std::uint64_t kQSeeds = 5;
constexpr std::uint64_t kFixedChannelSlots = 10'000;
constexpr std::uint64_t kCwSeeds = 10;
constexpr std::uint64_t kCwMinWins = 9;
constexpr std::uint64_t kCwSlots = 10'000;
constexpr int kFuzzCases = 10'000;
constexpr int kSocketFuzzCases = 200;
constexpr int kRoundTripCases = 1'000;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  char t[32];
  std::snprintf(t, sizeof t, "%.2fs", secs);
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << " (" << t << ") " << o.detail << std::endl;
}

DataContainer u32s(std::vector<std::uint32_t> v) {
  const auto n = static_cast<std::uint32_t>(v.size());
  return make_box<std::uint32_t>({n}, std::move(v));
}

// Occupied channel for slots 1..8 of the sweep, written out by hand; slot 9
// follows from the period.
const std::vector<std::uint32_t> kSweepTable = {1, 2, 3, 4, 1, 2, 3, 4};

Outcome sense_fidelity() {
  std::vector<std::uint32_t> expected = kSweepTable;
  expected.push_back(1);
  models::SweepingInterferer model(models::SpectrumConfig{});
  LocalEnv env(envs::factory("interference-pattern"), {});
  DataContainer obs = env.reset();
  for (std::uint64_t t = 1; t <= 9; ++t) {
    std::vector<std::uint32_t> row(4, 0);
    row[expected[t - 1] - 1] = 1;
    if (model.sense(t) != row) return {false, "model slot " + std::to_string(t)};
    if (obs != u32s(row)) return {false, "env observation slot " + std::to_string(t)};
    // stay on the channel the sweep just left so the episode runs on
    obs = env.step(make_discrete(static_cast<std::int64_t>(expected[t - 1] - 1))).observation;
  }
  return {true, "slots 1..9 exact"};
}

Outcome oracle_optimality() {
  LocalEnv env(envs::factory("interference-pattern"), {{"sim_time_s", "100"}});
  OracleChannelAgent oracle(4);
  const auto m = run_episodes(env, oracle, 1, 0).front();
  std::ostringstream d;
  d << "steps=" << m.steps << " reward=" << m.total_reward << " collisions=" << m.collisions;
  return {m.steps == kOracleSlots && m.total_reward == static_cast<double>(m.steps) && m.collisions == 0, d.str()};
}

Outcome random_baseline() {
  LocalEnv env(envs::factory("interference-pattern"), {{"seed", "1"}});
  RandomAgent agent(env.action_space(), 1);
  double reward = 0;
  std::uint64_t steps = 0;
  while (steps < kRandomSlots) {
    const auto m = run_episodes(env, agent, 1, kRandomSlots - steps).front();
    reward += m.total_reward;
    steps += m.steps;
  }
  const double mean = reward / static_cast<double>(steps);
  std::ostringstream d;
  d << "mean=" << mean << " over " << steps << " slots, target " << kRandomMean << "+-" << kRandomTolerance;
  return {std::abs(mean - kRandomMean) <= kRandomTolerance, d.str()};
}

Outcome q_learning() {
  std::ostringstream d;
  bool all = true;
  int canonical = 0;
  for (std::uint64_t seed = 1; seed <= kQSeeds; ++seed) {
    LocalEnv env(envs::factory("interference-pattern"), {{"seed", std::to_string(seed)}});
    ChannelQAgent agent(4, seed);
    std::deque<bool> window;
    std::uint64_t converged_at = 0;
    for (std::uint64_t e = 0; e < kQMaxEpisodes && converged_at == 0; ++e) {
      DataContainer obs = env.reset();
      agent.begin_episode(e);
      EpisodeMetrics m;
      m.episode = e;
      bool done = false;
      while (!done) {
        DataContainer a = agent.act(obs);
        StepResult r = env.step(a);
        ++m.steps;
        window.push_back(r.reward < 0);
        if (window.size() > kQWindow) window.pop_front();
        agent.observe({obs, a, r.reward, r.observation, r.done});
        obs = std::move(r.observation);
        done = r.done;
      }
      agent.end_episode(m);
      if (window.size() == kQWindow && std::count(window.begin(), window.end(), true) == 0) converged_at = e + 1;
    }
    // The greedy policy must pick a slot-optimal action in every state: any
    // channel other than the one the sweep occupies next scores +1.
    bool greedy_ok = true;
    bool is_canonical = true;
    for (std::size_t s = 0; s < 4; ++s) {
      const auto a = agent.table().greedy(s);
      if (a == (s + 1) % 4) greedy_ok = false;
      if (static_cast<std::int64_t>(a) != oracle_action(s, 4)) is_canonical = false;
    }
    canonical += is_canonical ? 1 : 0;
    all = all && converged_at != 0 && greedy_ok;
    d << "seed" << seed << ":ep=" << converged_at << (greedy_ok ? "" : ",greedy-collides") << " ";
  }
  d << "canonical-oracle-match=" << canonical << "/" << kQSeeds;
  return {all, d.str()};
}

Outcome game_over_rule() {
  LocalEnv env(envs::factory("interference-pattern"), {});
  DataContainer obs = env.reset();
  std::uint64_t steps = 0;
  StepResult r;
  do {
    r = env.step(make_discrete(static_cast<std::int64_t>((occupied_channel_index(obs) + 1) % 4)));
    obs = r.observation;
    ++steps;
  } while (!r.done);
  auto* e = dynamic_cast<envs::InterferencePatternEnv*>(env.session().environment());
  const bool adversarial_ok = steps == 4 && r.done_reason == DoneReason::kGameOver && e && e->current_slot() == 5;

  bool fixed_ok = true;
  for (std::int64_t ch = 0; ch < 4 && fixed_ok; ++ch) {
    LocalEnv fixed(envs::factory("interference-pattern"), {{"sim_time_s", "1001"}});
    fixed.reset();
    for (std::uint64_t i = 0; i < kFixedChannelSlots; ++i) {
      if (fixed.step(make_discrete(ch)).done) {
        fixed_ok = false;
        break;
      }
    }
  }
  std::ostringstream d;
  d << "adversarial ended after " << steps << " scored slots (" << done_reason_name(r.done_reason)
    << "); fixed channels " << (fixed_ok ? "never" : "did") << " game over in " << kFixedChannelSlots << " slots";
  return {adversarial_ok && fixed_ok, d.str()};
}

Outcome graded_cw_wins() {
  models::MeshConfig config;
  const auto pairs = bench::compare_cw_seeds(config, netgym::graded_cw(config.num_nodes), bench::kUniformCandidates,
                                             kCwSlots, 1, kCwSeeds);
  const auto wins = bench::graded_wins(pairs);
  std::ostringstream d;
  d << "graded wins " << wins << "/" << kCwSeeds << " (need " << kCwMinWins << ");";
  for (const auto& p : pairs) d << " " << p.graded << ">" << p.uniform << "@" << p.uniform_cw;
  return {wins >= kCwMinWins, d.str()};
}

const std::set<std::string> kErrorCodes = {"bad_state",   "episode_over", "action_rejected", "hook_failure", "bad_args",
                                           "parse_error", "protocol_error", "size_error",     "internal"};

std::string mutate(std::string bytes, RngStream& rng) {
  const auto n = rng.uniform_int(1, 4);
  for (std::int64_t k = 0; k < n; ++k) {
    switch (rng.below(4)) {
      case 0:
        if (!bytes.empty()) bytes[rng.below(bytes.size())] = static_cast<char>(rng.below(256));
        break;
      case 1: bytes.resize(rng.below(bytes.size() + 1)); break;
      case 2: bytes.insert(rng.below(bytes.size() + 1), 1, static_cast<char>(rng.below(256))); break;
      default:
        if (!bytes.empty()) bytes.erase(rng.below(bytes.size()), 1);
        break;
    }
  }
  return bytes;
}

// Sends a live episode prefix plus mutated bytes to a real serve() loop, then
// half-closes. The server must answer every whole frame and return.
bool fuzz_over_socket(const std::string& bytes) {
  std::promise<std::uint16_t> bound;
  auto port = bound.get_future();
  int result = -1;
  std::thread server([&] {
    ServeOptions opts;
    opts.port = 0;
    opts.announce = nullptr;
    opts.on_listening = [&](std::uint16_t p) { bound.set_value(p); };
    result = serve(envs::factory("interference-pattern"), {}, opts);
  });
  TcpStream s = connect(Endpoint{"127.0.0.1", port.get()}, std::chrono::seconds(5));
  s.write_all(encode(InitReq{}) + encode(ResetReq{}) + bytes);
  ::shutdown(s.native_handle(), SHUT_WR);
  std::string payload;
  bool classified = true;
  while (s.read_frame(payload) == ReadStatus::kFrame) {
    const Message reply = decode_payload(payload);
    if (const auto* e = std::get_if<ErrorResp>(&reply)) classified = classified && kErrorCodes.contains(e->code);
  }
  server.join();
  return classified && (result == 0 || result == 1);
}

Outcome protocol_conformance() {
  const std::string golden = std::string(NETGYM_GOLDEN_DIR) + "/" + testkit::kGoldenFile;
  const auto records = testkit::parse_transcript(testkit::read_file(golden));
  EnvSession replay(envs::factory("interference-pattern"));
  for (std::size_t i = 0; i + 1 < records.size(); i += 2) {
    if (records[i].direction != 'C' || records[i + 1].direction != 'S') return {false, "malformed transcript"};
    if (encode(replay.handle_payload(std::string_view(records[i].frame).substr(4))) != records[i + 1].frame) {
      return {false, "golden mismatch at record " + std::to_string(i + 1)};
    }
  }

  // Mutated frames go through the server's framing and dispatch path.
  std::vector<std::string> corpus;
  for (const auto& r : records) corpus.push_back(r.frame);
  RngStream rng(4242, 0);
  int replies = 0, errors = 0, framing = 0;
  for (int i = 0; i < kFuzzCases; ++i) {
    const std::string bytes = mutate(corpus[rng.below(corpus.size())], rng);
    // a fresh session part-way through an episode so step frames are live
    EnvSession session(envs::factory("interference-pattern"));
    session.handle(InitReq{});
    session.handle(ResetReq{});
    FrameReader reader;
    reader.feed(bytes);
    try {
      while (auto payload = reader.next()) {
        const Message reply = session.handle_payload(*payload);
        if (const auto* e = std::get_if<ErrorResp>(&reply)) {
          if (!kErrorCodes.contains(e->code)) return {false, "unclassified error code " + e->code};
          ++errors;
        } else {
          ++replies;
        }
        encode(reply);
      }
      if (reader.buffered() > 0) ++framing;
    } catch (const SizeError&) {
      ++framing;
    }
  }
  for (int i = 0; i < kSocketFuzzCases; ++i) {
    if (!fuzz_over_socket(mutate(corpus[rng.below(corpus.size())], rng))) {
      return {false, "socket fuzz case " + std::to_string(i)};
    }
  }
  std::ostringstream d;
  d << records.size() << " golden records exact; fuzz " << kFuzzCases << " cases: " << replies << " replies, "
    << errors << " error_resp, " << framing << " framing/size; " << kSocketFuzzCases << " over tcp";
  return {true, d.str()};
}

std::string run_to_file(const std::string& args, const std::string& out) {
  const std::string cmd = std::string("'") + NETGYM_BINARY_PATH + "' " + args + " --metrics-out '" + out +
                          "' --log-level error > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw std::runtime_error("command failed: " + cmd);
  }
  return testkit::read_file(out);
}

Outcome cli_determinism() {
  const auto dir = std::filesystem::temp_directory_path() / ("netgym-accept-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::string args = "agent --spawn interference-pattern --agent oracle --episodes 5 --seed 11";
  const auto a = run_to_file(args, (dir / "a.csv").string());
  const auto b = run_to_file(args, (dir / "b.csv").string());
  const std::string rargs = "agent --spawn interference-pattern --agent random --episodes 5 --seed 11";
  const auto c = run_to_file(rargs, (dir / "c.csv").string());
  const auto d = run_to_file(rargs, (dir / "d.csv").string());
  std::filesystem::remove_all(dir);
  const auto rows = std::count(a.begin(), a.end(), '\n');
  const bool ok = a == b && c == d && rows == 6;
  return {ok, "oracle csv " + std::string(a == b ? "identical" : "differs") + ", random csv " +
                  (c == d ? "identical" : "differs") + ", " + std::to_string(rows) + " lines"};
}

Outcome round_trip() {
  RngStream rng(9001, 0);
  for (int i = 0; i < kRoundTripCases; ++i) {
    const SpaceSpec space = testkit::random_space(rng);
    const DataContainer c = sample(space, rng);
    const Message init = InitResp{space, space};
    const Message reset = ResetResp{c};
    const Message back_init = decode(encode(init));
    const Message back_reset = decode(encode(reset));
    if (back_init != init || back_reset != reset) return {false, "case " + std::to_string(i) + " changed"};
    if (!conforms(std::get<ResetResp>(back_reset).observation, std::get<InitResp>(back_init).observation_space)) {
      return {false, "case " + std::to_string(i) + " no longer conforms"};
    }
  }
  return {true, std::to_string(kRoundTripCases) + " trees"};
}

}  // namespace

int main() {
  log::set_level(log::Level::kOff);
  report("interference-pattern-fidelity", sense_fidelity);
  report("oracle-policy-optimality", oracle_optimality);
  report("random-policy-baseline", random_baseline);
  report("q-learning-convergence", q_learning);
  report("game-over-rule", game_over_rule);
  report("graded-cw-beats-uniform", graded_cw_wins);
  report("protocol-conformance", protocol_conformance);
  report("cli-determinism", cli_determinism);
  report("space-round-trip", round_trip);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
