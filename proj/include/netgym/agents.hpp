#pragma once

// Reference agents and the episode loop:
//   obs = env.reset(); repeat { obs, reward, done, info = env.step(agent(obs)) }.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "netgym/client.hpp"
#include "netgym/des.hpp"
#include "netgym/error.hpp"
#include "netgym/spaces.hpp"

namespace netgym {

struct EpisodeMetrics {
  std::uint64_t episode = 0;
  std::uint64_t steps = 0;
  double total_reward = 0.0;
  std::uint64_t collisions = 0;  // steps with a negative reward

  bool operator==(const EpisodeMetrics&) const = default;
};

struct Transition {
  const DataContainer& observation;
  const DataContainer& action;
  float reward;
  const DataContainer& next_observation;
  bool done;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual void begin_episode(std::uint64_t /*episode*/) {}
  virtual DataContainer act(const DataContainer& observation) = 0;
  virtual void observe(const Transition& /*t*/) {}
  virtual void end_episode(const EpisodeMetrics& /*m*/) {}
};

/// Index of the occupied channel in a one-hot occupancy observation.
inline std::size_t occupied_channel_index(const DataContainer& observation) {
  const auto* b = observation.as<BoxValue>();
  if (!b || b->size() == 0) throw ValidationError("expected a non-empty occupancy vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < b->size(); ++i) {
    if (b->at(i) > b->at(best)) best = i;
  }
  return best;
}

/// Action index for the slot after the one in which channel index `occupied`
/// (0-based) was busy: skip both the current and the next interferer channel.
inline std::int64_t oracle_action(std::size_t occupied, std::size_t num_channels) {
  return static_cast<std::int64_t>((occupied + 2) % num_channels);
}

class RandomAgent final : public Agent {
 public:
  RandomAgent(SpaceSpec action_space, std::uint64_t seed) : space_(std::move(action_space)), rng_(seed, kStream) {}
  DataContainer act(const DataContainer&) override { return sample(space_, rng_); }

 private:
  static constexpr std::uint64_t kStream = 0x5241'4E44;
  SpaceSpec space_;
  RngStream rng_;
};

class OracleChannelAgent final : public Agent {
 public:
  explicit OracleChannelAgent(std::size_t num_channels) : n_(num_channels) {}
  DataContainer act(const DataContainer& observation) override {
    return make_discrete(oracle_action(occupied_channel_index(observation), n_));
  }

 private:
  std::size_t n_;
};

class QTable {
 public:
  QTable(std::size_t states, std::size_t actions) : actions_(actions), q_(states * actions, 0.0) {
    if (states == 0 || actions == 0) throw ValidationError("QTable needs at least one state and one action");
  }

  std::size_t states() const noexcept { return q_.size() / actions_; }
  std::size_t actions() const noexcept { return actions_; }

  double& at(std::size_t s, std::size_t a) { return q_.at(s * actions_ + a); }
  double at(std::size_t s, std::size_t a) const { return q_.at(s * actions_ + a); }

  double max_value(std::size_t s) const {
    double best = at(s, 0);
    for (std::size_t a = 1; a < actions_; ++a) best = std::max(best, at(s, a));
    return best;
  }

  /// Lowest-index argmax.
  std::size_t greedy(std::size_t s) const {
    std::size_t best = 0;
    for (std::size_t a = 1; a < actions_; ++a) {
      if (at(s, a) > at(s, best)) best = a;
    }
    return best;
  }

  /// Q(s,a) += alpha * (r + gamma * max Q(s',.) * (1 - done) - Q(s,a))
  void update(std::size_t s, std::size_t a, double r, std::size_t s_next, bool done, double alpha, double gamma) {
    const double bootstrap = done ? 0.0 : gamma * max_value(s_next);
    double& q = at(s, a);
    q += alpha * (r + bootstrap - q);
    if (!std::isfinite(q)) throw RangeError("Q value became non-finite");
  }

 private:
  std::size_t actions_;
  std::vector<double> q_;
};

struct QLearningParams {
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon_start = 1.0;
  double epsilon_decay = 0.99;
  double epsilon_floor = 0.01;
};

/// Epsilon-greedy tabular Q-learning on the channel-selection task. The state
/// key is the index of the occupied channel.
class ChannelQAgent final : public Agent {
 public:
  ChannelQAgent(std::size_t num_channels, std::uint64_t seed, QLearningParams params = {})
      : params_(params), table_(num_channels, num_channels), rng_(seed, kStream), epsilon_(params.epsilon_start) {}

  DataContainer act(const DataContainer& observation) override {
    const std::size_t s = occupied_channel_index(observation);
    if (rng_.uniform01() < epsilon_) return make_discrete(static_cast<std::int64_t>(rng_.below(table_.actions())));
    const double best = table_.max_value(s);
    std::vector<std::size_t> ties;
    for (std::size_t a = 0; a < table_.actions(); ++a) {
      if (table_.at(s, a) == best) ties.push_back(a);
    }
    return make_discrete(static_cast<std::int64_t>(ties[rng_.below(ties.size())]));
  }

  void observe(const Transition& t) override {
    const auto* a = t.action.as<DiscreteValue>();
    if (!a) throw ValidationError("ChannelQAgent expects discrete actions");
    table_.update(occupied_channel_index(t.observation), static_cast<std::size_t>(a->value), t.reward,
                  occupied_channel_index(t.next_observation), t.done, params_.alpha, params_.gamma);
  }

  void end_episode(const EpisodeMetrics&) override {
    epsilon_ = std::max(params_.epsilon_floor, epsilon_ * params_.epsilon_decay);
  }

  double epsilon() const noexcept { return epsilon_; }
  const QTable& table() const noexcept { return table_; }

 private:
  static constexpr std::uint64_t kStream = 0x5154'4142;
  QLearningParams params_;
  QTable table_;
  RngStream rng_;
  double epsilon_;
};

/// Windows shrinking toward the destination: node i of n gets n-2-i, the
/// destination (which never sends) gets 0.
inline std::vector<std::uint32_t> graded_cw(std::uint32_t num_nodes) {
  std::vector<std::uint32_t> cw(num_nodes, 0);
  for (std::uint32_t i = 0; i + 1 < num_nodes; ++i) cw[i] = num_nodes - 2 - i;
  return cw;
}

class FixedCwAgent final : public Agent {
 public:
  explicit FixedCwAgent(std::vector<std::uint32_t> cw) : cw_(std::move(cw)) {}
  DataContainer act(const DataContainer&) override { return make_box<std::uint32_t>({static_cast<std::uint32_t>(cw_.size())}, cw_); }

 private:
  std::vector<std::uint32_t> cw_;
};

/// Episode-level hill climbing over per-node windows: each episode plays one
/// candidate vector, keeps it if it earned more than the incumbent, and then
/// perturbs the incumbent at one random node.
class HillClimbCwAgent final : public Agent {
 public:
  HillClimbCwAgent(std::vector<std::uint32_t> start, std::uint32_t cw_max, std::uint64_t seed)
      : best_(start), candidate_(std::move(start)), cw_max_(cw_max), rng_(seed, kStream) {
    if (candidate_.size() < 2) throw ValidationError("hill climbing needs at least two nodes");
  }

  DataContainer act(const DataContainer&) override {
    return make_box<std::uint32_t>({static_cast<std::uint32_t>(candidate_.size())}, candidate_);
  }

  void end_episode(const EpisodeMetrics& m) override {
    if (!best_reward_ || m.total_reward > *best_reward_) {
      best_reward_ = m.total_reward;
      best_ = candidate_;
    }
    candidate_ = best_;
    const auto node = rng_.below(candidate_.size() - 1);
    auto& w = candidate_[node];
    if (rng_.bernoulli(0.5)) {
      w = std::min(cw_max_, w * 2 + 1);
    } else {
      w /= 2;
    }
  }

  const std::vector<std::uint32_t>& best() const noexcept { return best_; }

 private:
  static constexpr std::uint64_t kStream = 0x4843'4C42;
  std::vector<std::uint32_t> best_;
  std::vector<std::uint32_t> candidate_;
  std::uint32_t cw_max_;
  std::optional<double> best_reward_;
  RngStream rng_;
};

using MetricsSink = std::function<void(const EpisodeMetrics&)>;

/// Runs `episodes` episodes of at most `max_steps` steps each (0 = until done).
/// The sink sees each row as soon as its episode ends, so a transport failure
/// mid-run still leaves the completed rows flushed.
template <typename Env>
std::vector<EpisodeMetrics> run_episodes(Env& env, Agent& agent, std::uint64_t episodes, std::uint64_t max_steps,
                                         const MetricsSink& sink = {}) {
  std::vector<EpisodeMetrics> out;
  out.reserve(episodes);
  for (std::uint64_t e = 0; e < episodes; ++e) {
    agent.begin_episode(e);
    EpisodeMetrics m;
    m.episode = e;
    DataContainer obs = env.reset();
    bool done = false;
    while (!done && (max_steps == 0 || m.steps < max_steps)) {
      DataContainer action = agent.act(obs);
      StepResult r = env.step(action);
      ++m.steps;
      m.total_reward += r.reward;
      if (r.reward < 0) ++m.collisions;
      done = r.done;
      agent.observe(Transition{obs, action, r.reward, r.observation, r.done});
      obs = std::move(r.observation);
    }
    agent.end_episode(m);
    if (sink) sink(m);
    out.push_back(m);
  }
  return out;
}

class CsvMetricsWriter {
 public:
  explicit CsvMetricsWriter(std::ostream& os) : os_(os) { os_ << "episode,steps,total_reward,collisions\n"; }

  void write(const EpisodeMetrics& m) {
    os_ << m.episode << ',' << m.steps << ',' << format_reward(m.total_reward) << ',' << m.collisions << '\n';
    os_.flush();
  }

  static std::string format_reward(double r) {
    if (r == std::trunc(r) && std::abs(r) < 1e15) return std::to_string(static_cast<long long>(r));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", r);
    return buf;
  }

 private:
  std::ostream& os_;
};

}  // namespace netgym
