#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "syncflow/graph.hpp"
#include "syncflow/registry.hpp"
#include "syncflow/runtime.hpp"

namespace syncflow {

/// Per-channel window, oldest first.
using Observation = std::map<std::string, std::vector<Payload>>;
using Action = std::map<std::string, Payload>;
using Info = nlohmann::json;

struct Distribution {
  enum class Kind { uniform, constant };
  Kind kind = Kind::constant;
  double lo = 0.0;
  double hi = 0.0;

  static Distribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static Distribution constant(double v) { return {Kind::constant, v, v}; }
  double sample(std::mt19937_64& rng) const;
};

struct Randomization {
  std::string path;  // "<node or object>/<state>"
  Distribution dist;
};

/// Resamples one agnostic edge's delay each episode in [base - hw, base + hw].
struct DelayRandomization {
  std::string edge;  // "<source> -> <target>", as written in the graph
  double base = 0.0;
  double half_width = 0.0;
};

struct EpisodeConfig {
  std::uint64_t seed = 0;
  std::vector<Randomization> randomizations;
  std::uint64_t max_steps = 100;
  std::vector<DelayRandomization> delays;

  /// Throws ConfigError: lo <= hi, finite bounds, base - hw >= 0, max_steps >= 1.
  void validate() const;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  Info info;
};

using RewardFn = std::function<double(const Observation&, const Action&)>;
using TerminationFn = std::function<bool(const Observation&)>;

struct EnvOptions {
  RuntimeOptions runtime;  // clock is taken from the engine spec
  RewardFn reward;         // default: 0
  TerminationFn terminate;
};

class Rendezvous;

/// Episodic interface over a resolved graph.
///
/// The environment is itself a node at env_rate: its callback k posts the
/// observation and blocks until step() supplies the action for k. reset()
/// feeds a zero action at k = 0 and returns the observation of k = 1.
class Environment {
 public:
  Environment(GraphSpec graph, EngineSpec engine, Registry registry = builtin_registry(),
              EnvOptions options = {});
  ~Environment();

  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  std::pair<Observation, Info> reset(const EpisodeConfig& config);
  StepResult step(const Action& action);
  void shutdown();

  const GraphSpec& spec() const noexcept { return spec_; }
  const ConcreteGraph& graph() const noexcept { return graph_; }
  GraphRuntime& runtime() noexcept { return *runtime_; }
  ParameterStore& params() noexcept { return runtime_->params(); }

  bool active() const noexcept { return active_; }
  std::uint64_t steps() const noexcept { return steps_; }
  double sim_time() const;
  double env_rate() const noexcept { return spec_.env_rate; }

  /// Values drawn by the last reset, keyed by state path / edge name.
  const std::map<std::string, double>& sampled_states() const noexcept { return sampled_states_; }
  const std::map<std::string, double>& sampled_delays() const noexcept { return sampled_delays_; }

  /// Zero action with the declared sizes.
  Action zero_action() const;

 private:
  Observation await_observation();
  Info make_info() const;

  GraphSpec spec_;
  Registry registry_;
  EnvOptions options_;
  ConcreteGraph graph_;
  std::shared_ptr<Rendezvous> rendezvous_;
  std::unique_ptr<GraphRuntime> runtime_;

  EpisodeConfig config_;
  bool active_ = false;
  std::uint64_t steps_ = 0;
  std::uint64_t env_k_ = 0;
  std::map<std::string, double> sampled_states_;
  std::map<std::string, double> sampled_delays_;
};

/// Default pendulum cost: -(angle_err^2 + 0.1 thetadot^2 + 0.001 u^2), with
/// angle_err the wrapped distance from upright, read from the newest "th",
/// "thdot" readings and the "volt" action.
double pendulum_reward(const Observation& obs, const Action& action);

using Policy = std::function<Action(const Observation&, std::uint64_t step)>;

struct StepRecord {
  std::uint64_t step = 0;
  double sim_time = 0.0;
  Action action;  // empty for the reset record
  Observation observation;
  double reward = 0.0;
};

struct EpisodeResult {
  std::vector<StepRecord> records;
  std::uint64_t hash = 0;
  double wall_seconds = 0.0;
  double sim_seconds = 0.0;
  std::uint64_t trace_hash = 0;

  double realized_rtf() const { return wall_seconds > 0.0 ? sim_seconds / wall_seconds : 0.0; }
};

/// Full rollout. The hash covers actions, observations and rewards.
EpisodeResult run_episode(Environment& env, const Policy& policy, const EpisodeConfig& config);

std::uint64_t hash_records(const std::vector<StepRecord>& records);

/// One JSON object per line: step, sim_time, action, observation, reward.
void write_trajectory(std::ostream& out, const std::vector<StepRecord>& records);

}  // namespace syncflow
