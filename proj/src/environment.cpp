#include "syncflow/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "syncflow/errors.hpp"
#include "syncflow/hash.hpp"
#include "syncflow/pendulum.hpp"

namespace syncflow {

double Distribution::sample(std::mt19937_64& rng) const {
  if (kind == Kind::constant) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void EpisodeConfig::validate() const {
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  for (const Randomization& r : randomizations) {
    if (!std::isfinite(r.dist.lo) || !std::isfinite(r.dist.hi) || r.dist.lo > r.dist.hi) {
      throw ConfigError("randomization '" + r.path + "' needs finite lo <= hi");
    }
  }
  for (const DelayRandomization& d : delays) {
    if (!std::isfinite(d.base) || !std::isfinite(d.half_width) || d.half_width < 0.0 ||
        d.base - d.half_width < 0.0) {
      throw ConfigError("delay randomization on '" + d.edge + "' needs 0 <= base - half_width");
    }
  }
}

class Rendezvous {
 public:
  void open(std::uint64_t last_k) {
    std::lock_guard lock(mutex_);
    closed_ = false;
    obs_.reset();
    action_.reset();
    last_k_ = last_k;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::uint64_t last_k() const {
    std::lock_guard lock(mutex_);
    return last_k_;
  }

  void post_observation(std::uint64_t k, Observation obs) {
    {
      std::lock_guard lock(mutex_);
      obs_.emplace(k, std::move(obs));
    }
    cv_.notify_all();
  }

  void post_action(Action action) {
    {
      std::lock_guard lock(mutex_);
      action_ = std::move(action);
    }
    cv_.notify_all();
  }

  Action await_action() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return action_.has_value() || closed_; });
    if (!action_) throw Interrupted();
    Action a = std::move(*action_);
    action_.reset();
    return a;
  }

  std::optional<std::pair<std::uint64_t, Observation>> await_observation() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return obs_.has_value() || closed_; });
    auto out = std::move(obs_);
    obs_.reset();
    return out;
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  bool closed_ = true;
  std::optional<std::pair<std::uint64_t, Observation>> obs_;
  std::optional<Action> action_;
  std::uint64_t last_k_ = 0;
};

namespace {

class EnvNode : public NodeBehavior {
 public:
  EnvNode(const NodeSpec& spec, std::shared_ptr<Rendezvous> rv) : spec_(spec), rv_(std::move(rv)) {}

  std::vector<Payload> callback(const CallbackContext& ctx) override {
    if (ctx.k == 0) return zeros();
    Observation obs;
    for (std::size_t i = 0; i < spec_.inputs.size(); ++i) obs[spec_.inputs[i].name] = ctx.inputs[i].window;
    rv_->post_observation(ctx.k, std::move(obs));
    if (ctx.k >= rv_->last_k()) return zeros();
    Action a = rv_->await_action();
    std::vector<Payload> out;
    for (const OutputSpec& o : spec_.outputs) out.push_back(a.at(o.name));
    return out;
  }

 private:
  std::vector<Payload> zeros() const {
    std::vector<Payload> out;
    for (const OutputSpec& o : spec_.outputs) out.push_back(Payload::Zero(o.size));
    return out;
  }

  NodeSpec spec_;
  std::shared_ptr<Rendezvous> rv_;
};

std::string normalized_edge(const std::string& source, const std::string& target) {
  return EndpointRef::parse(source).str() + " -> " + EndpointRef::parse(target).str();
}

}  // namespace

Environment::Environment(GraphSpec graph, EngineSpec engine, Registry registry, EnvOptions options)
    : spec_(std::move(graph)),
      registry_(std::move(registry)),
      options_(std::move(options)),
      rendezvous_(std::make_shared<Rendezvous>()) {
  graph_ = resolve(spec_, engine, registry_);
  auto rv = rendezvous_;
  runtime_ = build_runtime(graph_, registry_, options_.runtime, nullptr,
                           [rv](const NodeSpec& s) -> std::unique_ptr<NodeBehavior> {
                             if (s.kind == "environment") return std::make_unique<EnvNode>(s, rv);
                             return nullptr;
                           });
  runtime_->set_terminal_hook([rv] { rv->close(); });
}

Environment::~Environment() { shutdown(); }

void Environment::shutdown() {
  active_ = false;
  if (runtime_) runtime_->stop();
}

double Environment::sim_time() const { return static_cast<double>(env_k_) / spec_.env_rate; }

Action Environment::zero_action() const {
  Action a;
  for (const PortSpec& p : spec_.actions) a[p.name] = Payload::Zero(p.size);
  return a;
}

Observation Environment::await_observation() {
  auto got = rendezvous_->await_observation();
  if (!got) {
    active_ = false;
    runtime_->stop();
    runtime_->rethrow_if_faulted();
    throw EpisodeFault("episode ended before the next observation");
  }
  env_k_ = got->first;
  return std::move(got->second);
}

Info Environment::make_info() const {
  Info info;
  info["k"] = env_k_;
  info["sim_time"] = sim_time();
  info["step"] = steps_;
  info["seed"] = config_.seed;
  return info;
}

std::pair<Observation, Info> Environment::reset(const EpisodeConfig& config) {
  config.validate();
  runtime_->stop();
  active_ = false;
  config_ = config;
  steps_ = 0;
  env_k_ = 0;

  std::mt19937_64 rng(config.seed);
  std::map<std::string, StateValues> states;
  sampled_states_.clear();
  sampled_delays_.clear();
  for (const Randomization& r : config.randomizations) {
    const auto it = std::find_if(graph_.state_paths.begin(), graph_.state_paths.end(),
                                 [&](const auto& p) { return p.first == r.path; });
    if (it == graph_.state_paths.end()) {
      throw ConfigError("no registered state '" + r.path + "'");
    }
    const double v = r.dist.sample(rng);
    states[it->second.first][it->second.second] = v;
    sampled_states_[r.path] = v;
    params().set(r.path, v);
  }

  // Delays go back to their declared values, then the randomized ones are drawn.
  std::map<std::size_t, double> delay_for;
  for (std::size_t i = 0; i < spec_.edges.size(); ++i) delay_for[i] = spec_.edges[i].delay;
  for (const DelayRandomization& d : config.delays) {
    std::optional<std::size_t> idx;
    const auto arrow = d.edge.find("->");
    if (arrow != std::string::npos) {
      auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(' '));
        s.erase(s.find_last_not_of(' ') + 1);
        return s;
      };
      const std::string want = normalized_edge(trim(d.edge.substr(0, arrow)), trim(d.edge.substr(arrow + 2)));
      for (std::size_t i = 0; i < spec_.edges.size(); ++i) {
        if (normalized_edge(spec_.edges[i].source, spec_.edges[i].target) == want) idx = i;
      }
    }
    if (!idx) throw ConfigError("delay randomization names unknown edge '" + d.edge + "'");
    const double tau = Distribution::uniform(d.base - d.half_width, d.base + d.half_width).sample(rng);
    delay_for[*idx] = tau;
    sampled_delays_[d.edge] = tau;
    params().set("delays/" + std::to_string(*idx), tau);
  }
  for (const ConcreteEdge& e : graph_.edges) {
    if (!e.agnostic_edge) continue;
    const auto node = runtime_->find(e.target_node);
    const auto input = runtime_->node(*node).spec().input_index(e.target_port);
    runtime_->set_channel_delay(*node, *input, delay_for.at(*e.agnostic_edge));
  }

  try {
    runtime_->reset(states);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw EpisodeFault(std::string("episode start failed: ") + e.what());
  }

  rendezvous_->open(config.max_steps + 1);
  runtime_->start(Horizon{config.max_steps + 1, spec_.env_rate});
  Observation obs = await_observation();
  active_ = true;

  Info info = make_info();
  info["sampled_states"] = sampled_states_;
  info["sampled_delays"] = sampled_delays_;
  return {std::move(obs), std::move(info)};
}

StepResult Environment::step(const Action& action) {
  if (!active_) throw std::logic_error("no active episode; call reset() first");
  if (action.size() != spec_.actions.size()) {
    throw std::invalid_argument("action has " + std::to_string(action.size()) + " keys, expected " +
                                std::to_string(spec_.actions.size()));
  }
  for (const PortSpec& p : spec_.actions) {
    auto it = action.find(p.name);
    if (it == action.end()) throw std::invalid_argument("action is missing key '" + p.name + "'");
    if (it->second.size() != p.size) {
      throw std::invalid_argument("action '" + p.name + "' has size " + std::to_string(it->second.size()) +
                                  ", expected " + std::to_string(p.size));
    }
    if (!it->second.allFinite()) throw std::invalid_argument("action '" + p.name + "' is not finite");
  }

  rendezvous_->post_action(action);
  StepResult r;
  r.observation = await_observation();
  ++steps_;
  r.reward = options_.reward ? options_.reward(r.observation, action) : 0.0;
  r.terminated = options_.terminate ? options_.terminate(r.observation) : false;
  r.truncated = steps_ >= config_.max_steps;
  r.info = make_info();

  if (r.truncated) {
    active_ = false;
    runtime_->wait();
    const RunStatus s = runtime_->status();
    runtime_->stop();
    if (s != RunStatus::finished) {
      runtime_->rethrow_if_faulted();
      throw EpisodeFault(std::string("episode ended with status ") + to_string(s));
    }
    r.info["trace_hash"] = to_hex(runtime_->trace_hash());
    r.info["wall_seconds"] = runtime_->wall_seconds();
  } else if (r.terminated) {
    active_ = false;
    runtime_->stop();
  }
  return r;
}

double pendulum_reward(const Observation& obs, const Action& action) {
  double th = 0.0;
  double thdot = 0.0;
  double u = 0.0;
  if (auto it = obs.find("th"); it != obs.end() && !it->second.empty()) th = it->second.back()(0);
  if (auto it = obs.find("thdot"); it != obs.end() && !it->second.empty()) thdot = it->second.back()(0);
  if (auto it = action.find("volt"); it != action.end() && it->second.size() > 0) u = it->second(0);
  const double err = wrap_angle(th - std::numbers::pi);
  return -(err * err + 0.1 * thdot * thdot + 0.001 * u * u);
}

std::uint64_t hash_records(const std::vector<StepRecord>& records) {
  Fnv1a h;
  for (const StepRecord& r : records) {
    h.u64(r.step);
    for (const auto& [k, v] : r.action) h.str(k).vec(v);
    for (const auto& [k, w] : r.observation) {
      h.str(k).u64(w.size());
      for (const Payload& p : w) h.vec(p);
    }
    h.f64(r.reward);
  }
  return h.value();
}

EpisodeResult run_episode(Environment& env, const Policy& policy, const EpisodeConfig& config) {
  EpisodeResult result;
  auto [obs, info] = env.reset(config);
  result.records.push_back(StepRecord{0, env.sim_time(), {}, obs, 0.0});
  bool done = false;
  while (!done) {
    const std::uint64_t step = env.steps();
    Action a = policy(obs, step);
    StepResult r = env.step(a);
    result.records.push_back(StepRecord{env.steps(), env.sim_time(), a, r.observation, r.reward});
    obs = std::move(r.observation);
    done = r.terminated || r.truncated;
  }
  env.shutdown();
  result.hash = hash_records(result.records);
  result.wall_seconds = env.runtime().wall_seconds();
  result.sim_seconds = env.sim_time();
  result.trace_hash = env.runtime().trace_hash();
  return result;
}

void write_trajectory(std::ostream& out, const std::vector<StepRecord>& records) {
  for (const StepRecord& r : records) {
    nlohmann::json j;
    j["step"] = r.step;
    j["sim_time"] = r.sim_time;
    j["action"] = nlohmann::json::object();
    for (const auto& [k, v] : r.action) j["action"][k] = std::vector<double>(v.data(), v.data() + v.size());
    j["observation"] = nlohmann::json::object();
    for (const auto& [k, w] : r.observation) {
      auto& arr = j["observation"][k] = nlohmann::json::array();
      for (const Payload& p : w) arr.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    }
    j["reward"] = r.reward;
    out << j.dump() << '\n';
  }
}

}  // namespace syncflow
