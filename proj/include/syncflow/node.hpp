#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "syncflow/protocol.hpp"

namespace syncflow {

using Payload = Eigen::VectorXd;
using StateValues = std::map<std::string, double>;

struct Envelope {
  Payload payload;
  std::uint64_t seq = 0;
  double sim_time_sent = 0.0;
};

/// An input channel as seen by the consuming node.
struct ChannelSpec {
  std::string name;       // input port on the consumer
  std::string source;     // "node/port" of the producer, filled in by resolve
  double producer_rate = 0.0;
  double delay = 0.0;
  std::size_t window = 1;
  bool cyclic = false;
  int size = 1;

  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

struct OutputSpec {
  std::string name;
  int size = 1;

  friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

struct NodeSpec {
  std::string name;
  std::string kind;
  double rate = 0.0;
  std::vector<ChannelSpec> inputs;
  std::vector<OutputSpec> outputs;
  std::vector<std::string> states;
  nlohmann::json params = nlohmann::json::object();

  std::optional<std::size_t> input_index(std::string_view port) const;
  std::optional<std::size_t> output_index(std::string_view port) const;

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

enum class Phase { resetting, running, stopped };

/// Messages handed to a callback for one input channel.
struct InputMessages {
  std::vector<Envelope> consumed;  // exactly delta, oldest first
  std::vector<Payload> window;     // last `window` messages, left-padded
};

class ParameterStore;
class Throttle;
class Telemetry;

/// Shared facilities a host hands to every callback. Any may be null.
struct RuntimeServices {
  ParameterStore* params = nullptr;
  const Throttle* throttle = nullptr;
  Telemetry* telemetry = nullptr;
};

struct CallbackContext {
  std::uint64_t k = 0;
  double sim_time = 0.0;
  std::span<const InputMessages> inputs;
  const NodeSpec* spec = nullptr;
  ParameterStore* params = nullptr;
  const Throttle* throttle = nullptr;
  Telemetry* telemetry = nullptr;

  const InputMessages& input(std::string_view port) const;
  /// Most recent payload in the channel's window.
  const Payload& latest(std::string_view port) const { return input(port).window.back(); }
};

/// User extension point: one instance per node, driven by its runtime.
class NodeBehavior {
 public:
  virtual ~NodeBehavior() = default;
  /// Returns one payload per declared output, in declaration order.
  virtual std::vector<Payload> callback(const CallbackContext& ctx) = 0;
  virtual void reset(const StateValues& /*values*/) {}
};

/// Adapts a lambda into a NodeBehavior.
class FunctionBehavior : public NodeBehavior {
 public:
  using Callback = std::function<std::vector<Payload>(const CallbackContext&)>;
  using ResetHook = std::function<void(const StateValues&)>;

  explicit FunctionBehavior(Callback cb, ResetHook reset = {})
      : cb_(std::move(cb)), reset_(std::move(reset)) {}

  std::vector<Payload> callback(const CallbackContext& ctx) override { return cb_(ctx); }
  void reset(const StateValues& values) override {
    if (reset_) reset_(values);
  }

 private:
  Callback cb_;
  ResetHook reset_;
};

/// Inputs popped for callback k, waiting to be run.
struct FireTicket {
  std::uint64_t k = 0;
  std::vector<InputMessages> inputs;
  std::vector<std::uint64_t> expected;
};

struct Fired {
  std::uint64_t k = 0;
  std::vector<std::vector<Envelope>> consumed;
  std::vector<Envelope> outputs;  // one per output port
};

struct FireRecord {
  std::uint64_t k = 0;
  std::vector<std::uint64_t> expected;
  std::vector<std::size_t> buffered_before;
  std::vector<std::uint64_t> consumed_seqs;
};

struct NodeCounters {
  std::uint64_t fires = 0;
  std::vector<std::uint64_t> received;
  std::vector<std::uint64_t> consumed;
};

inline constexpr std::size_t kDefaultHighWater = 10'000;

/// Per-node protocol state machine: buffers, callback index, gating.
///
/// Not internally synchronized. Hosts serialize on_message against
/// prepare_fire/complete_fire; run_callback touches only the behavior and may
/// run without the host lock.
class NodeRuntime {
 public:
  NodeRuntime(NodeSpec spec, std::unique_ptr<NodeBehavior> behavior,
              double epsilon = kDefaultEpsilon);

  const NodeSpec& spec() const noexcept { return spec_; }
  NodeBehavior& behavior() noexcept { return *behavior_; }
  Phase phase() const noexcept { return phase_; }
  std::uint64_t k() const noexcept { return k_; }
  std::size_t buffered(std::size_t input) const { return buffers_.at(input).size(); }
  const NodeCounters& counters() const noexcept { return counters_; }
  std::uint64_t trace_hash() const noexcept { return trace_hash_; }
  bool high_water_exceeded() const noexcept { return high_water_hit_; }
  const std::vector<FireRecord>& fire_log() const noexcept { return fire_log_; }

  void set_fire_logging(bool on) { log_fires_ = on; }
  void set_high_water(std::size_t n) { high_water_ = n; }

  /// Appends to B_i. Throws TransportViolation on a sequence gap or reorder.
  void on_message(std::size_t input, Envelope env);

  /// Expected count for channel `input` at the current k.
  std::uint64_t expected(std::size_t input) const;

  /// Gate check; pops exactly delta_i oldest messages per channel if every
  /// buffer holds enough. Returns nullopt (Waiting) otherwise.
  std::optional<FireTicket> prepare_fire();

  /// Unsynchronized variant: pops everything buffered.
  std::optional<FireTicket> prepare_drain();

  /// Runs the behavior for a prepared ticket (plus injected compute cost).
  std::vector<Payload> run_callback(const FireTicket& ticket,
                                    const RuntimeServices& services = {});

  /// Stamps outputs (seq, sim_time_sent = k / f_n) and advances k.
  Fired complete_fire(FireTicket ticket, std::vector<Payload> outputs);

  /// prepare + run + complete in one call. Callback exceptions stop the node
  /// and propagate.
  std::optional<Fired> try_fire(const RuntimeServices& services = {});

  /// New episode: k = 0, buffers emptied, reset hook invoked, phase running.
  /// Throws ConfigError naming any key not registered as a state.
  void reset(const StateValues& values);

  void set_input_delay(std::size_t input, double delay);
  void stop() noexcept { phase_ = Phase::stopped; }

 private:
  void rebuild_timing(std::size_t input);
  void absorb(std::size_t input, InputMessages& msgs, std::size_t count);

  NodeSpec spec_;
  std::unique_ptr<NodeBehavior> behavior_;
  double epsilon_;
  Phase phase_ = Phase::stopped;
  std::uint64_t k_ = 0;

  std::vector<std::deque<Envelope>> buffers_;
  std::vector<std::deque<Payload>> history_;
  std::vector<QuantizedTiming> timing_;
  std::vector<std::optional<std::uint64_t>> last_seq_;
  std::vector<std::uint64_t> next_out_seq_;

  NodeCounters counters_;
  std::uint64_t trace_hash_;
  std::size_t high_water_ = kDefaultHighWater;
  bool high_water_hit_ = false;
  bool log_fires_ = false;
  std::vector<FireRecord> fire_log_;
};

}  // namespace syncflow
