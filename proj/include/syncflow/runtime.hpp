#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "syncflow/node.hpp"
#include "syncflow/params.hpp"
#include "syncflow/transport.hpp"

namespace syncflow {

struct StateSample {
  std::string node;
  std::uint64_t k = 0;
  double sim_time = 0.0;
  Eigen::VectorXd q;
};

struct CallbackTiming {
  std::size_t node = 0;
  std::uint64_t k = 0;
  double sim_time = 0.0;
  double wall = 0.0;  // seconds since runtime start
};

/// Measurement hooks shared by all nodes of a runtime.
class Telemetry {
 public:
  void record_state(std::string_view node, std::uint64_t k, double sim_time,
                    const Eigen::VectorXd& q);
  std::optional<StateSample> state(std::string_view node, std::uint64_t k) const;
  std::vector<StateSample> states() const;

  void record_callback(const CallbackTiming& t);
  std::vector<CallbackTiming> callbacks() const;

  void clear();

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::uint64_t>, StateSample, std::less<>> states_;
  std::vector<CallbackTiming> callbacks_;
};

enum class Driver {
  threaded,     // one execution unit per node
  cooperative,  // one worker, FIFO ready queue; deterministic interleaving
};

enum class RunStatus { idle, running, finished, stalled, faulted, stopped };

const char* to_string(RunStatus s);

struct RuntimeOptions {
  ClockMode clock;
  Driver driver = Driver::threaded;
  double epsilon = kDefaultEpsilon;
  TransportOptions transport;
  std::size_t high_water = kDefaultHighWater;
  bool log_fires = false;
  bool record_callback_times = false;
};

/// Run every node until t_k > steps / reference_hz.
struct Horizon {
  std::uint64_t steps = 0;
  double reference_hz = 1.0;
};

/// Hosts a set of NodeRuntimes and drives them.
///
/// Synchronized mode gates each callback on the expected counts; there is
/// no global clock, every node advances as soon as its inputs allow.
/// Asynchronous mode fires each node on a wall-clock timer and consumes
/// whatever is buffered.
class GraphRuntime {
 public:
  explicit GraphRuntime(RuntimeOptions options = {},
                        std::shared_ptr<ParameterStore> params = nullptr);
  ~GraphRuntime();

  GraphRuntime(const GraphRuntime&) = delete;
  GraphRuntime& operator=(const GraphRuntime&) = delete;

  std::size_t add_node(NodeSpec spec, std::unique_ptr<NodeBehavior> behavior);

  /// Subscribes every input to the output named by its `source` ("node/port").
  /// Throws ConfigError on unknown sources or size/rate disagreement.
  void wire();

  std::size_t size() const noexcept { return hosts_.size(); }
  std::optional<std::size_t> find(std::string_view name) const;
  NodeRuntime& node(std::size_t i);
  const NodeRuntime& node(std::size_t i) const;
  NodeRuntime& node(std::string_view name);

  /// Episode reset. Nodes absent from `states` reset with no values.
  void reset(const std::map<std::string, StateValues>& states = {});
  void set_channel_delay(std::size_t node, std::size_t input, double delay);

  /// Starts the driver. Nodes must have been reset.
  void start(std::optional<Horizon> horizon = std::nullopt);

  /// Blocks until the run leaves `running`, or the timeout elapses.
  RunStatus wait(std::optional<Clock::duration> timeout = std::nullopt);

  /// Halts all nodes, joins execution units, closes the transport.
  void stop();

  RunStatus status() const;
  std::string fault_message() const;
  /// Rethrows the first fault, wrapped as EpisodeFault when not one already.
  void rethrow_if_faulted() const;

  /// Called once when the run leaves `running` (any reason).
  void set_terminal_hook(std::function<void()> hook) { terminal_hook_ = std::move(hook); }

  /// Reports a fault from outside a node (first fault wins).
  void fault(const std::string& message);

  const RuntimeOptions& options() const noexcept { return options_; }
  ParameterStore& params() noexcept { return *params_; }
  std::shared_ptr<ParameterStore> shared_params() const { return params_; }
  Telemetry& telemetry() noexcept { return telemetry_; }
  Transport& transport() noexcept { return *transport_; }

  double wall_seconds() const;
  std::uint64_t limit(std::size_t node) const;

  /// Combined trace hash over all nodes in insertion order.
  std::uint64_t trace_hash() const;

 private:
  struct Host;

  void deliver(Host& h, std::size_t input, Envelope env);
  void run_threaded(Host& h);
  void run_async(Host& h);
  void run_cooperative();
  bool fire_one(Host& h, std::unique_lock<std::mutex>* lock, bool drain);
  void publish_outputs(Host& h, Fired& fired);
  void mark_done(Host& h);
  bool enter_idle();
  void finish(RunStatus s);
  std::string stall_report() const;
  void signal_stop();
  void fault_from(const Host& h, std::exception_ptr e);

  RuntimeOptions options_;
  std::shared_ptr<ParameterStore> params_;
  Telemetry telemetry_;
  Throttle throttle_;
  RuntimeServices services_;
  std::unique_ptr<Transport> transport_;
  std::vector<std::unique_ptr<Host>> hosts_;
  bool wired_ = false;

  std::atomic<bool> stop_{false};
  std::vector<std::thread> threads_;
  Clock::time_point origin_;
  Clock::time_point end_;

  mutable std::mutex status_mutex_;
  std::condition_variable status_cv_;
  RunStatus status_ = RunStatus::idle;
  std::size_t idle_ = 0;
  std::size_t done_ = 0;
  std::string fault_message_;
  std::exception_ptr fault_;
  std::function<void()> terminal_hook_;

  std::deque<Host*> ready_;  // cooperative driver only
};

}  // namespace syncflow
