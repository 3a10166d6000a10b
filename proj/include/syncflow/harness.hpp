#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "syncflow/demo.hpp"
#include "syncflow/graph.hpp"
#include "syncflow/runtime.hpp"
#include "syncflow/transport.hpp"

namespace syncflow {

enum ExitCode : int { kExitOk = 0, kExitFault = 1, kExitConfig = 2, kExitConformance = 3 };

inline constexpr double kMaxAsyncRtf = 32.0;

struct ExperimentConfig {
  std::string graph;  // graph document path; empty uses the built-in pendulum graph
  SyncMode mode = SyncMode::synchronized;
  std::vector<double> target_rtf = {1.0, 5.0, 0.0};
  std::size_t runs = 5;
  double episode_seconds = 2.0;
  std::string out;  // metrics CSV
  std::uint64_t seed = 0;

  // Probe and scripted input of the variance sweep.
  double probe_time = 2.0;
  double tape_amplitude = 2.0;
  double tape_frequency = 1.5;

  // Speedup experiment.
  double callback_cost = 0.005;
  std::string cost_mode = "sleep";
  std::size_t speedup_steps = 90;

  /// Throws ConfigError. `variance` additionally requires runs >= 2.
  void validate(bool variance = false) const;

  /// Keys present in `j` replace the corresponding fields.
  void merge(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct MetricsRecord {
  std::string setting_id;
  SyncMode mode = SyncMode::synchronized;
  double target_rtf = 0.0;
  std::size_t run = 0;
  double sin_theta = 0.0;
  double variance = 0.0;
  double realized_rtf = 0.0;
  std::uint64_t episode_hash = 0;
};

/// Column order of the metrics CSV.
inline constexpr const char* kMetricsColumns =
    "setting_id,mode,target_rtf,run,sin_theta_t2,variance,realized_rtf,episode_hash";

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const MetricsRecord& r);

std::string setting_id(SyncMode mode, double target_rtf);

/// Population variance; 0 for fewer than two values.
double variance(const std::vector<double>& xs);

/// Runs `runs` episodes per target rtf with a sinusoidal action tape and
/// records sin(theta) of the engine state at `probe_time`. Rows of finished
/// settings go to `csv` as they complete; a fault leaves those in place and
/// rethrows.
std::vector<MetricsRecord> run_variance_sweep(const ExperimentConfig& config, std::ostream* csv = nullptr);

struct SpeedupReport {
  std::vector<MetricsRecord> baseline;
  std::vector<MetricsRecord> delayed;
  double baseline_rtf = 0.0;  // mean over runs
  double delayed_rtf = 0.0;
  double ratio() const { return baseline_rtf > 0.0 ? delayed_rtf / baseline_rtf : 0.0; }
};

/// Engine plus controller, each burning `callback_cost`, run unthrottled for
/// `speedup_steps` engine steps with and without one period of actuator delay.
SpeedupReport run_delay_speedup(const ExperimentConfig& config, std::ostream* csv = nullptr);

struct RandomGraph {
  std::vector<NodeSpec> nodes;  // nodes[0] is the fastest node
};

/// Random multi-rate graph on 2..max_nodes nodes with rates in [1, 200] Hz.
/// Nodes are ordered randomly; edges along the order are plain, edges against
/// it are cyclic, so every cycle holds a skip edge. Each node gets one input
/// from its predecessor (the first from the last) plus random extras.
RandomGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes = 6);

/// Builds a runtime of null nodes for `g`.
std::unique_ptr<GraphRuntime> instantiate(const RandomGraph& g, RuntimeOptions options = {});

struct ConformanceReport {
  std::uint64_t acyclic_pass = 0, acyclic_fail = 0;
  std::uint64_t cyclic_pass = 0, cyclic_fail = 0;
  std::uint64_t live_pass = 0, live_fail = 0;
  std::optional<std::string> counterexample;
  bool ok() const { return acyclic_fail == 0 && cyclic_fail == 0 && live_fail == 0; }
};

/// `cases` random timings per channel kind (rates in [0.5, 500] Hz, delays
/// in [0, 3 / f_i]), formulas against the timeline
/// oracle for k <= 100. Every cyclic timing also runs as a two-node loop for
/// 100 steps on the cooperative driver. Throws ConfigError for cases == 0.
ConformanceReport run_conformance(std::uint64_t seed, std::uint64_t cases);

struct LivenessReport {
  std::uint64_t finished = 0;
  std::uint64_t failed = 0;
  std::optional<std::string> first_failure;
};

/// Runs `graphs` random graphs for `steps` steps of their fastest node.
LivenessReport run_liveness(std::uint64_t seed, std::uint64_t graphs, std::uint64_t steps = 100,
                            Driver driver = Driver::threaded);

void print_report(std::ostream& out, const ConformanceReport& r);

}  // namespace syncflow
