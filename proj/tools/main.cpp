// syncflow: experiment runner for the synchronized dataflow runtime.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>

#include "syncflow/environment.hpp"
#include "syncflow/errors.hpp"
#include "syncflow/graph_io.hpp"
#include "syncflow/harness.hpp"
#include "syncflow/hash.hpp"
#include "syncflow/policies.hpp"

using namespace syncflow;

namespace {

struct Flags {
  std::string graph;
  std::string mode = "sync";
  std::vector<double> rtf;
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
  double seconds = 0.0;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--graph", f.graph, "graph document (JSON); default is the built-in pendulum graph");
  cmd->add_option("--mode", f.mode, "sync or async")->check(CLI::IsMember({"sync", "async", "synchronized", "asynchronous"}));
  cmd->add_option("--rtf", f.rtf, "target real-time factor(s); 0 = unlimited")->delimiter(',');
  cmd->add_option("--runs", f.runs, "runs per setting");
  cmd->add_option("--seed", f.seed, "seed");
  cmd->add_option("--out", f.out, "output file");
  cmd->add_option("--config", f.config, "JSON config; its keys override flags");
  cmd->add_option("--seconds", f.seconds, "episode length in simulated seconds");
}

ExperimentConfig make_config(const Flags& f) {
  ExperimentConfig c;
  c.graph = f.graph;
  c.mode = parse_sync_mode(f.mode);
  if (!f.rtf.empty()) {
    c.target_rtf = f.rtf;
  } else if (c.mode == SyncMode::asynchronous) {
    c.target_rtf = {1.0, 4.0, 16.0};
  }
  if (f.runs > 0) c.runs = f.runs;
  c.seed = f.seed;
  c.out = f.out;
  if (f.seconds > 0.0) c.episode_seconds = f.seconds;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ConfigError("cannot open config '" + f.config + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config '" + f.config + "': " + e.what());
    }
    c.merge(j);
  }
  return c;
}

std::unique_ptr<std::ofstream> open_out(const std::string& path) {
  if (path.empty()) return nullptr;
  auto out = std::make_unique<std::ofstream>(path);
  if (!*out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

int cmd_variance(const Flags& f) {
  const ExperimentConfig c = make_config(f);
  auto file = open_out(c.out);
  std::ostream& csv = file ? *file : std::cout;
  const auto rows = run_variance_sweep(c, &csv);
  if (file) {
    for (std::size_t i = 0; i < rows.size(); i += c.runs) {
      std::cerr << rows[i].setting_id << ": variance " << rows[i].variance << ", realized rtf "
                << rows[i].realized_rtf << "\n";
    }
  }
  return kExitOk;
}

int cmd_speedup(const Flags& f, double cost, const std::string& cost_mode) {
  ExperimentConfig c = make_config(f);
  if (f.runs == 0 && f.config.empty()) c.runs = 3;
  if (cost >= 0.0) c.callback_cost = cost;
  if (!cost_mode.empty()) c.cost_mode = cost_mode;
  auto file = open_out(c.out);
  std::ostream& csv = file ? *file : std::cout;
  const SpeedupReport r = run_delay_speedup(c, &csv);
  std::cerr << "no delay: realized rtf " << r.baseline_rtf << "\n"
            << "delay:    realized rtf " << r.delayed_rtf << "\n"
            << "ratio:    " << r.ratio() << "\n";
  return kExitOk;
}

int cmd_conformance(std::uint64_t seed, std::uint64_t cases) {
  const ConformanceReport r = run_conformance(seed, cases);
  print_report(std::cout, r);
  return r.ok() ? kExitOk : kExitConformance;
}

int cmd_run(const Flags& f, const std::string& policy_name) {
  const ExperimentConfig c = make_config(f);
  GraphDocument doc = c.graph.empty() ? GraphDocument{demo_graph(), demo_engine()} : load_graph_document(c.graph);
  doc.engine.sync = c.mode == SyncMode::synchronized;
  doc.engine.real_time_factor = f.rtf.empty() ? doc.engine.real_time_factor : f.rtf.front();
  if (!doc.engine.sync && !(doc.engine.real_time_factor > 0.0)) doc.engine.real_time_factor = 1.0;

  EnvOptions options;
  options.reward = pendulum_reward;
  Environment env(doc.graph, doc.engine, builtin_registry(), options);
  EpisodeConfig episode;
  episode.seed = c.seed;
  episode.max_steps =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(c.episode_seconds * doc.graph.env_rate)) - 1);

  Policy policy;
  if (policy_name == "zero") {
    policy = [&env](const Observation&, std::uint64_t) { return env.zero_action(); };
  } else if (policy_name == "random") {
    policy = random_policy(c.seed);
  } else if (policy_name == "tape") {
    policy = tape_policy(sinusoid_tape(episode.max_steps, c.tape_amplitude, c.tape_frequency, doc.graph.env_rate));
  } else {
    policy = swing_up_policy(PendulumParams<double>{});
  }

  const EpisodeResult r = run_episode(env, policy, episode);
  auto file = open_out(c.out);
  write_trajectory(file ? *file : std::cout, r.records);
  std::cerr << "steps " << r.records.size() - 1 << ", sim " << r.sim_seconds << " s, realized rtf "
            << r.realized_rtf() << ", hash " << to_hex(r.hash) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synchronized multi-rate dataflow: experiments and episodes"};
  app.require_subcommand(1);

  Flags variance_flags, speedup_flags, run_flags;
  auto* variance = app.add_subcommand("variance", "terminal sin(theta) variance across repeated episodes");
  add_common(variance, variance_flags);

  auto* speedup = app.add_subcommand("speedup", "realized rtf with and without one period of actuator delay");
  add_common(speedup, speedup_flags);
  double cost = -1.0;
  std::string cost_mode;
  speedup->add_option("--cost", cost, "per-callback compute cost in seconds");
  speedup->add_option("--cost-mode", cost_mode, "sleep or busy")->check(CLI::IsMember({"sleep", "busy"}));

  auto* conformance = app.add_subcommand("conformance", "closed-form counts against the timeline oracle");
  std::uint64_t conf_seed = 0;
  std::uint64_t cases = 1000;
  conformance->add_option("--seed", conf_seed, "seed");
  conformance->add_option("--cases", cases, "timings per channel kind");

  auto* run = app.add_subcommand("run", "one episode, trajectory as JSON lines");
  add_common(run, run_flags);
  std::string policy = "swingup";
  run->add_option("--policy", policy, "zero, random, tape or swingup")
      ->check(CLI::IsMember({"zero", "random", "tape", "swingup"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*variance) return cmd_variance(variance_flags);
    if (*speedup) return cmd_speedup(speedup_flags, cost, cost_mode);
    if (*conformance) return cmd_conformance(conf_seed, cases);
    if (*run) return cmd_run(run_flags, policy);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const GraphError& e) {
    std::cerr << "graph error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const EpisodeFault& e) {
    std::cerr << "episode fault: " << e.what() << "\n";
    return kExitFault;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFault;
  }
  return kExitOk;
}
