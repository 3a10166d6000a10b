#include "syncflow/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "syncflow/environment.hpp"
#include "syncflow/errors.hpp"
#include "syncflow/graph_io.hpp"
#include "syncflow/hash.hpp"
#include "syncflow/oracle.hpp"
#include "syncflow/policies.hpp"
#include "syncflow/registry.hpp"

namespace syncflow {

void ExperimentConfig::validate(bool variance) const {
  if (target_rtf.empty()) throw ConfigError("target_rtf list is empty");
  for (double r : target_rtf) {
    if (!std::isfinite(r) || r < 0.0) throw ConfigError("target_rtf values must be finite and >= 0");
    if (mode == SyncMode::asynchronous && !(r > 0.0)) throw ConfigError("async mode needs target_rtf > 0");
    if (mode == SyncMode::asynchronous && r > kMaxAsyncRtf) {
      throw ConfigError("async target_rtf is capped at " + std::to_string(static_cast<int>(kMaxAsyncRtf)));
    }
  }
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (variance && runs < 2) throw ConfigError("variance experiments need runs >= 2");
  if (!(episode_seconds > 0.0) || !std::isfinite(episode_seconds)) throw ConfigError("episode_seconds must be > 0");
  if (!(probe_time >= 0.0) || probe_time > episode_seconds) {
    throw ConfigError("probe_time must lie within the episode");
  }
  if (!(callback_cost >= 0.0)) throw ConfigError("callback_cost must be >= 0");
  if (cost_mode != "sleep" && cost_mode != "busy") throw ConfigError("cost_mode must be sleep or busy");
  if (speedup_steps < 1) throw ConfigError("speedup_steps must be >= 1");
}

void ExperimentConfig::merge(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "graph") {
        graph = v.get<std::string>();
      } else if (key == "mode") {
        mode = parse_sync_mode(v.get<std::string>());
      } else if (key == "target_rtf") {
        target_rtf = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
      } else if (key == "runs") {
        runs = v.get<std::size_t>();
      } else if (key == "episode_seconds") {
        episode_seconds = v.get<double>();
      } else if (key == "out") {
        out = v.get<std::string>();
      } else if (key == "seed") {
        seed = v.get<std::uint64_t>();
      } else if (key == "probe_time") {
        probe_time = v.get<double>();
      } else if (key == "tape_amplitude") {
        tape_amplitude = v.get<double>();
      } else if (key == "tape_frequency") {
        tape_frequency = v.get<double>();
      } else if (key == "callback_cost") {
        callback_cost = v.get<double>();
      } else if (key == "cost_mode") {
        cost_mode = v.get<std::string>();
      } else if (key == "speedup_steps") {
        speedup_steps = v.get<std::size_t>();
      } else {
        throw ConfigError("unknown experiment config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"graph", graph},
          {"mode", to_string(mode)},
          {"target_rtf", target_rtf},
          {"runs", runs},
          {"episode_seconds", episode_seconds},
          {"out", out},
          {"seed", seed},
          {"probe_time", probe_time},
          {"tape_amplitude", tape_amplitude},
          {"tape_frequency", tape_frequency},
          {"callback_cost", callback_cost},
          {"cost_mode", cost_mode},
          {"speedup_steps", speedup_steps}};
}

void write_csv_header(std::ostream& out) { out << kMetricsColumns << '\n'; }

void write_csv_row(std::ostream& out, const MetricsRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%s,%g,%zu,%.17g,%.17g,%.6f,%s\n", r.setting_id.c_str(),
                to_string(r.mode), r.target_rtf, r.run, r.sin_theta, r.variance, r.realized_rtf,
                to_hex(r.episode_hash).c_str());
  out << buf << std::flush;
}

std::string setting_id(SyncMode mode, double target_rtf) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-rtf%g", to_string(mode), target_rtf);
  return buf;
}

double variance(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return s / static_cast<double>(xs.size());
}

namespace {

GraphDocument experiment_graph(const ExperimentConfig& config) {
  if (config.graph.empty()) return {demo_graph(), demo_engine()};
  return load_graph_document(config.graph);
}

std::string state_node(const ConcreteGraph& g) {
  for (const ConcreteNode& n : g.nodes) {
    if (n.spec.kind == "ode_pendulum" || n.spec.kind == "counter_engine") return n.spec.name;
  }
  throw ConfigError("graph has no pendulum engine to probe");
}

void finalize_setting(std::vector<MetricsRecord>& rows, std::size_t first, std::ostream* csv) {
  std::vector<double> xs;
  for (std::size_t i = first; i < rows.size(); ++i) xs.push_back(rows[i].sin_theta);
  const double v = variance(xs);
  for (std::size_t i = first; i < rows.size(); ++i) {
    rows[i].variance = v;
    if (csv) write_csv_row(*csv, rows[i]);
  }
}

}  // namespace

std::vector<MetricsRecord> run_variance_sweep(const ExperimentConfig& config, std::ostream* csv) {
  config.validate(true);
  GraphDocument doc = experiment_graph(config);
  if (csv) write_csv_header(*csv);

  std::vector<MetricsRecord> rows;
  for (double rtf : config.target_rtf) {
    EngineSpec engine = doc.engine;
    engine.sync = config.mode == SyncMode::synchronized;
    engine.real_time_factor = rtf;
    Environment env(doc.graph, engine);
    const std::string probe_node = state_node(env.graph());
    const auto probe_k = static_cast<std::uint64_t>(std::llround(config.probe_time * engine.rate));

    const double env_rate = doc.graph.env_rate;
    const auto env_steps = static_cast<std::uint64_t>(std::ceil(config.episode_seconds * env_rate - 1e-9));
    EpisodeConfig episode;
    episode.seed = config.seed;
    episode.max_steps = std::max<std::uint64_t>(1, env_steps > 0 ? env_steps - 1 : 0);
    const Policy policy =
        tape_policy(sinusoid_tape(episode.max_steps, config.tape_amplitude, config.tape_frequency, env_rate));

    const std::size_t first = rows.size();
    for (std::size_t run = 0; run < config.runs; ++run) {
      EpisodeResult result;
      try {
        result = run_episode(env, policy, episode);
      } catch (...) {
        finalize_setting(rows, first, csv);
        throw;
      }
      const auto sample = env.runtime().telemetry().state(probe_node, probe_k);
      if (!sample) {
        finalize_setting(rows, first, csv);
        throw EpisodeFault("no engine state recorded at k=" + std::to_string(probe_k));
      }
      MetricsRecord r;
      r.setting_id = setting_id(config.mode, rtf);
      r.mode = config.mode;
      r.target_rtf = rtf;
      r.run = run;
      r.sin_theta = std::sin(sample->q(0));
      r.realized_rtf = result.realized_rtf();
      r.episode_hash = Fnv1a().u64(result.hash).u64(result.trace_hash).value();
      rows.push_back(std::move(r));
    }
    finalize_setting(rows, first, csv);
  }
  return rows;
}

SpeedupReport run_delay_speedup(const ExperimentConfig& config, std::ostream* csv) {
  config.validate(false);
  if (csv) write_csv_header(*csv);
  const Registry registry = builtin_registry();
  SpeedupReport report;
  for (bool delay : {false, true}) {
    SpeedupOptions options;
    options.delay = delay;
    options.cost = config.callback_cost;
    options.cost_mode = config.cost_mode;
    const ConcreteGraph graph = resolve(speedup_graph(options), speedup_engine(options.rate), registry);
    auto rt = build_runtime(graph, registry);
    const std::string probe_node = state_node(graph);
    const double sim = static_cast<double>(config.speedup_steps) / options.rate;

    auto& rows = delay ? report.delayed : report.baseline;
    double sum = 0.0;
    for (std::size_t run = 0; run < config.runs; ++run) {
      rt->reset();
      rt->start(Horizon{config.speedup_steps, options.rate});
      const RunStatus s = rt->wait();
      rt->stop();
      if (s != RunStatus::finished) {
        rt->rethrow_if_faulted();
        throw EpisodeFault(std::string("speedup run ended with status ") + to_string(s));
      }
      MetricsRecord r;
      r.setting_id = delay ? "sync-delay" : "sync-nodelay";
      r.mode = SyncMode::synchronized;
      r.target_rtf = 0.0;
      r.run = run;
      if (auto q = rt->telemetry().state(probe_node, config.speedup_steps)) r.sin_theta = std::sin(q->q(0));
      r.realized_rtf = sim / rt->wall_seconds();
      r.episode_hash = rt->trace_hash();
      sum += r.realized_rtf;
      rows.push_back(std::move(r));
    }
    finalize_setting(rows, 0, csv);
    (delay ? report.delayed_rtf : report.baseline_rtf) = sum / static_cast<double>(config.runs);
  }
  return report;
}

namespace {

double random_rate(std::mt19937_64& rng, double lo, double hi) {
  if (std::bernoulli_distribution(0.4)(rng)) {
    return static_cast<double>(std::uniform_int_distribution<int>(static_cast<int>(std::ceil(lo)),
                                                                 static_cast<int>(hi))(rng));
  }
  return std::round(std::uniform_real_distribution<double>(lo, hi)(rng) * 1000.0) / 1000.0;
}

double random_delay(std::mt19937_64& rng, double producer_rate, double max_delay) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < 0.3) return 0.0;
  if (u < 0.5) {
    // Whole producer periods put arrivals exactly on consumer ticks often.
    const int m = std::uniform_int_distribution<int>(1, 3)(rng);
    return std::min(max_delay, std::round(m / producer_rate * 1e6) / 1e6);
  }
  return std::round(std::uniform_real_distribution<double>(0.0, max_delay)(rng) * 1e6) / 1e6;
}

std::string describe(const ChannelTiming& t) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "f_n=%.17g f_i=%.17g tau=%.17g cyclic=%d", t.consumer_rate.hz(),
                t.producer_rate.hz(), t.delay, t.cyclic ? 1 : 0);
  return buf;
}

}  // namespace

RandomGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes) {
  const std::size_t n = std::uniform_int_distribution<std::size_t>(2, std::max<std::size_t>(2, max_nodes))(rng);
  RandomGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    NodeSpec s;
    s.name = "n" + std::to_string(i);
    s.kind = "null";
    s.rate = random_rate(rng, 1.0, 200.0);
    s.outputs = {OutputSpec{"y", 1}};
    g.nodes.push_back(std::move(s));
  }
  std::vector<std::vector<bool>> linked(n, std::vector<bool>(n, false));
  auto link = [&](std::size_t a, std::size_t b) {
    NodeSpec& t = g.nodes[b];
    ChannelSpec c;
    c.name = "i" + std::to_string(t.inputs.size());
    c.source = g.nodes[a].name + "/y";
    c.producer_rate = g.nodes[a].rate;
    c.delay = random_delay(rng, c.producer_rate, 0.2);
    c.window = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    c.cyclic = a > b;
    t.inputs.push_back(std::move(c));
    linked[a][b] = true;
  };
  for (std::size_t b = 0; b < n; ++b) link((b + n - 1) % n, b);
  std::bernoulli_distribution extra(0.25);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b && !linked[a][b] && extra(rng)) link(a, b);
    }
  }
  auto fastest = std::max_element(g.nodes.begin(), g.nodes.end(),
                                  [](const NodeSpec& x, const NodeSpec& y) { return x.rate < y.rate; });
  std::iter_swap(g.nodes.begin(), fastest);
  return g;
}

std::unique_ptr<GraphRuntime> instantiate(const RandomGraph& g, RuntimeOptions options) {
  auto rt = std::make_unique<GraphRuntime>(options);
  for (const NodeSpec& s : g.nodes) rt->add_node(s, std::make_unique<NullNode>());
  rt->wire();
  return rt;
}

ConformanceReport run_conformance(std::uint64_t seed, std::uint64_t cases) {
  if (cases == 0) throw ConfigError("cases must be >= 1");
  constexpr std::uint64_t kMax = 100;
  std::mt19937_64 rng(seed);
  ConformanceReport report;
  for (bool cyclic : {false, true}) {
    for (std::uint64_t c = 0; c < cases; ++c) {
      ChannelTiming t{Rate(random_rate(rng, 0.5, 500.0)), Rate(random_rate(rng, 0.5, 500.0)), 0.0, cyclic};
      t.delay = random_delay(rng, t.producer_rate.hz(), 3.0 / t.producer_rate.hz());
      const auto oracle = oracle_expected_schedule(t, kMax);
      bool pass = true;
      for (std::uint64_t k = 0; k <= kMax && pass; ++k) {
        const std::uint64_t got = cyclic ? expected_count_cyclic(k, t).delta : expected_count_acyclic(k, t).delta;
        if (got != oracle[k]) {
          pass = false;
          if (!report.counterexample) {
            report.counterexample = describe(t) + " k=" + std::to_string(k) + " formula=" +
                                    std::to_string(got) + " oracle=" + std::to_string(oracle[k]);
          }
        }
      }
      (cyclic ? (pass ? report.cyclic_pass : report.cyclic_fail) : (pass ? report.acyclic_pass : report.acyclic_fail))++;
      if (!cyclic) continue;

      // Two-node loop: b -> a carries the timing (cyclic), a -> b closes it.
      RandomGraph loop;
      NodeSpec a{"a", "null", t.consumer_rate.hz(), {}, {OutputSpec{"y", 1}}, {}, nlohmann::json::object()};
      NodeSpec b{"b", "null", t.producer_rate.hz(), {}, {OutputSpec{"y", 1}}, {}, nlohmann::json::object()};
      a.inputs.push_back(ChannelSpec{"x", "b/y", b.rate, t.delay, 1, true, 1});
      b.inputs.push_back(ChannelSpec{"x", "a/y", a.rate, 0.0, 1, false, 1});
      loop.nodes = {a, b};
      RuntimeOptions opts;
      opts.driver = Driver::cooperative;
      auto rt = instantiate(loop, opts);
      rt->reset();
      rt->start(Horizon{kMax, std::max(a.rate, b.rate)});
      const RunStatus s = rt->wait();
      rt->stop();
      if (s == RunStatus::finished) {
        ++report.live_pass;
      } else {
        ++report.live_fail;
        if (!report.counterexample) report.counterexample = describe(t) + " loop " + to_string(s) + ": " + rt->fault_message();
      }
    }
  }
  return report;
}

LivenessReport run_liveness(std::uint64_t seed, std::uint64_t graphs, std::uint64_t steps, Driver driver) {
  std::mt19937_64 rng(seed);
  LivenessReport report;
  for (std::uint64_t i = 0; i < graphs; ++i) {
    const RandomGraph g = random_graph(rng);
    RuntimeOptions opts;
    opts.driver = driver;
    auto rt = instantiate(g, opts);
    rt->reset();
    rt->start(Horizon{steps, g.nodes.front().rate});
    const RunStatus s = rt->wait(std::chrono::seconds(20));
    rt->stop();
    if (s == RunStatus::finished) {
      ++report.finished;
      continue;
    }
    ++report.failed;
    if (!report.first_failure) {
      std::ostringstream os;
      os << "graph " << i << " " << to_string(s) << ": " << rt->fault_message() << "\n";
      for (const NodeSpec& n : g.nodes) {
        os << "  " << n.name << " @" << n.rate << " Hz <-";
        for (const ChannelSpec& c : n.inputs) {
          os << " " << c.source << (c.cyclic ? " [skip]" : "") << " d=" << c.delay;
        }
        os << "\n";
      }
      report.first_failure = os.str();
    }
  }
  return report;
}

void print_report(std::ostream& out, const ConformanceReport& r) {
  out << "acyclic: " << r.acyclic_pass << " pass, " << r.acyclic_fail << " fail\n"
      << "cyclic:  " << r.cyclic_pass << " pass, " << r.cyclic_fail << " fail\n"
      << "loops:   " << r.live_pass << " live, " << r.live_fail << " stuck\n";
  if (r.counterexample) out << "first counterexample: " << *r.counterexample << "\n";
}

}  // namespace syncflow
