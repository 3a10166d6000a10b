#include "syncflow/runtime.hpp"

#include <iostream>
#include <sstream>

#include "syncflow/errors.hpp"
#include "syncflow/hash.hpp"

namespace syncflow {

void Telemetry::record_state(std::string_view node, std::uint64_t k, double sim_time,
                             const Eigen::VectorXd& q) {
  std::lock_guard lock(mutex_);
  states_[{std::string(node), k}] = StateSample{std::string(node), k, sim_time, q};
}

std::optional<StateSample> Telemetry::state(std::string_view node, std::uint64_t k) const {
  std::lock_guard lock(mutex_);
  auto it = states_.find(std::pair<std::string, std::uint64_t>{std::string(node), k});
  if (it == states_.end()) return std::nullopt;
  return it->second;
}

std::vector<StateSample> Telemetry::states() const {
  std::lock_guard lock(mutex_);
  std::vector<StateSample> out;
  out.reserve(states_.size());
  for (const auto& [key, s] : states_) out.push_back(s);
  return out;
}

void Telemetry::record_callback(const CallbackTiming& t) {
  std::lock_guard lock(mutex_);
  callbacks_.push_back(t);
}

std::vector<CallbackTiming> Telemetry::callbacks() const {
  std::lock_guard lock(mutex_);
  return callbacks_;
}

void Telemetry::clear() {
  std::lock_guard lock(mutex_);
  states_.clear();
  callbacks_.clear();
}

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::idle: return "idle";
    case RunStatus::running: return "running";
    case RunStatus::finished: return "finished";
    case RunStatus::stalled: return "stalled";
    case RunStatus::faulted: return "faulted";
    case RunStatus::stopped: return "stopped";
  }
  return "?";
}

struct GraphRuntime::Host final : MessageSink {
  Host(GraphRuntime* owner, std::size_t idx, NodeSpec spec, std::unique_ptr<NodeBehavior> b,
       double epsilon)
      : rt(owner), index(idx), node(std::move(spec), std::move(b), epsilon) {}

  void deliver(std::size_t input, Envelope env) override { rt->deliver(*this, input, std::move(env)); }

  GraphRuntime* rt;
  std::size_t index;
  NodeRuntime node;
  std::vector<std::size_t> out_endpoints;
  std::vector<std::pair<std::size_t, std::size_t>> in_subs;  // endpoint, subscription
  std::uint64_t limit = std::numeric_limits<std::uint64_t>::max();

  std::mutex m;
  std::condition_variable cv;
  bool pending = false;
  bool idle = false;
  bool queued = false;
  bool warned = false;
};

GraphRuntime::GraphRuntime(RuntimeOptions options, std::shared_ptr<ParameterStore> params)
    : options_(std::move(options)),
      params_(params ? std::move(params) : std::make_shared<ParameterStore>()),
      throttle_(options_.clock) {
  options_.clock.validate();
  if (options_.driver == Driver::cooperative && options_.clock.mode == SyncMode::asynchronous) {
    throw ConfigError("the cooperative driver only runs synchronized graphs");
  }
  transport_ = std::make_unique<Transport>(options_.clock, options_.transport);
  services_ = RuntimeServices{params_.get(), &throttle_, &telemetry_};
}

GraphRuntime::~GraphRuntime() { stop(); }

std::size_t GraphRuntime::add_node(NodeSpec spec, std::unique_ptr<NodeBehavior> behavior) {
  if (wired_) throw std::logic_error("cannot add nodes after wiring");
  if (find(spec.name)) throw ConfigError("duplicate node name '" + spec.name + "'");
  auto h = std::make_unique<Host>(this, hosts_.size(), std::move(spec), std::move(behavior),
                                  options_.epsilon);
  h->node.set_high_water(options_.high_water);
  h->node.set_fire_logging(options_.log_fires);
  hosts_.push_back(std::move(h));
  return hosts_.size() - 1;
}

std::optional<std::size_t> GraphRuntime::find(std::string_view name) const {
  for (std::size_t i = 0; i < hosts_.size(); ++i) {
    if (hosts_[i]->node.spec().name == name) return i;
  }
  return std::nullopt;
}

NodeRuntime& GraphRuntime::node(std::size_t i) { return hosts_.at(i)->node; }
const NodeRuntime& GraphRuntime::node(std::size_t i) const { return hosts_.at(i)->node; }

NodeRuntime& GraphRuntime::node(std::string_view name) {
  auto i = find(name);
  if (!i) throw std::out_of_range("no node named '" + std::string(name) + "'");
  return node(*i);
}

void GraphRuntime::wire() {
  if (wired_) return;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> endpoints;
  for (auto& h : hosts_) {
    const NodeSpec& spec = h->node.spec();
    h->out_endpoints.clear();
    for (std::size_t j = 0; j < spec.outputs.size(); ++j) {
      const std::size_t ep = transport_->add_endpoint(spec.name + "/" + spec.outputs[j].name);
      endpoints[{h->index, j}] = ep;
      h->out_endpoints.push_back(ep);
    }
  }
  for (auto& h : hosts_) {
    const NodeSpec& spec = h->node.spec();
    for (std::size_t i = 0; i < spec.inputs.size(); ++i) {
      const ChannelSpec& ch = spec.inputs[i];
      const std::string where = spec.name + "." + ch.name;
      const auto slash = ch.source.rfind('/');
      if (slash == std::string::npos) {
        throw ConfigError("input " + where + " has no source");
      }
      const auto producer = find(std::string_view(ch.source).substr(0, slash));
      const std::string port = ch.source.substr(slash + 1);
      if (!producer) throw ConfigError("input " + where + ": unknown source '" + ch.source + "'");
      const NodeSpec& pspec = hosts_[*producer]->node.spec();
      const auto out = pspec.output_index(port);
      if (!out) throw ConfigError("input " + where + ": unknown source '" + ch.source + "'");
      if (pspec.outputs[*out].size != ch.size) {
        throw ConfigError("input " + where + " expects size " + std::to_string(ch.size) + ", '" +
                          ch.source + "' produces " + std::to_string(pspec.outputs[*out].size));
      }
      if (pspec.rate != ch.producer_rate) {
        throw ConfigError("input " + where + " declares producer rate " +
                          std::to_string(ch.producer_rate) + " but '" + pspec.name + "' runs at " +
                          std::to_string(pspec.rate));
      }
      const std::size_t ep = endpoints.at({*producer, *out});
      const std::size_t sub = transport_->subscribe(ep, h.get(), i, ch.delay);
      h->in_subs.emplace_back(ep, sub);
    }
  }
  wired_ = true;
}

void GraphRuntime::reset(const std::map<std::string, StateValues>& states) {
  if (status() == RunStatus::running) throw std::logic_error("reset while running; stop first");
  for (const auto& [name, values] : states) {
    if (!find(name)) throw ConfigError("reset names unknown node '" + name + "'");
  }
  static const StateValues kNone;
  for (auto& h : hosts_) {
    auto it = states.find(h->node.spec().name);
    h->node.reset(it == states.end() ? kNone : it->second);
  }
}

void GraphRuntime::set_channel_delay(std::size_t node_index, std::size_t input, double delay) {
  if (status() == RunStatus::running) throw std::logic_error("delays are fixed while running");
  Host& h = *hosts_.at(node_index);
  h.node.set_input_delay(input, delay);
  if (wired_) {
    const auto [ep, sub] = h.in_subs.at(input);
    transport_->set_delay(ep, sub, delay);
  }
}

void GraphRuntime::start(std::optional<Horizon> horizon) {
  if (!threads_.empty()) throw std::logic_error("runtime already started");
  wire();
  for (auto& h : hosts_) {
    if (h->node.phase() != Phase::running) {
      throw ConfigError("node '" + h->node.spec().name + "' has not been reset");
    }
    h->limit = horizon ? callbacks_within(horizon->steps, horizon->reference_hz, h->node.spec().rate)
                       : std::numeric_limits<std::uint64_t>::max();
    h->pending = true;
    h->idle = false;
    h->queued = false;
    h->warned = false;
  }
  {
    std::lock_guard lock(status_mutex_);
    status_ = RunStatus::running;
    idle_ = 0;
    done_ = 0;
    fault_message_.clear();
    fault_ = nullptr;
  }
  stop_ = false;
  telemetry_.clear();
  ready_.clear();
  transport_->open();
  throttle_.restart();
  origin_ = throttle_.origin();
  end_ = origin_;

  if (hosts_.empty()) {
    finish(RunStatus::finished);
    return;
  }
  if (options_.driver == Driver::cooperative) {
    threads_.emplace_back([this] { run_cooperative(); });
  } else if (options_.clock.mode == SyncMode::asynchronous) {
    for (auto& h : hosts_) threads_.emplace_back([this, p = h.get()] { run_async(*p); });
  } else {
    for (auto& h : hosts_) threads_.emplace_back([this, p = h.get()] { run_threaded(*p); });
  }
}

RunStatus GraphRuntime::wait(std::optional<Clock::duration> timeout) {
  std::unique_lock lock(status_mutex_);
  auto done = [this] { return status_ != RunStatus::running; };
  if (timeout) {
    status_cv_.wait_for(lock, *timeout, done);
  } else {
    status_cv_.wait(lock, done);
  }
  return status_;
}

void GraphRuntime::stop() {
  signal_stop();
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
  transport_->shutdown();
  {
    std::lock_guard lock(status_mutex_);
    if (status_ == RunStatus::running) {
      status_ = RunStatus::stopped;
      end_ = Clock::now();
    }
  }
  status_cv_.notify_all();
}

RunStatus GraphRuntime::status() const {
  std::lock_guard lock(status_mutex_);
  return status_;
}

std::string GraphRuntime::fault_message() const {
  std::lock_guard lock(status_mutex_);
  return fault_message_;
}

void GraphRuntime::rethrow_if_faulted() const {
  const RunStatus s = status();
  if (s == RunStatus::faulted) {
    if (fault_) {
      try {
        std::rethrow_exception(fault_);
      } catch (const EpisodeFault&) {
        throw;
      } catch (...) {
      }
    }
    throw EpisodeFault(fault_message());
  }
  if (s == RunStatus::stalled) throw EpisodeFault(fault_message());
}

std::string GraphRuntime::stall_report() const {
  std::ostringstream os;
  os << "graph stalled:";
  for (const auto& h : hosts_) {
    os << ' ' << h->node.spec().name << "@k=" << h->node.k() << '/' << h->limit;
  }
  return os.str();
}

void GraphRuntime::fault(const std::string& message) {
  {
    std::lock_guard lock(status_mutex_);
    if (status_ != RunStatus::running) return;
    status_ = RunStatus::faulted;
    fault_message_ = message;
    end_ = Clock::now();
  }
  status_cv_.notify_all();
  signal_stop();
}

void GraphRuntime::fault_from(const Host& h, std::exception_ptr e) {
  std::string what = "unknown exception";
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    what = ex.what();
  } catch (...) {
  }
  {
    std::lock_guard lock(status_mutex_);
    if (status_ != RunStatus::running) return;
    status_ = RunStatus::faulted;
    fault_message_ = "node '" + h.node.spec().name + "': " + what;
    fault_ = e;
    end_ = Clock::now();
  }
  status_cv_.notify_all();
  signal_stop();
}

std::uint64_t GraphRuntime::limit(std::size_t node) const { return hosts_.at(node)->limit; }

double GraphRuntime::wall_seconds() const {
  std::lock_guard lock(status_mutex_);
  const auto end = status_ == RunStatus::running ? Clock::now() : end_;
  return std::chrono::duration<double>(end - origin_).count();
}

std::uint64_t GraphRuntime::trace_hash() const {
  Fnv1a h;
  for (const auto& host : hosts_) {
    h.str(host->node.spec().name);
    h.u64(host->node.trace_hash());
  }
  return h.value();
}

void GraphRuntime::signal_stop() {
  stop_ = true;
  for (auto& h : hosts_) {
    { std::lock_guard lock(h->m); }
    h->cv.notify_all();
  }
  if (terminal_hook_) terminal_hook_();
}

void GraphRuntime::finish(RunStatus s) {
  // Every host is idle on a stall, so their indices are stable here.
  std::string report;
  if (s == RunStatus::stalled) report = stall_report();
  {
    std::lock_guard lock(status_mutex_);
    if (status_ != RunStatus::running) return;
    status_ = s;
    fault_message_ = std::move(report);
    end_ = Clock::now();
  }
  status_cv_.notify_all();
  signal_stop();
}

bool GraphRuntime::enter_idle() {
  std::lock_guard lock(status_mutex_);
  ++idle_;
  return idle_ + done_ == hosts_.size() && done_ < hosts_.size();
}

void GraphRuntime::mark_done(Host&) {
  RunStatus next = RunStatus::running;
  {
    std::lock_guard lock(status_mutex_);
    ++done_;
    if (done_ == hosts_.size()) {
      next = RunStatus::finished;
    } else if (idle_ + done_ == hosts_.size()) {
      next = RunStatus::stalled;
    }
  }
  if (next != RunStatus::running) finish(next);
}

void GraphRuntime::deliver(Host& h, std::size_t input, Envelope env) {
  if (stop_) return;
  std::string error;
  bool warn = false;
  {
    std::unique_lock lock(h.m, std::defer_lock);
    const bool cooperative = options_.driver == Driver::cooperative;
    if (!cooperative) lock.lock();
    try {
      h.node.on_message(input, std::move(env));
    } catch (const TransportViolation& e) {
      error = e.what();
    }
    if (error.empty()) {
      if (!h.warned && h.node.high_water_exceeded()) {
        h.warned = true;
        warn = true;
      }
      if (cooperative) {
        if (!h.queued && h.node.k() < h.limit) {
          h.queued = true;
          ready_.push_back(&h);
        }
      } else {
        h.pending = true;
        if (h.idle) {
          h.idle = false;
          std::lock_guard status_lock(status_mutex_);
          --idle_;
        }
        h.cv.notify_one();
      }
    }
  }
  if (warn) {
    std::cerr << "warning: node '" << h.node.spec().name << "' holds more than "
              << options_.high_water << " buffered messages\n";
  }
  if (!error.empty()) fault(error);
}

void GraphRuntime::publish_outputs(Host& h, Fired& fired) {
  for (std::size_t j = 0; j < fired.outputs.size(); ++j) {
    transport_->publish(h.out_endpoints[j], fired.outputs[j]);
  }
}

bool GraphRuntime::fire_one(Host& h, std::unique_lock<std::mutex>* lock, bool drain) {
  auto ticket = drain ? h.node.prepare_drain() : h.node.prepare_fire();
  if (!ticket) return false;
  if (lock) lock->unlock();
  if (options_.record_callback_times) {
    const double wall = std::chrono::duration<double>(Clock::now() - origin_).count();
    telemetry_.record_callback(CallbackTiming{h.index, ticket->k,
                                              static_cast<double>(ticket->k) / h.node.spec().rate,
                                              wall});
  }
  std::vector<Payload> outputs = h.node.run_callback(*ticket, services_);
  if (lock) lock->lock();
  Fired fired = h.node.complete_fire(std::move(*ticket), std::move(outputs));
  if (lock) lock->unlock();
  publish_outputs(h, fired);
  if (lock) lock->lock();
  return true;
}

void GraphRuntime::run_threaded(Host& h) {
  try {
    std::unique_lock lock(h.m);
    while (!stop_) {
      if (h.node.k() >= h.limit) {
        lock.unlock();
        mark_done(h);
        return;
      }
      h.pending = false;
      if (fire_one(h, &lock, false)) continue;
      if (h.pending) continue;
      h.idle = true;
      if (enter_idle()) {
        lock.unlock();
        finish(RunStatus::stalled);
        lock.lock();
      }
      h.cv.wait(lock, [&] { return h.pending || stop_.load(); });
      if (h.idle) {
        h.idle = false;
        std::lock_guard status_lock(status_mutex_);
        --idle_;
      }
    }
  } catch (const Interrupted&) {
  } catch (...) {
    h.node.stop();
    fault_from(h, std::current_exception());
  }
}

void GraphRuntime::run_async(Host& h) {
  const double period = 1.0 / (h.node.spec().rate * options_.clock.target_rtf);
  try {
    std::unique_lock lock(h.m);
    for (std::uint64_t j = 0; j < h.limit && !stop_; ++j) {
      const auto due = origin_ + std::chrono::duration_cast<Clock::duration>(
                                     std::chrono::duration<double>(static_cast<double>(j) * period));
      h.cv.wait_until(lock, due, [&] { return stop_.load(); });
      if (stop_) return;
      fire_one(h, &lock, true);
    }
    lock.unlock();
    if (!stop_) mark_done(h);
  } catch (const Interrupted&) {
  } catch (...) {
    h.node.stop();
    fault_from(h, std::current_exception());
  }
}

void GraphRuntime::run_cooperative() {
  Host* current = nullptr;
  try {
    for (auto& h : hosts_) {
      h->queued = true;
      ready_.push_back(h.get());
    }
    while (!stop_ && !ready_.empty()) {
      current = ready_.front();
      ready_.pop_front();
      current->queued = false;
      while (!stop_ && current->node.k() < current->limit && fire_one(*current, nullptr, false)) {
      }
    }
  } catch (const Interrupted&) {
    return;
  } catch (...) {
    if (!current) {
      fault("cooperative driver failed to start");
      return;
    }
    current->node.stop();
    fault_from(*current, std::current_exception());
    return;
  }
  if (stop_) return;
  bool all = true;
  for (const auto& h : hosts_) all = all && h->node.k() >= h->limit;
  finish(all ? RunStatus::finished : RunStatus::stalled);
}

}  // namespace syncflow
