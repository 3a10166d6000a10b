#include "syncflow/node.hpp"

#include <chrono>
#include <stdexcept>
#include <thread>

#include "syncflow/errors.hpp"
#include "syncflow/hash.hpp"

namespace syncflow {

namespace {

void burn(double seconds, bool busy) {
  if (seconds <= 0.0) return;
  const auto dur = std::chrono::duration<double>(seconds);
  if (!busy) {
    std::this_thread::sleep_for(dur);
    return;
  }
  const auto until = std::chrono::steady_clock::now() + dur;
  while (std::chrono::steady_clock::now() < until) {
  }
}

}  // namespace

std::optional<std::size_t> NodeSpec::input_index(std::string_view port) const {
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].name == port) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> NodeSpec::output_index(std::string_view port) const {
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i].name == port) return i;
  }
  return std::nullopt;
}

const InputMessages& CallbackContext::input(std::string_view port) const {
  const auto idx = spec->input_index(port);
  if (!idx) throw std::out_of_range("node '" + spec->name + "' has no input '" + std::string(port) + "'");
  return inputs[*idx];
}

NodeRuntime::NodeRuntime(NodeSpec spec, std::unique_ptr<NodeBehavior> behavior, double epsilon)
    : spec_(std::move(spec)),
      behavior_(std::move(behavior)),
      epsilon_(epsilon),
      buffers_(spec_.inputs.size()),
      history_(spec_.inputs.size()),
      last_seq_(spec_.inputs.size()),
      next_out_seq_(spec_.outputs.size(), 0),
      trace_hash_(Fnv1a::kOffset) {
  if (!behavior_) throw std::invalid_argument("node '" + spec_.name + "' has no behavior");
  if (spec_.params.is_null()) spec_.params = nlohmann::json::object();
  static_cast<void>(Rate(spec_.rate));
  timing_.reserve(spec_.inputs.size());
  for (const ChannelSpec& ch : spec_.inputs) {
    if (ch.window < 1) throw std::invalid_argument("window must be >= 1 on " + spec_.name + "." + ch.name);
    timing_.emplace_back(ChannelTiming{Rate(spec_.rate), Rate(ch.producer_rate), ch.delay, ch.cyclic},
                         epsilon_);
  }
  counters_.received.assign(spec_.inputs.size(), 0);
  counters_.consumed.assign(spec_.inputs.size(), 0);
}

void NodeRuntime::rebuild_timing(std::size_t input) {
  const ChannelSpec& ch = spec_.inputs.at(input);
  timing_.at(input) =
      QuantizedTiming(ChannelTiming{Rate(spec_.rate), Rate(ch.producer_rate), ch.delay, ch.cyclic}, epsilon_);
}

void NodeRuntime::set_input_delay(std::size_t input, double delay) {
  spec_.inputs.at(input).delay = delay;
  rebuild_timing(input);
}

void NodeRuntime::on_message(std::size_t input, Envelope env) {
  auto& last = last_seq_.at(input);
  const std::uint64_t want = last ? *last + 1 : 0;
  if (env.seq != want) {
    throw TransportViolation("node '" + spec_.name + "' input '" + spec_.inputs[input].name +
                             "': expected seq " + std::to_string(want) + ", got " +
                             std::to_string(env.seq));
  }
  last = env.seq;
  buffers_[input].push_back(std::move(env));
  ++counters_.received[input];
  if (buffers_[input].size() > high_water_) high_water_hit_ = true;
}

std::uint64_t NodeRuntime::expected(std::size_t input) const {
  return timing_.at(input).expected(k_).delta;
}

void NodeRuntime::absorb(std::size_t input, InputMessages& msgs, std::size_t count) {
  auto& buf = buffers_[input];
  auto& hist = history_[input];
  const ChannelSpec& ch = spec_.inputs[input];
  msgs.consumed.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    hist.push_back(buf.front().payload);
    msgs.consumed.push_back(std::move(buf.front()));
    buf.pop_front();
  }
  while (hist.size() > ch.window) hist.pop_front();
  counters_.consumed[input] += count;

  // Fixed-length window from the first callback on: repeat the oldest message,
  // or zeros when nothing has arrived yet.
  msgs.window.reserve(ch.window);
  const Payload pad = hist.empty() ? Payload::Zero(ch.size) : hist.front();
  for (std::size_t n = hist.size(); n < ch.window; ++n) msgs.window.push_back(pad);
  for (const Payload& p : hist) msgs.window.push_back(p);
}

std::optional<FireTicket> NodeRuntime::prepare_fire() {
  if (phase_ != Phase::running) return std::nullopt;
  const std::size_t n = spec_.inputs.size();
  FireTicket ticket;
  ticket.k = k_;
  ticket.expected.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ticket.expected[i] = timing_[i].expected(k_).delta;
    if (buffers_[i].size() < ticket.expected[i]) return std::nullopt;
  }

  if (log_fires_) {
    FireRecord rec;
    rec.k = k_;
    rec.expected = ticket.expected;
    for (const auto& b : buffers_) rec.buffered_before.push_back(b.size());
    fire_log_.push_back(std::move(rec));
  }
  ticket.inputs.resize(n);
  for (std::size_t i = 0; i < n; ++i) absorb(i, ticket.inputs[i], ticket.expected[i]);
  return ticket;
}

std::optional<FireTicket> NodeRuntime::prepare_drain() {
  if (phase_ != Phase::running) return std::nullopt;
  const std::size_t n = spec_.inputs.size();
  FireTicket ticket;
  ticket.k = k_;
  ticket.expected.resize(n);
  ticket.inputs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ticket.expected[i] = buffers_[i].size();
    absorb(i, ticket.inputs[i], buffers_[i].size());
  }
  return ticket;
}

std::vector<Payload> NodeRuntime::run_callback(const FireTicket& ticket,
                                               const RuntimeServices& services) {
  const double cost = spec_.params.value("compute_cost", 0.0);
  if (cost > 0.0) burn(cost, spec_.params.value("cost_mode", std::string("sleep")) == "busy");

  CallbackContext ctx;
  ctx.k = ticket.k;
  ctx.sim_time = static_cast<double>(ticket.k) / spec_.rate;
  ctx.inputs = ticket.inputs;
  ctx.spec = &spec_;
  ctx.params = services.params;
  ctx.throttle = services.throttle;
  ctx.telemetry = services.telemetry;
  return behavior_->callback(ctx);
}

Fired NodeRuntime::complete_fire(FireTicket ticket, std::vector<Payload> outputs) {
  if (outputs.size() != spec_.outputs.size()) {
    phase_ = Phase::stopped;
    throw EpisodeFault("node '" + spec_.name + "' returned " + std::to_string(outputs.size()) +
                       " outputs, declared " + std::to_string(spec_.outputs.size()));
  }
  for (std::size_t j = 0; j < outputs.size(); ++j) {
    if (outputs[j].size() != spec_.outputs[j].size) {
      phase_ = Phase::stopped;
      throw EpisodeFault("node '" + spec_.name + "' output '" + spec_.outputs[j].name +
                         "' has size " + std::to_string(outputs[j].size()) + ", declared " +
                         std::to_string(spec_.outputs[j].size));
    }
  }

  Fired fired;
  fired.k = ticket.k;
  const double sim_time = static_cast<double>(ticket.k) / spec_.rate;
  fired.outputs.reserve(outputs.size());
  for (std::size_t j = 0; j < outputs.size(); ++j) {
    fired.outputs.push_back(Envelope{std::move(outputs[j]), next_out_seq_[j]++, sim_time});
  }

  Fnv1a h(trace_hash_);
  h.u64(ticket.k);
  for (const InputMessages& in : ticket.inputs) {
    h.u64(in.consumed.size());
    for (const Envelope& e : in.consumed) h.u64(e.seq);
  }
  for (const Envelope& e : fired.outputs) h.vec(e.payload);
  trace_hash_ = h.value();

  if (log_fires_ && !fire_log_.empty() && fire_log_.back().k == ticket.k) {
    for (const InputMessages& in : ticket.inputs) {
      for (const Envelope& e : in.consumed) fire_log_.back().consumed_seqs.push_back(e.seq);
    }
  }

  fired.consumed.reserve(ticket.inputs.size());
  for (InputMessages& in : ticket.inputs) fired.consumed.push_back(std::move(in.consumed));
  ++counters_.fires;
  ++k_;
  return fired;
}

std::optional<Fired> NodeRuntime::try_fire(const RuntimeServices& services) {
  auto ticket = prepare_fire();
  if (!ticket) return std::nullopt;
  std::vector<Payload> outputs;
  try {
    outputs = run_callback(*ticket, services);
  } catch (...) {
    phase_ = Phase::stopped;
    throw;
  }
  return complete_fire(std::move(*ticket), std::move(outputs));
}

void NodeRuntime::reset(const StateValues& values) {
  for (const auto& [key, value] : values) {
    bool known = false;
    for (const std::string& s : spec_.states) known |= (s == key);
    if (!known) {
      throw ConfigError("node '" + spec_.name + "' has no registered state '" + key + "'");
    }
  }
  phase_ = Phase::resetting;
  k_ = 0;
  for (auto& b : buffers_) b.clear();
  for (auto& h : history_) h.clear();
  for (auto& s : last_seq_) s.reset();
  std::fill(next_out_seq_.begin(), next_out_seq_.end(), 0);
  counters_ = NodeCounters{};
  counters_.received.assign(spec_.inputs.size(), 0);
  counters_.consumed.assign(spec_.inputs.size(), 0);
  trace_hash_ = Fnv1a::kOffset;
  high_water_hit_ = false;
  fire_log_.clear();
  behavior_->reset(values);
  phase_ = Phase::running;
}

}  // namespace syncflow
