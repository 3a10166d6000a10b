#include "syncflow/policies.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>

namespace syncflow {

namespace {

Action volt(double u) { return {{"volt", Payload::Constant(1, u)}}; }

double newest(const Observation& obs, const char* name) {
  auto it = obs.find(name);
  if (it == obs.end() || it->second.empty()) return 0.0;
  return it->second.back()(0);
}

}  // namespace

std::vector<double> sinusoid_tape(std::size_t n, double amplitude, double frequency, double rate) {
  std::vector<double> tape(n);
  for (std::size_t j = 0; j < n; ++j) {
    tape[j] = amplitude * std::sin(2.0 * std::numbers::pi * frequency * static_cast<double>(j) / rate);
  }
  return tape;
}

Policy tape_policy(std::vector<double> tape) {
  return [tape = std::move(tape)](const Observation&, std::uint64_t step) {
    if (tape.empty()) return volt(0.0);
    return volt(tape[std::min<std::size_t>(step, tape.size() - 1)]);
  };
}

Policy random_policy(std::uint64_t seed, double limit) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng, limit](const Observation&, std::uint64_t) {
    return volt(std::uniform_real_distribution<double>(-limit, limit)(*rng));
  };
}

Policy swing_up_policy(const PendulumParams<double>& params, SwingUpGains gains) {
  return [params, gains](const Observation& obs, std::uint64_t) {
    const double th = newest(obs, "th");
    const double thdot = newest(obs, "thdot");
    const double err = wrap_angle(th - std::numbers::pi);
    double u;
    if (std::abs(err) < gains.catch_angle) {
      u = -(gains.kp * err + gains.kd * thdot);
    } else {
      const double target = 2.0 * params.mass * params.gravity * params.length;
      const double deficit = target - pendulum_energy(PendulumState<double>(th, thdot), params);
      const double dir = thdot == 0.0 ? 1.0 : (thdot > 0.0 ? 1.0 : -1.0);
      u = gains.energy_gain * deficit * dir;
    }
    return volt(std::clamp(u, -gains.limit, gains.limit));
  };
}

}  // namespace syncflow
