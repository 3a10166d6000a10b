#pragma once

#include <cstdint>
#include <vector>

#include "syncflow/environment.hpp"
#include "syncflow/pendulum.hpp"

namespace syncflow {

/// u_j = amplitude * sin(2 pi frequency j / rate), j = 0..n-1.
std::vector<double> sinusoid_tape(std::size_t n, double amplitude, double frequency, double rate);

/// Replays a tape on the "volt" action, holding the last entry past its end.
Policy tape_policy(std::vector<double> tape);

/// Uniform in [-limit, limit] on "volt", reproducible from the seed.
Policy random_policy(std::uint64_t seed, double limit = 2.0);

struct SwingUpGains {
  double energy_gain = 60.0;  // volts per joule of energy deficit
  double kp = 1.2;            // volts per radian near upright
  double kd = 0.14;           // volts per rad/s
  double catch_angle = 0.5;   // |theta - pi| below which the PD law takes over
  double limit = 2.0;
};

/// Energy pumping towards the upright energy, then PD around theta = pi.
/// Reads the newest "th" and "thdot" observations.
Policy swing_up_policy(const PendulumParams<double>& params, SwingUpGains gains = {});

}  // namespace syncflow
