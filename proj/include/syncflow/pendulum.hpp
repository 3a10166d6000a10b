#pragma once

// Pendulum dynamics and a fixed-step RK4 integrator, templated on the scalar.
//
//   J * thetaddot = -m g l sin(theta) - b thetadot + K u
//
// J = m l^2 for the disk model (point mass on an arm), m l^2 / 3 for a rod.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace syncflow {

enum class PendulumModel { disk, rod };

template <typename Scalar>
struct PendulumParams {
  Scalar mass = Scalar(0.033);
  Scalar length = Scalar(0.1);
  Scalar damping = Scalar(3e-4);
  Scalar torque_gain = Scalar(0.03);
  Scalar gravity = Scalar(9.81);
  PendulumModel model = PendulumModel::disk;

  Scalar inertia() const {
    const Scalar j = mass * length * length;
    return model == PendulumModel::disk ? j : j / Scalar(3);
  }

  void check() const {
    using std::isfinite;
    if (!(mass > Scalar(0)) || !(length > Scalar(0))) {
      throw std::invalid_argument("pendulum mass and length must be > 0");
    }
    if (!(damping >= Scalar(0)) || !(torque_gain >= Scalar(0))) {
      throw std::invalid_argument("pendulum damping and torque gain must be >= 0");
    }
    if (!isfinite(gravity)) throw std::invalid_argument("gravity must be finite");
  }
};

template <typename Scalar>
using PendulumState = Eigen::Matrix<Scalar, 2, 1>;

/// sin(x) evaluated on the representative nearest zero, folded so that
/// multiples of pi give exactly 0.
template <typename Scalar>
Scalar folded_sin(Scalar x) {
  using std::remainder;
  using std::sin;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar r = remainder(x, Scalar(2) * pi);
  if (r > pi / Scalar(2)) return sin(pi - r);
  if (r < -pi / Scalar(2)) return sin(-pi - r);
  return sin(r);
}

/// Angle in (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar x) {
  using std::remainder;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  Scalar r = remainder(x, Scalar(2) * pi);
  if (r <= -pi) r += Scalar(2) * pi;
  return r;
}

template <typename Scalar>
PendulumState<Scalar> pendulum_rhs(const PendulumState<Scalar>& q, Scalar u,
                                   const PendulumParams<Scalar>& p) {
  const Scalar torque = -p.mass * p.gravity * p.length * folded_sin(q(0)) - p.damping * q(1) +
                        p.torque_gain * u;
  return PendulumState<Scalar>(q(1), torque / p.inertia());
}

/// One classical Runge-Kutta step of x' = f(x).
template <typename F, typename Vec, typename Scalar>
Vec rk4_step(F&& f, const Vec& x, Scalar h) {
  const Vec k1 = f(x);
  const Vec k2 = f(Vec(x + (h / Scalar(2)) * k1));
  const Vec k3 = f(Vec(x + (h / Scalar(2)) * k2));
  const Vec k4 = f(Vec(x + h * k3));
  return x + (h / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
}

template <typename Scalar>
PendulumState<Scalar> pendulum_step(const PendulumState<Scalar>& q, Scalar u,
                                    const PendulumParams<Scalar>& p, Scalar h) {
  return rk4_step([&](const PendulumState<Scalar>& x) { return pendulum_rhs(x, u, p); }, q, h);
}

/// Kinetic plus potential energy, zero at the hanging rest state.
template <typename Scalar>
Scalar pendulum_energy(const PendulumState<Scalar>& q, const PendulumParams<Scalar>& p) {
  using std::cos;
  return Scalar(0.5) * p.inertia() * q(1) * q(1) +
         p.mass * p.gravity * p.length * (Scalar(1) - cos(q(0)));
}

/// Small-angle period 2 pi sqrt(J / (m g l)).
template <typename Scalar>
Scalar small_angle_period(const PendulumParams<Scalar>& p) {
  using std::sqrt;
  return Scalar(2) * std::numbers::pi_v<Scalar> * sqrt(p.inertia() / (p.mass * p.gravity * p.length));
}

struct EngineState {
  double sim_time = 0.0;
  PendulumState<double> q = PendulumState<double>::Zero();
  std::uint64_t step_index = 0;
};

/// Advances one engine tick of 1 / rate. Throws on a non-finite result.
EngineState step(const EngineState& state, double u, const PendulumParams<double>& params,
                 double rate);

}  // namespace syncflow
