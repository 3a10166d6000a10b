#pragma once

#include <stdexcept>
#include <string>

namespace syncflow {

/// Invalid configuration: unknown keys, bad ranges, unsupported engines.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The transport broke its ordering/loss contract (sequence gap, reorder,
/// publish after shutdown).
class TransportViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A running episode halted: callback exception, contract violation, stall.
class EpisodeFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Typed access to the parameter store with the wrong type.
class ParamTypeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown inside blocking waits when the owning runtime is shutting down.
/// Hosts swallow it; it never reaches user code as a fault.
class Interrupted : public std::runtime_error {
 public:
  Interrupted() : std::runtime_error("interrupted") {}
};

}  // namespace syncflow
