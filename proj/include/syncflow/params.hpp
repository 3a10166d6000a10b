#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <variant>

#include "syncflow/errors.hpp"

namespace syncflow {

using ParamValue = std::variant<double, std::int64_t, bool, std::string, Eigen::VectorXd>;

/// Namespaced key/value store shared by every node of a runtime.
///
/// Keys are slash-separated paths of [A-Za-z0-9_-] segments. Writes are
/// last-write-wins; each key carries a version that increases with every
/// committed write, giving readers one total order per key.
class ParameterStore {
 public:
  struct Entry {
    ParamValue value;
    std::uint64_t version = 0;
  };

  void set(std::string_view key, ParamValue value);
  std::optional<Entry> get(std::string_view key) const;

  /// Typed read; nullopt when absent, ParamTypeError on a type mismatch.
  template <typename T>
  std::optional<T> get_as(std::string_view key) const {
    auto e = get(key);
    if (!e) return std::nullopt;
    if (const T* v = std::get_if<T>(&e->value)) return *v;
    throw ParamTypeError("parameter '" + std::string(key) + "' holds a different type");
  }

  std::size_t size() const;

  static bool well_formed(std::string_view key);

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, Entry, std::less<>> entries_;
};

}  // namespace syncflow
