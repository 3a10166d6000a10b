#include "syncflow/params.hpp"

#include <cctype>
#include <mutex>
#include <stdexcept>

namespace syncflow {

bool ParameterStore::well_formed(std::string_view key) {
  if (key.empty() || key.front() == '/' || key.back() == '/') return false;
  char prev = '\0';
  for (char c : key) {
    if (c == '/') {
      if (prev == '/') return false;
    } else if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) {
      return false;
    }
    prev = c;
  }
  return true;
}

void ParameterStore::set(std::string_view key, ParamValue value) {
  if (!well_formed(key)) throw std::invalid_argument("malformed parameter key '" + std::string(key) + "'");
  std::unique_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    entries_.emplace(std::string(key), Entry{std::move(value), 1});
  } else {
    it->second.value = std::move(value);
    ++it->second.version;
  }
}

std::optional<ParameterStore::Entry> ParameterStore::get(std::string_view key) const {
  if (!well_formed(key)) throw std::invalid_argument("malformed parameter key '" + std::string(key) + "'");
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParameterStore::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace syncflow
