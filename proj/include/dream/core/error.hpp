#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dream {

// Caller passed something malformed (wrong sizes, bad arguments).
class usage_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values or a diverged optimisation.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration cannot be satisfied (overcrowded world, missing checkpoint, bad config).
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what), items_{what} {}
  explicit config_error(std::vector<std::string> items)
      : std::runtime_error(join(items)), items_(std::move(items)) {}

  const std::vector<std::string>& items() const noexcept { return items_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> items_;
};

// Replay buffer does not hold enough experiences for the requested batch.
class insufficient_data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dream
