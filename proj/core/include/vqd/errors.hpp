#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vqd {

/// Structural misuse of the API: grid mismatch, out-of-range arguments,
/// violated hard preconditions.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scenario configuration problems. Carries the full list of findings so a
/// config can be reported in one pass. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg, std::vector<std::string> details = {})
      : std::runtime_error(msg), details_(std::move(details)) {}
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  std::vector<std::string> details_;
};

/// Numerical breakdown (diagonalization failure, integrator non-convergence).
/// Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Collects non-fatal precondition findings (e.g. a boxed state that has not
/// decayed at the grid edge). Runs keep going; the findings end up in the
/// scenario summary.
class WarningLog {
 public:
  void add(std::string msg) { messages_.push_back(std::move(msg)); }
  const std::vector<std::string>& messages() const noexcept { return messages_; }
  bool empty() const noexcept { return messages_.empty(); }

 private:
  std::vector<std::string> messages_;
};

}  // namespace vqd
