#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbiot {

/// Raised when a configuration cannot be parsed or violates a structural invariant.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what, std::vector<std::string> violations = {})
      : std::runtime_error(what), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
  std::vector<std::string> violations_;
};

/// Raised when a queue or duty fraction leaves its stable region (w <= 0, y <= 0,
/// rho >= 1, nu >= 1). Carries every load figure that could be computed so callers
/// can report them.
class StabilityError : public std::runtime_error {
public:
  StabilityError(const std::string& what, std::map<std::string, double> figures)
      : std::runtime_error(what), figures_(std::move(figures)) {}

  const std::map<std::string, double>& figures() const noexcept { return figures_; }

private:
  std::map<std::string, double> figures_;
};

/// The simulated horizon did not yield a served session for some class after warmup.
class UnderSampledError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace nbiot
