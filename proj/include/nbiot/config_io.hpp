#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "nbiot/config.hpp"

namespace nbiot {

enum class Quantity { dimensionless, duration, rate, bits, bits_squared, per_day, per_second, power, energy };

/// Parses "<number> [unit]" into SI base units for the given quantity. A bare
/// number is taken as already being in the base unit (per-day for session rates).
double parse_quantity(std::string_view text, Quantity quantity);

/// Reads an INI-style config with [model], [traffic], [schedule], [power] and
/// one [classN] section per coverage class (N = 1, 2, ...). Throws ConfigError.
SystemConfig parse_config(const std::string& text);
SystemConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(to_config_text(c)) == c.
std::string to_config_text(const SystemConfig& config);

}  // namespace nbiot
