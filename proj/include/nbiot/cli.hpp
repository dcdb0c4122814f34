#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nbiot::cli {

/// Exit codes of the command-line front end.
enum Exit : int {
  ok = 0,
  config_error = 2,
  instability = 3,
  under_sampled = 4,
  tolerance_exceeded = 5,
};

/// Environment variable naming the default output root (otherwise ./out).
inline constexpr const char* kOutputRootEnv = "NBIOT_OUT";

/// Runs one command line (without the program name) and returns its exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// First 16 hex digits of SHA-256 over the given text.
std::string content_id(const std::string& text);

}  // namespace nbiot::cli
