#pragma once

#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lesion_triage/error.hpp"

namespace lt::cli {

inline constexpr std::uint64_t kDefaultSeed = 42;

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kModel = 4 };

/// Bad flags, unknown override keys and invalid config values.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorKind kind);

/// Applies `key=value` overrides to `base`. Keys must already exist in
/// `base` (dotted keys reach into nested objects); values are parsed as
/// JSON when possible, otherwise taken as strings, and must match the type
/// of the value they replace. Throws UsageError.
nlohmann::ordered_json apply_overrides(nlohmann::ordered_json base, const std::vector<std::string>& sets);

/// Entry point behind the lesion-triage binary. Never throws.
int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace lt::cli
