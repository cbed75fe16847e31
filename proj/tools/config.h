#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "drf/meta.h"
#include "drf/problems.h"

namespace drf::cli {

// Raised for invalid configuration; the message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
  SearchOptions options;
};

struct RunConfig {
  SolverConfig solver;
  std::optional<Bracket> objective;
  nlohmann::json problem;  // as given, resolved by BuildProblem
  nlohmann::json echo;     // every key with defaults filled in
  std::filesystem::path base_dir;
};

RunConfig LoadRunConfig(const std::string& path);
RunConfig ParseRunConfig(const nlohmann::json& doc, const std::filesystem::path& base_dir);

struct BuiltProblem {
  DrfProblem problem;
  ProblemFamily family;  // for optimize
};

// Fills defaults into config.echo["problem"].
BuiltProblem BuildProblem(RunConfig& config);

}  // namespace drf::cli
