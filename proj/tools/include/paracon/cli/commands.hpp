#pragma once

#include "paracon/cli/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace paracon::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitMaxIter = 2,
  kExitAssumption = 3,
};

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::optional<std::filesystem::path> out;
  // report
  std::optional<std::filesystem::path> trace;
  // estimate-delta
  std::optional<double> epsilon;
  std::optional<double> radius;
};

int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_validate(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_estimate_delta(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_report(const CommandOptions& options, std::ostream& out, std::ostream& err);

/// Certificate for one run of `instance`, with the a-priori Q column filled
/// from delta estimates when the instance has a common fixed point.
Certificate make_certificate(const RunConfig& config, const ProblemInstance& instance, const std::string& run_id,
                             const IterationRun& run);

}  // namespace paracon::cli
