#include "paracon/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace paracon::cli;

  CLI::App app{"Fixed-point and KM iterations for unions of paracontractions"};
  app.require_subcommand(1);

  CommandOptions options;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", options.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override every seed in the config");
    sub->add_option("--jobs", options.jobs, "Worker threads for independent runs")->check(CLI::PositiveNumber);
    sub->add_option("--out", options.out, "Output directory");
  };

  auto* run = app.add_subcommand("run", "Run iterations and write traces and certificates");
  add_common(run);
  auto* validate = app.add_subcommand("validate", "Check (A2) per operator and (A3) at sampled points");
  add_common(validate);
  auto* estimate = app.add_subcommand("estimate-delta", "Estimate the uniform decrease and the Q bounds");
  add_common(estimate);
  estimate->add_option("--epsilon", options.epsilon, "Residual threshold");
  estimate->add_option("--M", options.radius, "Radius of the sampled ball around theta");
  auto* report = app.add_subcommand("report", "Re-certify trace files");
  add_common(report);
  report->add_option("--trace", options.trace, "Trace file or directory (default: the config's output directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (auto* sub : {run, validate, estimate, report})
    if (sub->parsed() && sub->count("--seed")) options.seed = seed;

  if (run->parsed()) return cmd_run(options, std::cout, std::cerr);
  if (validate->parsed()) return cmd_validate(options, std::cout, std::cerr);
  if (estimate->parsed()) return cmd_estimate_delta(options, std::cout, std::cerr);
  return cmd_report(options, std::cout, std::cerr);
}
