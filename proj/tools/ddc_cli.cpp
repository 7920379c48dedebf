#include <CLI11.hpp>

#include "ddc/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Double-diffusive convection: onset, Hopf branch, Floquet and simulation runs"};
  app.set_version_flag("--version", ddc::kVersion);
  app.require_subcommand(1);

  ddc::harness::RunOptions ro;
  std::string config;
  app.add_option("--config", config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", ro.out, "Output directory");
  app.add_option("--threads", ro.threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_option("--seed", ro.seed, "Seed for random initial data");

  const std::pair<const char*, const char*> commands[] = {
      {"critical", "Critical R1, frequency and transversality for each eps"},
      {"branch", "Periodic branch points by fixed-point iteration"},
      {"floquet", "Floquet exponents from the monodromy matrix and the Hill operator"},
      {"simulate", "Time integration to the limit cycle and below onset"},
      {"sweep-eps", "Convergence of branch data as eps -> 0"},
      {"plots", "Gnuplot scripts for the CSV files in the output directory"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ddc::harness::kHard;
  }
  ro.config = config;
  return ddc::harness::run(app.get_subcommands().front()->get_name(), ro);
}
