#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "metaopt/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Optimize and meta-optimize language-model pipelines"};
  app.require_subcommand(1);

  std::string config_path;
  bool live = false;
  std::uint64_t seed = 0;

  const std::pair<const char*, const char*> modes[] = {
      {"run-inner", "Optimize one program with one optimizer"},
      {"run-meta", "Meta-optimize optimizers, then optimize the program"},
      {"eval", "Score a program on one dataset split"},
      {"bound", "Evaluate the two-sample generalization bound"},
      {"report", "Render tables over finished run directories"},
  };
  for (const auto& [name, help] : modes) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration file")
        ->required();
    sub->add_option("--seed", seed,
                    "run only this seed, overriding the config's list");
    sub->add_flag("--live", live,
                  "allow http engine bindings to reach the network");
  }

  CLI11_PARSE(app, argc, argv);

  auto* chosen = app.get_subcommands().front();
  metaopt::CliOptions options;
  options.mode = chosen->get_name();
  options.config_path = config_path;
  options.live = live;
  if (chosen->count("--seed") > 0) {
    options.has_seed_override = true;
    options.seed_override = seed;
  }
  return metaopt::cli_run(options, std::cout, std::cerr);
}
