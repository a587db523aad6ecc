#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dwpkit/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deep Wishart process toolkit"};
  app.require_subcommand(1);

  dwpkit::cli::CommandArgs args;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  for (const auto& name : dwpkit::cli::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON config file (schema: 1)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "overrides the config's seed");
    sub->add_option("--out", out, "output file (default stdout; train: checkpoint path)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  if (!config.empty()) args.config_path = config;
  if (sub->count("--seed") > 0) args.seed = seed;
  if (!out.empty()) args.out = out;
  return dwpkit::cli::run_command(sub->get_name(), args, std::cout, std::cerr);
}
