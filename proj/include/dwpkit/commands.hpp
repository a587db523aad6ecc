#pragma once

// The command-line verbs as library functions. Each reads a JSON config
// (`schema: 1`), is deterministic given its seed and returns an exit code:
// 0 when every requested check passes, 1 when a check or the computation
// fails, 2 on unreadable or invalid input.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dwpkit::cli {

struct CommandArgs {
  std::optional<std::string> config_path;
  std::optional<std::string> config_text;  // used when no path is given
  std::optional<std::uint64_t> seed;       // overrides the config's seed
  std::optional<std::string> out;          // output file; stdout when absent
};

const std::vector<std::string>& command_names();

// `out` receives the primary output when args.out is unset; `log` receives
// reports and diagnostics.
int run_command(const std::string& name, const CommandArgs& args, std::ostream& out,
                std::ostream& log);

}  // namespace dwpkit::cli
