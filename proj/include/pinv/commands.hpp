#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pinv {

struct CommandOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<unsigned> threads;
    bool quiet = false;
};

const std::vector<std::string>& subcommands();

/// `git describe --always --dirty` of the source tree at configure time.
std::string git_describe();

/// Runs one subcommand and returns the process exit status: 0 ok, 1 numerical
/// failure (or a failed check in `verify`), 2 configuration error.  Every run
/// writes <out>/manifest.json; failures also write <out>/error.json and print
/// the same record as one JSON line on `err`.
int run_command(const std::string& subcommand, const CommandOptions& options, std::ostream& log, std::ostream& err);

}  // namespace pinv
