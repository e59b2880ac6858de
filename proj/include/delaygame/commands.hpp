#ifndef DELAYGAME_COMMANDS_HPP
#define DELAYGAME_COMMANDS_HPP

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "delaygame/config.hpp"
#include "delaygame/report.hpp"

namespace delaygame {

const std::vector<std::string>& subcommands();

// A subcommand that does not apply to the configured model kind.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct CommandOutput {
  RunReport report;
  std::vector<TrajectoryTable> tables;
};

// Runs one subcommand; solver failures become failed flags, usage errors throw.
CommandOutput execute(const std::string& subcommand, const ModelConfig& config);

// Executes, writes report.json and the CSVs into out_dir, and prints one line per flag.
// Returns 0 when every flag passes, 1 otherwise, 2 on usage errors.
int run(const std::string& subcommand, const ModelConfig& config,
        const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace delaygame

#endif  // DELAYGAME_COMMANDS_HPP
