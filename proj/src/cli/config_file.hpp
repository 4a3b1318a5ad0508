#pragma once

#include <CLI11.hpp>

namespace cmib::cli {

// TOML reader/writer that also accepts a JSON object. Nested JSON objects
// map to dotted sections the same way TOML tables do.
class ConfigFile : public CLI::ConfigBase {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

// CLI11 only reads config files for the top-level app, so subcommand
// --config is expanded here: every key of the file not already given as a
// flag becomes "--key=value" (or "--key v1 v2 ..." for lists), inserted
// right after the subcommand. Keys may sit at top level or under a table
// named after the subcommand. Throws CLI::FileError when the file cannot be
// read.
std::vector<std::string> expand_config_args(const std::vector<std::string>& args);

}  // namespace cmib::cli
