#pragma once

#include <CLI11.hpp>
#include <json.hpp>

namespace rsteer::cli {

/// CLI11 config reader for JSON files. Nested objects address subcommands:
/// {"probe": {"epochs": 5}} sets --epochs of the probe subcommand.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

/// Resolved option values of `app` (given, from config, or default), one key
/// per long option name.
nlohmann::json resolved_options(const CLI::App& app);

}  // namespace rsteer::cli
