#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <CLI11.hpp>

namespace rsteer::cli {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::string quote_value(std::string_view s);
bool needs_quotes(std::string_view s);

/// One structured line on stderr: "level=info cmd=<cmd> k=v ...".
void log_info(std::string_view cmd, const KeyValues& fields);

struct Context {
  bool force = false;

  /// Throws Exists when `path` is present and --force was not given.
  void claim(const std::filesystem::path& path) const;
};

void write_text(const std::filesystem::path& path, const std::string& text);

/// Resolved options of `sub` as JSON, written to `path`.
void write_snapshot(const CLI::App& sub, const std::filesystem::path& path);

/// "<output>.run_config.json" for file outputs, "<dir>/run_config.json" for directories.
std::filesystem::path snapshot_path_for(const std::filesystem::path& output, bool is_directory = false);

struct Command {
  CLI::App* app = nullptr;
  std::function<void()> run;
};

std::vector<Command> register_commands(CLI::App& app, Context& ctx);

}  // namespace rsteer::cli
