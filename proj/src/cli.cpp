#include "rsteer/cli.hpp"

#include <fstream>
#include <iostream>

#include <fmt/format.h>

#include "cli_internal.hpp"
#include "json_config.hpp"

namespace rsteer {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage:
    case ErrorCode::Exists:
      return kExitUsage;
    case ErrorCode::JudgeUnavailable:
    case ErrorCode::UnparseableVerdict:
      return kExitExternal;
    case ErrorCode::InvariantViolation:
      return kExitInvariant;
    default:
      return kExitData;
  }
}

namespace cli {

std::string quote_value(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

bool needs_quotes(std::string_view s) {
  return s.empty() || s.find_first_of(" \t\"=\n") != std::string_view::npos;
}

void log_info(std::string_view cmd, const KeyValues& fields) {
  std::string line = fmt::format("level=info cmd={}", cmd);
  for (const auto& [k, v] : fields) line += fmt::format(" {}={}", k, needs_quotes(v) ? quote_value(v) : v);
  std::cerr << line << '\n';
}

void Context::claim(const std::filesystem::path& path) const {
  if (!force && std::filesystem::exists(path)) {
    throw Error("cli", ErrorCode::Exists, path.string() + " already exists (use --force to overwrite)");
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cli", ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error("cli", ErrorCode::IoError, "write failed for " + path.string());
}

std::filesystem::path snapshot_path_for(const std::filesystem::path& output, bool is_directory) {
  if (is_directory) return output / "run_config.json";
  return std::filesystem::path(output.string() + ".run_config.json");
}

void write_snapshot(const CLI::App& sub, const std::filesystem::path& path) {
  nlohmann::json j;
  std::vector<std::string> chain;
  for (const CLI::App* a = &sub; a != nullptr && a->get_parent() != nullptr; a = a->get_parent()) {
    chain.insert(chain.begin(), a->get_name());
  }
  nlohmann::json body = resolved_options(sub);
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) body = nlohmann::json{{*it, body}};
  write_text(path, body.dump(2) + "\n");
}

}  // namespace cli

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Steering, probing and evaluation toolkit for role-knowledge conflicts", "rsteer"};
  app.option_defaults()->always_capture_default();
  app.config_formatter(std::make_shared<cli::JsonConfig>());
  app.set_config("--config", "", "JSON config file; flags given on the command line take precedence");
  cli::Context ctx;
  app.add_flag("--force", ctx.force, "Overwrite existing outputs");
  app.require_subcommand(1);
  const auto commands = cli::register_commands(app, ctx);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (const auto& cmd : commands) {
      if (cmd.app->parsed()) {
        cmd.run();
        return kExitOk;
      }
    }
    throw Error("cli", ErrorCode::Usage, "no subcommand selected");
  } catch (const Error& e) {
    std::cerr << fmt::format("error module={} code={} exit={} message={}\n", e.module(), to_string(e.code()),
                             exit_code_for(e.code()), cli::quote_value(e.what()));
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << fmt::format("error module=cli code=Internal exit={} message={}\n", kExitInvariant, cli::quote_value(e.what()));
    return kExitInvariant;
  }
}

}  // namespace rsteer
