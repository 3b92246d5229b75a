#include "json_config.hpp"

namespace rsteer::cli {

using nlohmann::json;

namespace {

std::string scalar_text(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
  if (j.is_number()) return j.dump();
  throw CLI::ConversionError("unsupported JSON value " + j.dump());
}

void flatten(const json& j, const std::string& name, const std::vector<std::string>& prefix,
             std::vector<CLI::ConfigItem>& out) {
  if (j.is_object()) {
    auto next = prefix;
    if (!name.empty()) next.push_back(name);
    for (auto it = j.begin(); it != j.end(); ++it) flatten(*it, it.key(), next, out);
    return;
  }
  if (name.empty()) throw CLI::ConversionError("top level of a JSON config must be an object");
  CLI::ConfigItem item;
  item.name = name;
  item.parents = prefix;
  if (j.is_array()) {
    for (const auto& v : j) item.inputs.push_back(scalar_text(v));
  } else {
    item.inputs = {scalar_text(j)};
  }
  out.push_back(std::move(item));
}

std::string option_key(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  if (!names.empty()) return names.front();
  return opt->get_name(false, true);
}

}  // namespace

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  const json j = json::parse(input, nullptr, false);
  if (j.is_discarded()) throw CLI::ConversionError("config file is not valid JSON");
  std::vector<CLI::ConfigItem> items;
  flatten(j, "", {}, items);
  return items;
}

std::string JsonConfig::to_config(const CLI::App* app, bool, bool, std::string) const {
  return resolved_options(*app).dump(2);
}

json resolved_options(const CLI::App& app) {
  json out = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string key = option_key(opt);
    if (key == "help" || key == "config" || key == "force") continue;
    const bool multi = opt->get_items_expected_max() > 1;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (opt->get_type_size() == 0) {
        out[key] = true;
      } else if (multi) {
        out[key] = results;
      } else if (!results.empty()) {
        out[key] = results.back();
      }
    } else if (!opt->get_default_str().empty()) {
      if (multi) {
        json arr = json::array();
        std::string s = opt->get_default_str();
        if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
        std::size_t pos = 0;
        while (pos <= s.size() && !s.empty()) {
          const auto comma = s.find(',', pos);
          std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
          item.erase(0, item.find_first_not_of(' '));
          arr.push_back(item);
          if (comma == std::string::npos) break;
          pos = comma + 1;
        }
        out[key] = arr;
      } else {
        out[key] = opt->get_default_str();
      }
    } else if (opt->get_type_size() == 0) {
      out[key] = false;
    }
  }
  return out;
}

}  // namespace rsteer::cli
