#include "rsteer/world.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "rsteer/error.hpp"
#include "rsteer/rng.hpp"

namespace rsteer {

std::string RoleFactWorld::role_name(int role) const { return fmt::format("role{:02d}", role); }

std::string RoleFactWorld::series_name(int series) const { return fmt::format("series{}", series); }

const ToyPrompt* RoleFactWorld::find(const std::string& id) const {
  for (const auto& p : prompts) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

RoleFactWorld build_world(const WorldParams& params) {
  if (params.n_series < 1 || params.roles_per_series < 1 || params.facts_per_series < 1 ||
      params.knowledge_per_role < 1) {
    throw Error("toymodel", ErrorCode::InfeasibleWorld, "world parameters must be positive");
  }
  if (params.knowledge_per_role >= params.facts_per_series) {
    throw Error("toymodel", ErrorCode::InfeasibleWorld,
                "knowledge_per_role must be smaller than facts_per_series (strict subset)");
  }
  if (!(params.holdout_fraction >= 0.0 && params.holdout_fraction < 1.0)) {
    throw Error("toymodel", ErrorCode::InfeasibleWorld, "holdout_fraction must lie in [0, 1)");
  }

  RoleFactWorld world;
  world.params = params;
  Rng rng(params.seed);

  // Each role takes the least-known facts of its series, ties broken at random.
  std::vector<int> known_by(static_cast<std::size_t>(world.n_facts()), 0);
  world.knowledge.resize(static_cast<std::size_t>(world.n_roles()));
  for (int role = 0; role < world.n_roles(); ++role) {
    const int series = world.series_of_role(role);
    std::vector<int> facts(static_cast<std::size_t>(params.facts_per_series));
    std::iota(facts.begin(), facts.end(), series * params.facts_per_series);
    rng.shuffle(std::span<int>(facts));
    std::stable_sort(facts.begin(), facts.end(), [&](int a, int b) {
      return known_by[static_cast<std::size_t>(a)] < known_by[static_cast<std::size_t>(b)];
    });
    facts.resize(static_cast<std::size_t>(params.knowledge_per_role));
    for (int f : facts) ++known_by[static_cast<std::size_t>(f)];
    std::sort(facts.begin(), facts.end());
    world.knowledge[static_cast<std::size_t>(role)] = std::move(facts);
  }

  for (int role = 0; role < world.n_roles(); ++role) {
    const auto& known = world.knowledge[static_cast<std::size_t>(role)];
    for (int fact = 0; fact < world.n_facts(); ++fact) {
      ToyPrompt p;
      p.role = role;
      p.fact = fact;
      p.id = fmt::format("role{:02d}_fact{:03d}", role, fact);
      if (world.series_of_fact(fact) != world.series_of_role(role)) {
        p.label = QueryType::RoleSetting;
      } else if (std::binary_search(known.begin(), known.end(), fact)) {
        p.label = QueryType::NonConflict;
      } else {
        p.label = QueryType::FactualKnowledge;
      }
      world.prompts.push_back(std::move(p));
    }
  }

  // Stratified hold-out: the same fraction of every label pool.
  std::map<QueryType, std::vector<std::size_t>> pools;
  for (std::size_t i = 0; i < world.prompts.size(); ++i) pools[world.prompts[i].label].push_back(i);
  for (auto& [label, idx] : pools) {
    rng.shuffle(std::span<std::size_t>(idx));
    const auto n_hold = static_cast<std::size_t>(std::floor(params.holdout_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < n_hold; ++k) world.prompts[idx[k]].held_out = true;
  }
  return world;
}

std::string token_name(int token, const RoleFactWorld& world) {
  switch (token) {
    case tokens::kQuery: return "<query>";
    case tokens::kAnswer: return "<answer>";
    case tokens::kRefuse: return "<refuse>";
    case tokens::kEnd: return "<end>";
    default: break;
  }
  const int role = token - tokens::kReservedCount;
  if (role >= 0 && role < world.n_roles()) return "<" + world.role_name(role) + ">";
  const int fact = role - world.n_roles();
  if (fact >= 0 && fact < world.n_facts()) return fmt::format("<fact{:03d}>", fact);
  return fmt::format("<tok{}>", token);
}

void save_world(const RoleFactWorld& world, const std::filesystem::path& path) {
  using nlohmann::json;
  const auto& p = world.params;
  json j;
  j["format"] = "rsteer-world";
  j["version"] = 1;
  j["params"] = {{"n_series", p.n_series},
                 {"roles_per_series", p.roles_per_series},
                 {"facts_per_series", p.facts_per_series},
                 {"knowledge_per_role", p.knowledge_per_role},
                 {"holdout_fraction", p.holdout_fraction},
                 {"seed", p.seed}};
  json prompts = json::array();
  for (const auto& q : world.prompts) {
    prompts.push_back({{"id", q.id}, {"label", std::string(to_string(q.label))}, {"held_out", q.held_out}});
  }
  j["prompts"] = std::move(prompts);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("toymodel", ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw Error("toymodel", ErrorCode::IoError, "write failed for " + path.string());
}

RoleFactWorld load_world(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw Error("toymodel", ErrorCode::IoError, "cannot read " + path.string());
  const json j = json::parse(in, nullptr, false);
  auto bad = [&](const std::string& why) {
    return Error("toymodel", ErrorCode::InvalidArgument, path.string() + ": " + why);
  };
  if (j.is_discarded() || !j.is_object()) throw bad("not a JSON object");
  if (j.value("format", "") != "rsteer-world" || j.value("version", 0) != 1) throw bad("not a version 1 world file");
  WorldParams p;
  try {
    const auto& jp = j.at("params");
    p.n_series = jp.at("n_series").get<int>();
    p.roles_per_series = jp.at("roles_per_series").get<int>();
    p.facts_per_series = jp.at("facts_per_series").get<int>();
    p.knowledge_per_role = jp.at("knowledge_per_role").get<int>();
    p.holdout_fraction = jp.at("holdout_fraction").get<double>();
    p.seed = jp.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw bad(e.what());
  }
  RoleFactWorld world = build_world(p);
  if (j.contains("prompts")) {
    const auto& prompts = j["prompts"];
    if (!prompts.is_array() || prompts.size() != world.prompts.size()) throw bad("prompt table does not match params");
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      const auto& q = world.prompts[i];
      if (prompts[i].value("id", "") != q.id || prompts[i].value("label", "") != to_string(q.label) ||
          prompts[i].value("held_out", !q.held_out) != q.held_out) {
        throw bad("prompt table does not match params at " + q.id);
      }
    }
  }
  return world;
}

}  // namespace rsteer
