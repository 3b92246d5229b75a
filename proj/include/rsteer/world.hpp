#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rsteer/query_type.hpp"

namespace rsteer {

/// Reserved token ids of the toy vocabulary. Role tokens follow the reserved
/// block, fact tokens follow the role tokens.
namespace tokens {
inline constexpr int kQuery = 0;
inline constexpr int kAnswer = 1;
inline constexpr int kRefuse = 2;
inline constexpr int kEnd = 3;
inline constexpr int kReservedCount = 4;
}  // namespace tokens

struct WorldParams {
  int n_series = 4;
  int roles_per_series = 3;
  int facts_per_series = 12;
  int knowledge_per_role = 6;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 7;
};

/// One prompt [ROLE, QUERY, FACT] with its label.
struct ToyPrompt {
  std::string id;
  int role = 0;
  int fact = 0;
  QueryType label = QueryType::NonConflict;
  bool held_out = false;

  int target() const { return label == QueryType::NonConflict ? tokens::kAnswer : tokens::kRefuse; }
};

/// Synthetic role/fact world. Series own disjoint fact sets; each role knows a
/// strict non-empty subset of its own series' facts. Asking a role about a
/// known fact is NonConflict, about an unknown fact of its own series is
/// FactualKnowledge (in-series), and about another series' fact is
/// RoleSetting (cross-series).
struct RoleFactWorld {
  WorldParams params;
  std::vector<std::vector<int>> knowledge;  // per role, sorted global fact ids
  std::vector<ToyPrompt> prompts;           // role-major, then fact order

  int n_roles() const { return params.n_series * params.roles_per_series; }
  int n_facts() const { return params.n_series * params.facts_per_series; }
  int series_of_role(int role) const { return role / params.roles_per_series; }
  int series_of_fact(int fact) const { return fact / params.facts_per_series; }

  int role_token(int role) const { return tokens::kReservedCount + role; }
  int fact_token(int fact) const { return tokens::kReservedCount + n_roles() + fact; }
  int vocab_required() const { return tokens::kReservedCount + n_roles() + n_facts(); }

  std::vector<int> prompt_tokens(const ToyPrompt& p) const {
    return {role_token(p.role), tokens::kQuery, fact_token(p.fact)};
  }

  std::string role_name(int role) const;
  std::string series_name(int series) const;
  const ToyPrompt* find(const std::string& id) const;
};

/// Deterministic given params.seed. Throws InfeasibleWorld when a role could
/// not know a strict non-empty subset of its series' facts.
RoleFactWorld build_world(const WorldParams& params);

std::string token_name(int token, const RoleFactWorld& world);

/// World file: the parameters plus the prompt table for inspection. Loading
/// rebuilds from the parameters and checks the table still matches.
void save_world(const RoleFactWorld& world, const std::filesystem::path& path);
RoleFactWorld load_world(const std::filesystem::path& path);

}  // namespace rsteer
