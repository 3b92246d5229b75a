#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace rsteer {

/// The five query categories of the role-knowledge benchmark. The numeric
/// values are the on-disk label codes of the activation dump format.
enum class QueryType : std::uint8_t {
  NonConflict = 0,
  RoleSetting = 1,
  RoleProfile = 2,
  FactualKnowledge = 3,
  AbsentKnowledge = 4,
};

inline constexpr std::array<QueryType, 5> kAllQueryTypes = {
    QueryType::NonConflict, QueryType::RoleSetting, QueryType::RoleProfile,
    QueryType::FactualKnowledge, QueryType::AbsentKnowledge};

enum class ConflictClass : std::uint8_t { NonConflict, Contextual, Parametric };

constexpr ConflictClass conflict_class(QueryType qt) {
  switch (qt) {
    case QueryType::RoleSetting:
    case QueryType::RoleProfile:
      return ConflictClass::Contextual;
    case QueryType::FactualKnowledge:
    case QueryType::AbsentKnowledge:
      return ConflictClass::Parametric;
    case QueryType::NonConflict:
      break;
  }
  return ConflictClass::NonConflict;
}

constexpr bool is_conflict(QueryType qt) {
  return conflict_class(qt) != ConflictClass::NonConflict;
}

/// lower_snake_case name used in JSON and CSV ("role_setting").
std::string_view to_string(QueryType qt);
/// Column heading used in rendered tables ("Role Setting").
std::string_view display_name(QueryType qt);
std::string_view to_string(ConflictClass cc);

std::optional<QueryType> parse_query_type(std::string_view name);
std::optional<QueryType> query_type_from_code(std::uint8_t code);

}  // namespace rsteer
