#include "rsteer/query_type.hpp"

namespace rsteer {

std::string_view to_string(QueryType qt) {
  switch (qt) {
    case QueryType::NonConflict: return "non_conflict";
    case QueryType::RoleSetting: return "role_setting";
    case QueryType::RoleProfile: return "role_profile";
    case QueryType::FactualKnowledge: return "factual_knowledge";
    case QueryType::AbsentKnowledge: return "absent_knowledge";
  }
  return "unknown";
}

std::string_view display_name(QueryType qt) {
  switch (qt) {
    case QueryType::NonConflict: return "Non-Conflict";
    case QueryType::RoleSetting: return "Role Setting";
    case QueryType::RoleProfile: return "Role Profile";
    case QueryType::FactualKnowledge: return "Factual Knowledge";
    case QueryType::AbsentKnowledge: return "Absent Knowledge";
  }
  return "Unknown";
}

std::string_view to_string(ConflictClass cc) {
  switch (cc) {
    case ConflictClass::NonConflict: return "non_conflict";
    case ConflictClass::Contextual: return "contextual";
    case ConflictClass::Parametric: return "parametric";
  }
  return "unknown";
}

std::optional<QueryType> parse_query_type(std::string_view name) {
  for (QueryType qt : kAllQueryTypes) {
    if (to_string(qt) == name) return qt;
  }
  return std::nullopt;
}

std::optional<QueryType> query_type_from_code(std::uint8_t code) {
  if (code < kAllQueryTypes.size()) return kAllQueryTypes[code];
  return std::nullopt;
}

}  // namespace rsteer
