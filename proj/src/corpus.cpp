#include "rsteer/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "rsteer/error.hpp"
#include "rsteer/world.hpp"

namespace rsteer {

using nlohmann::json;

std::string_view to_string(ExpectedBehavior b) {
  switch (b) {
    case ExpectedBehavior::Refuse: return "refuse";
    case ExpectedBehavior::Answer: return "answer";
    case ExpectedBehavior::Caveat: return "caveat";
  }
  return "?";
}

std::optional<ExpectedBehavior> parse_expected_behavior(std::string_view name) {
  if (name == "refuse") return ExpectedBehavior::Refuse;
  if (name == "answer") return ExpectedBehavior::Answer;
  if (name == "caveat") return ExpectedBehavior::Caveat;
  return std::nullopt;
}

std::size_t CorpusStats::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

bool CorpusStats::same_counts(const CorpusStats& other) const {
  return counts == other.counts && per_series == other.per_series;
}

std::optional<std::string> parse_record(const std::string& line, QueryRecord& out) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return "invalid_json";
  for (const char* key : {"id", "role", "series", "query_type", "query", "reference", "expected_behavior"}) {
    if (!j.contains(key)) return fmt::format("missing_{}", key);
    if (!j[key].is_string()) return fmt::format("bad_{}", key);
  }
  QueryRecord r;
  r.id = j["id"].get<std::string>();
  r.role = j["role"].get<std::string>();
  r.series = j["series"].get<std::string>();
  r.query = j["query"].get<std::string>();
  r.reference = j["reference"].get<std::string>();
  const auto qt = parse_query_type(j["query_type"].get<std::string>());
  if (!qt) return "bad_query_type";
  const auto behavior = parse_expected_behavior(j["expected_behavior"].get<std::string>());
  if (!behavior) return "bad_expected_behavior";
  r.query_type = *qt;
  r.expected_behavior = *behavior;

  if (r.id.empty()) return "empty_id";
  if (r.query.empty()) return "empty_query";
  if (is_conflict(r.query_type) == (r.expected_behavior == ExpectedBehavior::Answer)) return "behavior_mismatch";
  if (is_conflict(r.query_type) && r.reference.empty()) return "empty_reference";
  out = std::move(r);
  return std::nullopt;
}

std::string record_to_json(const QueryRecord& r) {
  json j;
  j["id"] = r.id;
  j["role"] = r.role;
  j["series"] = r.series;
  j["query_type"] = std::string(to_string(r.query_type));
  j["query"] = r.query;
  j["reference"] = r.reference;
  j["expected_behavior"] = std::string(to_string(r.expected_behavior));
  return j.dump();
}

IngestResult ingest_lines(std::istream& in, const IngestOptions& options) {
  IngestResult result;
  std::set<std::string> ids;
  std::set<std::string> queries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    QueryRecord r;
    auto reason = parse_record(line, r);
    if (!reason && ids.count(r.id)) reason = "duplicate_id";
    if (reason) {
      ++result.stats.malformed;
      ++result.stats.drop_reasons[*reason];
      continue;
    }
    if (queries.count(r.query)) {
      ++result.stats.duplicates;
      ++result.stats.drop_reasons["duplicate_query"];
      continue;
    }
    if (options.model_filter) {
      if (auto why = options.model_filter(r)) {
        ++result.stats.malformed;
        ++result.stats.drop_reasons["filter_" + *why];
        continue;
      }
    }
    ids.insert(r.id);
    queries.insert(r.query);
    result.records.push_back(std::move(r));
  }
  const CorpusStats kept = stats(result.records);
  result.stats.counts = kept.counts;
  result.stats.per_series = kept.per_series;
  return result;
}

IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("corpus", ErrorCode::IoError, "cannot read " + path.string());
  return ingest_lines(in, options);
}

CorpusStats stats(std::span<const QueryRecord> records) {
  CorpusStats s;
  for (const auto& r : records) {
    ++s.counts[static_cast<std::size_t>(r.query_type)];
    ++s.per_series[r.series];
  }
  return s;
}

void write_corpus(std::span<const QueryRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("corpus", ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& r : records) out << record_to_json(r) << '\n';
  if (!out) throw Error("corpus", ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<QueryRecord> toyworld_to_corpus(const RoleFactWorld& world) {
  std::vector<QueryRecord> out;
  out.reserve(world.prompts.size());
  for (const auto& p : world.prompts) {
    QueryRecord r;
    r.id = p.id;
    r.role = world.role_name(p.role);
    r.series = world.series_name(world.series_of_role(p.role));
    r.query_type = p.label;
    std::string query;
    for (int tok : world.prompt_tokens(p)) query += (query.empty() ? "" : " ") + token_name(tok, world);
    r.query = query;
    const std::string fact = token_name(world.fact_token(p.fact), world);
    switch (p.label) {
      case QueryType::NonConflict:
        r.reference = fmt::format("{} knows {}", r.role, fact);
        break;
      case QueryType::FactualKnowledge:
        r.reference = fmt::format("{} belongs to {} but {} does not know it", fact, r.series, r.role);
        break;
      default:
        r.reference = fmt::format("{} belongs to {}, outside {}", fact,
                                  world.series_name(world.series_of_fact(p.fact)), r.series);
        break;
    }
    r.expected_behavior = is_conflict(p.label) ? ExpectedBehavior::Refuse : ExpectedBehavior::Answer;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace rsteer
