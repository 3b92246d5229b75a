#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsteer/query_type.hpp"

namespace rsteer {

struct RoleFactWorld;

enum class ExpectedBehavior { Refuse, Answer, Caveat };

std::string_view to_string(ExpectedBehavior b);
std::optional<ExpectedBehavior> parse_expected_behavior(std::string_view name);

struct QueryRecord {
  std::string id;
  std::string role;
  std::string series;
  QueryType query_type = QueryType::NonConflict;
  std::string query;
  std::string reference;  // may be empty only for NonConflict
  ExpectedBehavior expected_behavior = ExpectedBehavior::Answer;

  bool operator==(const QueryRecord&) const = default;
};

struct CorpusStats {
  std::array<std::size_t, 5> counts{};  // indexed by QueryType code
  std::map<std::string, std::size_t> per_series;
  std::size_t duplicates = 0;
  std::size_t malformed = 0;
  std::map<std::string, std::size_t> drop_reasons;

  std::size_t total() const;
  std::size_t count(QueryType qt) const { return counts[static_cast<std::size_t>(qt)]; }
  /// Compares the per-type and per-series counts only.
  bool same_counts(const CorpusStats& other) const;
};

/// Extra per-record check run after the schema pass, e.g. a judge-backed
/// evidence filter. Returns a drop reason, or nullopt to keep the record.
using RecordFilter = std::function<std::optional<std::string>(const QueryRecord&)>;

struct IngestOptions {
  RecordFilter model_filter;
};

struct IngestResult {
  std::vector<QueryRecord> records;
  CorpusStats stats;
};

/// Parses one JSONL line. Returns the drop reason on failure.
std::optional<std::string> parse_record(const std::string& line, QueryRecord& out);
std::string record_to_json(const QueryRecord& r);

/// Reads a JSONL corpus, dropping malformed records and repeated query texts
/// (first occurrence kept). Blank lines are ignored.
IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options = {});
IngestResult ingest_lines(std::istream& in, const IngestOptions& options = {});

CorpusStats stats(std::span<const QueryRecord> records);

void write_corpus(std::span<const QueryRecord> records, const std::filesystem::path& path);

/// One record per toy prompt; conflicts expect Refuse, NonConflict expects Answer.
std::vector<QueryRecord> toyworld_to_corpus(const RoleFactWorld& world);

}  // namespace rsteer
