#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rsteer/corpus.hpp"
#include "rsteer/world.hpp"
#include "test_util.hpp"

using namespace rsteer;
using rsteer::testing::fixture;
using rsteer::testing::TempDir;
using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

QueryRecord record(std::string id, QueryType qt, std::string query, std::string series = "s") {
  QueryRecord r;
  r.id = std::move(id);
  r.role = "role";
  r.series = std::move(series);
  r.query_type = qt;
  r.query = std::move(query);
  r.reference = "ref";
  r.expected_behavior = is_conflict(qt) ? ExpectedBehavior::Refuse : ExpectedBehavior::Answer;
  return r;
}

std::string lines(std::initializer_list<QueryRecord> rs) {
  std::string out;
  for (const auto& r : rs) out += record_to_json(r) + "\n";
  return out;
}

}  // namespace

TEST(Corpus, DuplicateQueryDropped) {
  std::istringstream in(lines({record("a", QueryType::NonConflict, "q1"), record("b", QueryType::RoleSetting, "q2"),
                               record("c", QueryType::FactualKnowledge, "q3"), record("d", QueryType::RoleProfile, "q1")}));
  const IngestResult r = ingest_lines(in);
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(r.stats.duplicates, 1u);
  EXPECT_EQ(r.records[0].id, "a");
  EXPECT_EQ(r.stats.drop_reasons.at("duplicate_query"), 1u);

  const IngestResult f = ingest(fixture("corpus/duplicate.jsonl"));
  EXPECT_EQ(f.records.size(), 3u);
  EXPECT_EQ(f.stats.duplicates, 1u);
}

TEST(Corpus, EmptyReference) {
  QueryRecord nc = record("a", QueryType::NonConflict, "q");
  nc.reference.clear();
  QueryRecord out;
  EXPECT_FALSE(parse_record(record_to_json(nc), out).has_value());
  QueryRecord ak = record("b", QueryType::AbsentKnowledge, "q");
  ak.reference.clear();
  EXPECT_EQ(parse_record(record_to_json(ak), out), "empty_reference");
}

TEST(Corpus, FiveEachCounts) {
  const IngestResult r = ingest(fixture("corpus/five_each.jsonl"));
  const json expected = read_json(fixture("corpus/five_each.expected.json"));
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(r.stats.counts[k], expected["counts"][k].get<std::size_t>());
  EXPECT_EQ(r.stats.per_series, (expected["per_series"].get<std::map<std::string, std::size_t>>()));
  EXPECT_EQ(r.stats.total(), 25u);
  EXPECT_EQ(r.stats.malformed, 0u);
}

TEST(Corpus, MalformedReasons) {
  const IngestResult r = ingest(fixture("corpus/malformed.jsonl"));
  const json expected = read_json(fixture("corpus/malformed.expected.json"));
  std::vector<std::string> kept;
  for (const auto& rec : r.records) kept.push_back(rec.id);
  EXPECT_EQ(kept, expected["kept"].get<std::vector<std::string>>());
  EXPECT_EQ(r.stats.malformed, expected["malformed"].get<std::size_t>());
  EXPECT_EQ(r.stats.drop_reasons, (expected["drop_reasons"].get<std::map<std::string, std::size_t>>()));
}

TEST(Corpus, IngestIsIdempotent) {
  TempDir dir;
  const IngestResult first = ingest(fixture("corpus/duplicate.jsonl"));
  write_corpus(first.records, dir / "once.jsonl");
  const IngestResult second = ingest(dir / "once.jsonl");
  EXPECT_EQ(second.records, first.records);
  EXPECT_EQ(second.stats.duplicates, 0u);
  EXPECT_EQ(second.stats.malformed, 0u);
  EXPECT_TRUE(second.stats.same_counts(first.stats));
}

TEST(Corpus, StatsAgreeWithIngest) {
  const IngestResult r = ingest(fixture("corpus/five_each.jsonl"));
  EXPECT_TRUE(stats(r.records).same_counts(r.stats));
}

TEST(Corpus, MissingFile) {
  EXPECT_RSTEER_ERROR(ingest("/nonexistent/corpus.jsonl"), ErrorCode::IoError);
}

TEST(Corpus, ToyWorld) {
  const RoleFactWorld world = build_world(WorldParams{});
  const auto records = toyworld_to_corpus(world);
  ASSERT_EQ(records.size(), 576u);
  for (const auto& r : records) {
    QueryRecord parsed;
    ASSERT_FALSE(parse_record(record_to_json(r), parsed).has_value()) << r.id;
    EXPECT_EQ(parsed, r);
    EXPECT_EQ(r.expected_behavior, is_conflict(r.query_type) ? ExpectedBehavior::Refuse : ExpectedBehavior::Answer);
  }
  std::ostringstream text;
  for (const auto& r : records) text << record_to_json(r) << '\n';
  std::istringstream in(text.str());
  const IngestResult back = ingest_lines(in);
  EXPECT_EQ(back.records.size(), 576u);
  EXPECT_EQ(back.stats.duplicates, 0u);
}

TEST(Corpus, ModelFilter) {
  IngestOptions opts;
  opts.model_filter = [](const QueryRecord& r) -> std::optional<std::string> {
    if (r.query_type == QueryType::AbsentKnowledge) return std::string("no_evidence");
    return std::nullopt;
  };
  const IngestResult r = ingest(fixture("corpus/five_each.jsonl"), opts);
  EXPECT_EQ(r.records.size(), 20u);
  EXPECT_EQ(r.stats.count(QueryType::AbsentKnowledge), 0u);
  EXPECT_EQ(r.stats.drop_reasons.at("filter_no_evidence"), 5u);
}
