#pragma once

#include <array>
#include <bitset>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsteer/corpus.hpp"
#include "rsteer/query_type.hpp"

namespace rsteer {

enum class RubricDimension : std::uint8_t {
  AwarenessOfFalse,
  RefusalJudgment,
  RoleBackground,
  RoleStyle,
  RoleAbilities,
  RolePersonality,
  Consistency,
  Quality,
  Factuality,
};

inline constexpr std::size_t kRubricSize = 9;
using DimensionSet = std::bitset<kRubricSize>;

std::string_view to_string(RubricDimension d);
/// One-line scoring criterion, embedded in judge requests.
std::string_view criterion(RubricDimension d);

struct RubricScore {
  std::array<int, kRubricSize> scores{};
  DimensionSet applicable = DimensionSet().set();

  int& operator[](RubricDimension d) { return scores[static_cast<std::size_t>(d)]; }
  int operator[](RubricDimension d) const { return scores[static_cast<std::size_t>(d)]; }

  /// Mean over applicable dimensions. Throws InvariantViolation on an empty
  /// applicable set or a score outside {0, 1, 2}.
  double sample_score() const;
};

enum class ApplicabilityMode { AllNine, SkipRefusalOnNonConflict };

/// Applicable dimensions for a query type. SkipRefusalOnNonConflict drops
/// AwarenessOfFalse and RefusalJudgment for NonConflict queries.
DimensionSet applicable_dimensions(QueryType qt, ApplicabilityMode mode);

class Judge {
 public:
  virtual ~Judge() = default;
  /// Must be safe to call concurrently.
  virtual RubricScore score(const QueryRecord& record, const std::string& response,
                            const std::string& role_profile) const = 0;
};

/// Offline rule-based judge. Pure function of (record, response).
class MockJudge final : public Judge {
 public:
  static constexpr std::string_view kRefusalMarker = "<refuse>";
  static constexpr std::string_view kCaveatMarker = "<caveat>";
  static constexpr std::string_view kAnswerMarker = "<answer>";

  explicit MockJudge(ApplicabilityMode mode = ApplicabilityMode::AllNine) : mode_(mode) {}
  RubricScore score(const QueryRecord& record, const std::string& response,
                    const std::string& role_profile = {}) const override;

 private:
  ApplicabilityMode mode_;
};

struct HttpReply {
  int status = 0;
  std::string body;
};

/// Sends one request body and returns the reply. Throws on transport failure.
using JudgeTransport = std::function<HttpReply(const std::string& body)>;

struct JudgeClientConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  std::chrono::seconds timeout{60};
  int max_retries = 3;  // total requests per response
  std::string template_id = "default";
  std::filesystem::path template_dir = "templates";
  std::string api_key_env = "RSTEER_JUDGE_API_KEY";
  ApplicabilityMode mode = ApplicabilityMode::AllNine;
};

/// Chat-completions judge. The reply must contain a run of nine integers in
/// {0, 1, 2}; surrounding prose is tolerated.
class JudgeClient final : public Judge {
 public:
  explicit JudgeClient(JudgeClientConfig config, JudgeTransport transport = {});
  RubricScore score(const QueryRecord& record, const std::string& response,
                    const std::string& role_profile) const override;

  std::string request_body(const QueryRecord& record, const std::string& response,
                           const std::string& role_profile) const;
  const JudgeClientConfig& config() const { return config_; }

 private:
  JudgeClientConfig config_;
  std::string system_prompt_;
  JudgeTransport transport_;
};

std::string_view default_judge_template();
/// Reads <dir>/<id>.txt; "default" without a file falls back to the built-in text.
std::string load_judge_template(const std::filesystem::path& dir, const std::string& id);

/// Rubric text listing the nine dimensions and the reply format.
std::string rubric_text();

/// First run of exactly nine integers in {0,1,2} separated by commas or
/// whitespace, bracketed or bare.
std::optional<std::array<int, kRubricSize>> extract_verdict(std::string_view text);

JudgeTransport http_transport(const JudgeClientConfig& config, std::string api_key);

struct JudgeItem {
  QueryRecord record;
  std::string response;
  std::string role_profile;
};

struct JudgeFailure {
  std::size_t index = 0;
  std::string id;
  std::string message;
};

struct BatchResult {
  std::vector<std::optional<RubricScore>> scores;  // aligned with input
  std::vector<JudgeFailure> failures;              // ordered by index
};

/// Scores items with at most `parallelism` calls in flight. Failures are
/// collected per item rather than thrown.
BatchResult score_batch(const Judge& judge, std::span<const JudgeItem> items, int parallelism = 4);

/// One line per scored item: {"id","query_type","scores":[...],"sample_score"}.
void write_results(std::span<const JudgeItem> items, const BatchResult& result, const std::filesystem::path& path);

struct ScoredSample {
  std::string id;
  QueryType query_type = QueryType::NonConflict;
  double sample_score = 0.0;
};

std::vector<ScoredSample> read_results(const std::filesystem::path& path);

}  // namespace rsteer
