#include "rsteer/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "rsteer/error.hpp"

namespace rsteer {

using nlohmann::json;

namespace {

constexpr std::array<RubricDimension, kRubricSize> kDimensions = {
    RubricDimension::AwarenessOfFalse, RubricDimension::RefusalJudgment, RubricDimension::RoleBackground,
    RubricDimension::RoleStyle,        RubricDimension::RoleAbilities,   RubricDimension::RolePersonality,
    RubricDimension::Consistency,      RubricDimension::Quality,         RubricDimension::Factuality};

bool contains(std::string_view text, std::string_view needle) { return text.find(needle) != std::string_view::npos; }

}  // namespace

std::string_view to_string(RubricDimension d) {
  switch (d) {
    case RubricDimension::AwarenessOfFalse: return "awareness_of_false";
    case RubricDimension::RefusalJudgment: return "refusal_judgment";
    case RubricDimension::RoleBackground: return "role_background";
    case RubricDimension::RoleStyle: return "role_style";
    case RubricDimension::RoleAbilities: return "role_abilities";
    case RubricDimension::RolePersonality: return "role_personality";
    case RubricDimension::Consistency: return "consistency";
    case RubricDimension::Quality: return "quality";
    case RubricDimension::Factuality: return "factuality";
  }
  return "?";
}

std::string_view criterion(RubricDimension d) {
  switch (d) {
    case RubricDimension::AwarenessOfFalse:
      return "Does the response notice that the query contains a false premise or asks about something the character "
             "cannot know? 2 = clearly notices, 1 = hints at it, 0 = does not notice.";
    case RubricDimension::RefusalJudgment:
      return "Does the response refuse or qualify exactly when it should? 2 = correct choice, 1 = partially, "
             "0 = answers a conflicting query outright or refuses a legitimate one.";
    case RubricDimension::RoleBackground:
      return "Is the response faithful to the character's background and setting? 2 = fully, 1 = minor slips, 0 = not.";
    case RubricDimension::RoleStyle:
      return "Does the response keep the character's speaking style? 2 = consistently, 1 = partly, 0 = not at all.";
    case RubricDimension::RoleAbilities:
      return "Does the response stay within the character's abilities and knowledge? 2 = yes, 1 = mostly, 0 = no.";
    case RubricDimension::RolePersonality:
      return "Does the response reflect the character's personality? 2 = clearly, 1 = weakly, 0 = contradicts it.";
    case RubricDimension::Consistency:
      return "Is the response internally consistent and consistent with the conversation? 2 = yes, 1 = minor issues, "
             "0 = contradicts itself.";
    case RubricDimension::Quality:
      return "Is the response fluent, relevant and well formed? 2 = good, 1 = acceptable, 0 = poor.";
    case RubricDimension::Factuality:
      return "Are the factual statements correct with respect to the reference? 2 = correct, 1 = partly, 0 = wrong.";
  }
  return "";
}

double RubricScore::sample_score() const {
  if (applicable.none()) throw Error("judge", ErrorCode::InvariantViolation, "no applicable rubric dimension");
  int sum = 0;
  for (std::size_t k = 0; k < kRubricSize; ++k) {
    if (scores[k] < 0 || scores[k] > 2) {
      throw Error("judge", ErrorCode::InvariantViolation, fmt::format("score {} outside {{0,1,2}}", scores[k]));
    }
    if (applicable[k]) sum += scores[k];
  }
  return static_cast<double>(sum) / static_cast<double>(applicable.count());
}

DimensionSet applicable_dimensions(QueryType qt, ApplicabilityMode mode) {
  DimensionSet set;
  set.set();
  if (mode == ApplicabilityMode::SkipRefusalOnNonConflict && !is_conflict(qt)) {
    set.reset(static_cast<std::size_t>(RubricDimension::AwarenessOfFalse));
    set.reset(static_cast<std::size_t>(RubricDimension::RefusalJudgment));
  }
  return set;
}

RubricScore MockJudge::score(const QueryRecord& record, const std::string& response, const std::string&) const {
  if (response.empty()) throw Error("judge", ErrorCode::InvalidArgument, "empty response for " + record.id);
  const bool refused = contains(response, kRefusalMarker);
  const bool caveat = contains(response, kCaveatMarker);
  const bool answered = contains(response, kAnswerMarker);

  RubricScore s;
  s.scores.fill(2);
  s.applicable = applicable_dimensions(record.query_type, mode_);
  switch (record.expected_behavior) {
    case ExpectedBehavior::Refuse:
      s[RubricDimension::RefusalJudgment] = refused ? 2 : 0;
      s[RubricDimension::AwarenessOfFalse] = refused || caveat ? 2 : 0;
      break;
    case ExpectedBehavior::Caveat:
      s[RubricDimension::RefusalJudgment] = refused || caveat ? 2 : 0;
      s[RubricDimension::AwarenessOfFalse] = refused || caveat ? 2 : 0;
      break;
    case ExpectedBehavior::Answer:
      s[RubricDimension::RefusalJudgment] = refused ? 0 : 2;
      s[RubricDimension::AwarenessOfFalse] = refused ? 0 : (caveat ? 1 : 2);
      break;
  }
  if (refused && answered) s[RubricDimension::Consistency] = 0;
  return s;
}

std::string rubric_text() {
  std::string text = "Score the response on each dimension below with an integer 0, 1 or 2.\n";
  for (std::size_t k = 0; k < kRubricSize; ++k) {
    text += fmt::format("{}. {}: {}\n", k + 1, to_string(kDimensions[k]), criterion(kDimensions[k]));
  }
  text += "Reply with the nine scores in this order as a JSON array, for example [2,1,2,2,2,2,2,1,2].\n";
  return text;
}

std::optional<std::array<int, kRubricSize>> extract_verdict(std::string_view text) {
  std::vector<long> run;
  int commas = 0;
  std::optional<std::array<int, kRubricSize>> found;
  auto flush = [&] {
    if (run.size() == kRubricSize && std::all_of(run.begin(), run.end(), [](long v) { return v >= 0 && v <= 2; })) {
      std::array<int, kRubricSize> out{};
      std::copy(run.begin(), run.end(), out.begin());
      found = out;
    }
    run.clear();
    commas = 0;
    return found.has_value();
  };
  auto is_word = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  auto is_digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (is_digit(c)) {
      std::size_t j = i;
      while (j < n && is_digit(text[j])) ++j;
      const bool bad_before = i > 0 && (is_word(text[i - 1]) || text[i - 1] == '.' || text[i - 1] == '-');
      const bool bad_after = j < n && (is_word(text[j]) || (text[j] == '.' && j + 1 < n && is_digit(text[j + 1])));
      if (bad_before || bad_after) {
        if (flush()) return found;
        while (j < n && (is_digit(text[j]) || is_word(text[j]) || text[j] == '.')) ++j;
        i = j;
        continue;
      }
      run.push_back(j - i > 3 ? 999 : std::stol(std::string(text.substr(i, j - i))));
      commas = 0;
      i = j;
      continue;
    }
    if (c == ',' && !run.empty()) {
      if (++commas > 1 && flush()) return found;
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      if (flush()) return found;
    }
    ++i;
  }
  flush();
  return found;
}

BatchResult score_batch(const Judge& judge, std::span<const JudgeItem> items, int parallelism) {
  if (parallelism < 1) throw Error("judge", ErrorCode::InvalidArgument, "parallelism must be >= 1");
  BatchResult result;
  result.scores.resize(items.size());
  std::vector<std::optional<std::string>> errors(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        result.scores[i] = judge.score(items[i].record, items[i].response, items[i].role_profile);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism), items.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (errors[i]) result.failures.push_back({i, items[i].record.id, *errors[i]});
  }
  return result;
}

void write_results(std::span<const JudgeItem> items, const BatchResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("judge", ErrorCode::IoError, "cannot write " + path.string());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!result.scores[i]) continue;
    const auto& s = *result.scores[i];
    json j;
    j["id"] = items[i].record.id;
    j["query_type"] = std::string(to_string(items[i].record.query_type));
    j["scores"] = s.scores;
    j["sample_score"] = s.sample_score();
    out << j.dump() << '\n';
  }
  if (!out) throw Error("judge", ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<ScoredSample> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("judge", ErrorCode::IoError, "cannot read " + path.string());
  std::vector<ScoredSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    auto bad = [&] {
      return Error("judge", ErrorCode::InvalidArgument, fmt::format("{}:{}: malformed result line", path.string(), lineno));
    };
    if (j.is_discarded() || !j.is_object() || !j.contains("query_type") || !j.contains("sample_score")) throw bad();
    if (!j["query_type"].is_string() || !j["sample_score"].is_number()) throw bad();
    const auto qt = parse_query_type(j["query_type"].get<std::string>());
    if (!qt) throw bad();
    ScoredSample s;
    s.id = j.value("id", "");
    s.query_type = *qt;
    s.sample_score = j["sample_score"].get<double>();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace rsteer
