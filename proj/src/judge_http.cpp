#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "rsteer/error.hpp"
#include "rsteer/judge.hpp"

namespace rsteer {

using nlohmann::json;

namespace {

constexpr std::string_view kDefaultTemplate =
    "You are a strict evaluator of role-playing dialogue. The user message is a JSON object with the fields "
    "rubric, role_profile, query and response. Read the role profile, then judge the response to the query "
    "against every rubric dimension. Output only the nine integer scores as a JSON array in rubric order.";

std::string reply_content(const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.contains("choices") && j["choices"].is_array() &&
      !j["choices"].empty()) {
    const auto& choice = j["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      return choice["message"]["content"].get<std::string>();
    }
  }
  return body;
}

}  // namespace

std::string_view default_judge_template() { return kDefaultTemplate; }

std::string load_judge_template(const std::filesystem::path& dir, const std::string& id) {
  const auto path = dir / (id + ".txt");
  std::ifstream in(path);
  if (!in) {
    if (id == "default") return std::string(kDefaultTemplate);
    throw Error("judge", ErrorCode::IoError, "judge template not found: " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

JudgeTransport http_transport(const JudgeClientConfig& config, std::string api_key) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config.endpoint, m, url_re)) {
    throw Error("judge", ErrorCode::InvalidArgument, "bad judge endpoint: " + config.endpoint);
  }
  const std::string base = m[1].str();
  const std::string path = m[2].matched ? m[2].str() : "/";
  const auto timeout = config.timeout;
  return [base, path, timeout, key = std::move(api_key)](const std::string& body) {
    httplib::Client client(base);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) throw std::runtime_error("request failed: " + httplib::to_string(res.error()));
    return HttpReply{res->status, res->body};
  };
}

JudgeClient::JudgeClient(JudgeClientConfig config, JudgeTransport transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (config_.max_retries < 1) throw Error("judge", ErrorCode::InvalidArgument, "max_retries must be >= 1");
  system_prompt_ = load_judge_template(config_.template_dir, config_.template_id);
  if (!transport_) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      const std::string env = config_.api_key_env;
      transport_ = [env](const std::string&) -> HttpReply {
        throw Error("judge", ErrorCode::JudgeUnavailable, "environment variable " + env + " is not set");
      };
    } else {
      transport_ = http_transport(config_, key);
    }
  }
}

std::string JudgeClient::request_body(const QueryRecord& record, const std::string& response,
                                      const std::string& role_profile) const {
  json user;
  user["rubric"] = rubric_text();
  user["role_profile"] = role_profile;
  user["query"] = record.query;
  user["response"] = response;
  json body;
  body["model"] = config_.model;
  body["temperature"] = 0;
  body["messages"] = json::array({json{{"role", "system"}, {"content", system_prompt_}},
                                  json{{"role", "user"}, {"content", user.dump()}}});
  return body.dump();
}

RubricScore JudgeClient::score(const QueryRecord& record, const std::string& response,
                               const std::string& role_profile) const {
  if (response.empty()) throw Error("judge", ErrorCode::InvalidArgument, "empty response for " + record.id);
  const std::string body = request_body(record, response, role_profile);
  bool unparseable = false;
  std::string last_error;
  for (int attempt = 0; attempt < config_.max_retries; ++attempt) {
    HttpReply reply;
    try {
      reply = transport_(body);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::JudgeUnavailable) throw;
      unparseable = false;
      last_error = e.what();
      continue;
    } catch (const std::exception& e) {
      unparseable = false;
      last_error = e.what();
      continue;
    }
    if (reply.status < 200 || reply.status >= 300) {
      unparseable = false;
      last_error = fmt::format("HTTP {}", reply.status);
      continue;
    }
    if (auto verdict = extract_verdict(reply_content(reply.body))) {
      RubricScore s;
      s.scores = *verdict;
      s.applicable = applicable_dimensions(record.query_type, config_.mode);
      return s;
    }
    unparseable = true;
    last_error = "no nine-score array in reply";
  }
  const auto msg = fmt::format("{} after {} attempt(s) for {}: {}", unparseable ? "unparseable verdict" : "judge unavailable",
                               config_.max_retries, record.id, last_error);
  throw Error("judge", unparseable ? ErrorCode::UnparseableVerdict : ErrorCode::JudgeUnavailable, msg);
}

}  // namespace rsteer
