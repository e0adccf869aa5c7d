#include "medcurate/judge.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace medcurate::quality {

ReplayJudge::ReplayJudge(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string ReplayJudge::Complete(const JudgeRequest& request) {
  if (request.sample_id.empty() || request.sample_id.find('/') != std::string::npos ||
      request.sample_id == "." || request.sample_id == "..") {
    throw JudgeCallError(false, fmt::format("sample id '{}' cannot name a replay file",
                                            request.sample_id));
  }
  const auto path = dir_ / (request.sample_id + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw JudgeCallError(false, "no replay transcript at " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

HttpJudge::HttpJudge(HttpJudgeConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    throw Error(ErrorKind::kConfig, "quality.bad_endpoint", "judge base URL is empty");
  }
}

std::string HttpJudge::BuildRequestBody(const std::string& model, const std::string& prompt) {
  nlohmann::ordered_json body;
  body["model"] = model;
  body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
  return body.dump();
}

std::string HttpJudge::ExtractContent(const std::string& response_body) {
  try {
    const auto doc = nlohmann::json::parse(response_body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw JudgeCallError(false, fmt::format("unexpected judge response: {}", e.what()));
  }
}

std::string HttpJudge::Complete(const JudgeRequest& request) {
  httplib::Client client(config_.base_url);
  const auto seconds = static_cast<time_t>(config_.timeout.count());
  client.set_connection_timeout(seconds, 0);
  client.set_read_timeout(seconds, 0);
  client.set_write_timeout(seconds, 0);

  httplib::Headers headers;
  if (!config_.auth_token.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.auth_token);
  }
  auto result = client.Post(config_.path, headers, BuildRequestBody(config_.model, request.prompt),
                            "application/json");
  if (!result) {
    throw JudgeCallError(true, fmt::format("transport error: {}", httplib::to_string(result.error())));
  }
  const int status = result->status;
  if (status == 429 || status >= 500) {
    throw JudgeCallError(true, fmt::format("HTTP {}", status));
  }
  if (status != 200) {
    throw JudgeCallError(false, fmt::format("HTTP {}: {}", status, result->body.substr(0, 200)));
  }
  return ExtractContent(result->body);
}

RateLimiter::RateLimiter(double requests_per_minute, double burst)
    : rate_per_second_(requests_per_minute / 60.0),
      burst_(std::max(burst, 1.0)),
      tokens_(std::max(burst, 1.0)),
      last_(Clock::now()) {
  if (!(requests_per_minute > 0.0)) {
    throw Error(ErrorKind::kConfig, "quality.bad_rate_limit", "requests_per_minute must be > 0");
  }
}

void RateLimiter::Refill(Clock::time_point now) {
  if (now <= last_) return;
  const double elapsed = std::chrono::duration<double>(now - last_).count();
  tokens_ = std::min(burst_, tokens_ + elapsed * rate_per_second_);
  last_ = now;
}

bool RateLimiter::TryAcquire(Clock::time_point now) {
  std::lock_guard lock(mu_);
  Refill(now);
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return true;
  }
  return false;
}

RateLimiter::Clock::duration RateLimiter::WaitTime(Clock::time_point now) {
  std::lock_guard lock(mu_);
  Refill(now);
  if (tokens_ >= 1.0) return Clock::duration::zero();
  const double seconds = (1.0 - tokens_) / rate_per_second_;
  return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
}

void RateLimiter::Acquire() {
  while (!TryAcquire(Clock::now())) {
    std::this_thread::sleep_for(std::max<Clock::duration>(WaitTime(Clock::now()),
                                                          std::chrono::microseconds(100)));
  }
}

}  // namespace medcurate::quality
