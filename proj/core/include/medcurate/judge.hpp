#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "medcurate/error.hpp"

namespace medcurate::quality {

struct JudgeRequest {
  std::string sample_id;
  std::string prompt;
};

// Raised by JudgeClient::Complete. Transient failures (timeouts, 429, 5xx)
// are retried by the caller; permanent ones are not.
class JudgeCallError : public Error {
 public:
  JudgeCallError(bool transient, const std::string& message)
      : Error(ErrorKind::kJudge, transient ? "quality.judge_transient" : "quality.judge_failed",
              message),
        transient_(transient) {}

  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

// Provider-agnostic judge transport. Implementations must be safe to call
// from several threads at once.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  // Returns the raw response text.
  virtual std::string Complete(const JudgeRequest& request) = 0;
};

// Serves recorded responses from <dir>/<sample_id>.json.
class ReplayJudge final : public JudgeClient {
 public:
  explicit ReplayJudge(std::filesystem::path dir);
  std::string Complete(const JudgeRequest& request) override;

 private:
  std::filesystem::path dir_;
};

struct HttpJudgeConfig {
  std::string base_url;  // e.g. https://api.example.com
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string auth_token;  // sent as a Bearer token when non-empty
  std::chrono::seconds timeout{120};
};

// Chat-completion style endpoint: POST {model, messages:[{role:"user",
// content:prompt}]}, answer read from choices[0].message.content.
class HttpJudge final : public JudgeClient {
 public:
  explicit HttpJudge(HttpJudgeConfig config);
  std::string Complete(const JudgeRequest& request) override;

  static std::string BuildRequestBody(const std::string& model, const std::string& prompt);
  // Throws JudgeCallError(false) when the body has no first-choice content.
  static std::string ExtractContent(const std::string& response_body);

 private:
  HttpJudgeConfig config_;
};

// Token bucket: `burst` tokens, refilled at requests_per_minute / 60 per
// second. Thread-safe.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;

  RateLimiter(double requests_per_minute, double burst = 1.0);

  // Blocks until a token is available.
  void Acquire();
  // Non-blocking; `now` is injectable for tests.
  bool TryAcquire(Clock::time_point now);
  // Time until the next token is available at `now` (zero if one is).
  Clock::duration WaitTime(Clock::time_point now);

 private:
  void Refill(Clock::time_point now);

  std::mutex mu_;
  double rate_per_second_;
  double burst_;
  double tokens_;
  Clock::time_point last_;
};

}  // namespace medcurate::quality
