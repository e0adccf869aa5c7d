#pragma once

#include <array>
#include <atomic>
#include <map>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "medcurate/judge.hpp"

namespace medcurate::testing {

// A response in the rubric's shape with the given five dimension scores and
// overall score.
inline std::string RubricResponse(const std::array<int, 5>& dims, int overall) {
  static const char* kKeys[] = {"Medical Information Accuracy", "Language Clarity and Fluency",
                                "Dialogue  Completeness", "Medical Imaging Relevance",
                                "Practicality"};
  nlohmann::ordered_json doc;
  for (std::size_t i = 0; i < 5; ++i) doc[kKeys[i]] = {{"score", dims[i]}, {"comment", "c"}};
  doc["Overall"] = {{"score", overall}, {"comment", "summary"}};
  return doc.dump();
}

// Answers from a fixed table keyed by sample id; counts calls.
class TableJudge final : public quality::JudgeClient {
 public:
  explicit TableJudge(std::map<std::string, std::string> table) : table_(std::move(table)) {}

  std::string Complete(const quality::JudgeRequest& request) override {
    ++calls;
    auto it = table_.find(request.sample_id);
    if (it == table_.end()) throw quality::JudgeCallError(false, "no entry for " + request.sample_id);
    return it->second;
  }

  std::atomic<int> calls{0};

 private:
  std::map<std::string, std::string> table_;
};

// Fails transiently `failures` times per sample before answering.
class FlakyJudge final : public quality::JudgeClient {
 public:
  FlakyJudge(int failures, std::string answer) : failures_(failures), answer_(std::move(answer)) {}

  std::string Complete(const quality::JudgeRequest& request) override {
    std::lock_guard lock(mu_);
    if (attempts_[request.sample_id]++ < failures_) throw quality::JudgeCallError(true, "503");
    return answer_;
  }

  int attempts(const std::string& id) {
    std::lock_guard lock(mu_);
    return attempts_[id];
  }

 private:
  int failures_;
  std::string answer_;
  std::mutex mu_;
  std::map<std::string, int> attempts_;
};

}  // namespace medcurate::testing
