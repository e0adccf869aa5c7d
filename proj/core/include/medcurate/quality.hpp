#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcurate/corpus.hpp"
#include "medcurate/judge.hpp"

namespace medcurate::quality {

enum class Dimension {
  kMedicalAccuracy,
  kLanguageClarity,
  kCompleteness,
  kImagingRelevance,
  kPracticality,
};

inline constexpr std::array<Dimension, 5> kDimensions = {
    Dimension::kMedicalAccuracy, Dimension::kLanguageClarity, Dimension::kCompleteness,
    Dimension::kImagingRelevance, Dimension::kPracticality};

// snake_case key, e.g. "medical_accuracy".
std::string_view ToString(Dimension dimension);

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 5;

struct DimensionScore {
  int score = kMinScore;
  std::string comment;

  friend bool operator==(const DimensionScore&, const DimensionScore&) = default;
};

struct QualityScore {
  std::string sample_id;
  std::array<DimensionScore, 5> dims;  // indexed by Dimension
  DimensionScore overall;
  // Set when imaging relevance was forced to 1 for an image-less sample.
  std::optional<std::string> override_note;

  const DimensionScore& operator[](Dimension d) const { return dims[static_cast<std::size_t>(d)]; }
  DimensionScore& operator[](Dimension d) { return dims[static_cast<std::size_t>(d)]; }
};

enum class ParseFailure { kNoJson, kMissingDimension, kScoreOutOfRange, kInvalidScore };
std::string_view ToString(ParseFailure failure);

struct ParseFailureInfo {
  ParseFailure code = ParseFailure::kNoJson;
  std::string detail;
};

using ParseResult = std::variant<QualityScore, ParseFailureInfo>;

enum class Decision { kKeep, kDrop, kUndecided };
std::string_view ToString(Decision decision);

struct JudgePolicy {
  std::size_t sample_size = 500;
  std::uint64_t seed = 1;
  double min_overall_mean = 3.5;
  double min_dim_mean = 3.0;
  double max_failure_fraction = 0.1;

  void Validate() const;
};

struct ScoreStats {
  std::optional<double> mean;            // empty when nothing was judged
  std::array<std::size_t, 5> histogram{};  // histogram[k] counts score k+1
};

struct AssessmentReport {
  std::string dataset_id;
  std::size_t n_sampled = 0;
  std::size_t n_judged = 0;
  std::array<ScoreStats, 5> dims;  // indexed by Dimension
  ScoreStats overall;
  std::size_t failure_count = 0;
  std::map<std::string, std::size_t> failures_by_code;
  Decision decision = Decision::kUndecided;
  std::vector<std::string> annotations;
  std::vector<QualityScore> scores;  // parsed judgments, in sample order

  double failure_fraction() const {
    const std::size_t attempted = n_judged + failure_count;
    return attempted == 0 ? 0.0 : static_cast<double>(failure_count) / attempted;
  }
};

// Uniform selection without replacement of min(sample_size, n) samples by
// reservoir sampling, in one pass. Output keeps stream order. Throws
// Error(kConfig, "quality.empty_dataset") on an empty stream.
std::vector<corpus::Sample> SampleForReview(
    const std::function<std::optional<corpus::Sample>()>& next, const JudgePolicy& policy);
std::vector<corpus::Sample> SampleForReview(std::span<const corpus::Sample> samples,
                                            const JudgePolicy& policy);

// The rubric prompt with the serialized sample substituted for {s}.
std::string BuildPrompt(const corpus::Sample& sample);
// The text that replaces {s}.
std::string SerializeForJudge(const corpus::Sample& sample);
// The rubric template itself, containing the literal placeholder "{s}".
std::string_view PromptTemplate();

ParseResult ParseJudgment(std::string_view raw, bool had_image, std::string sample_id = {});

Decision Decide(const AssessmentReport& report, const JudgePolicy& policy);

struct AssessOptions {
  std::size_t max_retries = 3;  // extra attempts after a transient failure
  std::chrono::milliseconds retry_backoff{0};
  std::size_t max_in_flight = 1;
  std::optional<double> requests_per_minute;  // no limit when empty
};

// build prompt -> judge -> parse for each sample, then aggregate and decide.
AssessmentReport AssessDataset(std::string dataset_id, std::span<const corpus::Sample> samples,
                               JudgeClient& judge, const JudgePolicy& policy,
                               const AssessOptions& options = {});

nlohmann::ordered_json ReportToJson(const AssessmentReport& report);
AssessmentReport ReportFromJson(const nlohmann::json& doc);

}  // namespace medcurate::quality
