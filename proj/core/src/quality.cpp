#include "medcurate/quality.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <memory>
#include <thread>

#include <fmt/format.h>

#include "medcurate/error.hpp"
#include "medcurate/random.hpp"

namespace medcurate::quality {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::size_t kOverallSlot = kDimensions.size();

std::string NormalizeKey(std::string_view key) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : key) {
    if (std::isspace(c) || c == '_') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

// Maps a normalized response key to a dimension slot (5 = Overall).
std::optional<std::size_t> SlotForKey(const std::string& key) {
  static const std::map<std::string, std::size_t> kSlots = {
      {"medical information accuracy", 0},
      {"medical accuracy", 0},
      {"language clarity and fluency", 1},
      {"language clarity", 1},
      {"dialogue completeness", 2},
      {"caption/dialogue completeness", 2},
      {"completeness", 2},
      {"medical imaging relevance", 3},
      {"imaging relevance", 3},
      {"practicality", 4},
      {"overall", kOverallSlot},
      {"overall score", kOverallSlot},
  };
  auto it = kSlots.find(key);
  if (it == kSlots.end()) return std::nullopt;
  return it->second;
}

constexpr std::array<std::string_view, 6> kResponseNames = {
    "Medical Information Accuracy", "Language Clarity and Fluency", "Dialogue Completeness",
    "Medical Imaging Relevance", "Practicality", "Overall"};

// End (exclusive) of the balanced {...} starting at `open`, or npos.
std::size_t MatchBrace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::optional<json> FirstJsonObject(std::string_view text) {
  for (std::size_t open = text.find('{'); open != std::string_view::npos;
       open = text.find('{', open + 1)) {
    const std::size_t close = MatchBrace(text, open);
    if (close == std::string_view::npos) continue;
    json doc = json::parse(text.substr(open, close - open), nullptr, /*allow_exceptions=*/false);
    if (doc.is_object()) return doc;
  }
  return std::nullopt;
}

// Reads an integer score; integers or strings holding one are accepted.
std::optional<long long> ReadScore(const json& value) {
  if (value.is_number_integer()) return value.get<long long>();
  if (value.is_string()) {
    const auto& s = value.get_ref<const std::string&>();
    std::size_t begin = s.find_first_not_of(' ');
    std::size_t end = s.find_last_not_of(' ');
    if (begin == std::string::npos) return std::nullopt;
    const std::string digits = s.substr(begin, end - begin + 1);
    if (digits.empty() || digits.size() > 9 ||
        !std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) {
      return std::nullopt;
    }
    return std::stoll(digits);
  }
  return std::nullopt;
}

void AddToStats(ScoreStats& stats, int score) { ++stats.histogram[score - kMinScore]; }

void FinalizeStats(ScoreStats& stats, std::size_t n) {
  if (n == 0) {
    stats.mean.reset();
    return;
  }
  std::size_t weighted = 0;
  for (std::size_t k = 0; k < stats.histogram.size(); ++k) {
    weighted += (k + kMinScore) * stats.histogram[k];
  }
  stats.mean = static_cast<double>(weighted) / static_cast<double>(n);
}

ordered_json StatsToJson(const ScoreStats& stats) {
  ordered_json out;
  out["mean"] = stats.mean ? ordered_json(*stats.mean) : ordered_json(nullptr);
  out["histogram"] = stats.histogram;
  return out;
}

ScoreStats StatsFromJson(const json& doc) {
  ScoreStats stats;
  if (!doc.at("mean").is_null()) stats.mean = doc.at("mean").get<double>();
  stats.histogram = doc.at("histogram").get<std::array<std::size_t, 5>>();
  return stats;
}

Decision ParseDecision(std::string_view name) {
  if (name == "keep") return Decision::kKeep;
  if (name == "drop") return Decision::kDrop;
  if (name == "undecided") return Decision::kUndecided;
  throw Error(ErrorKind::kConfig, "quality.bad_report", fmt::format("decision '{}'", name));
}

struct Outcome {
  std::optional<QualityScore> score;
  std::string failure_code;
  std::string failure_detail;
};

Outcome JudgeOne(const corpus::Sample& sample, JudgeClient& judge, const AssessOptions& options,
                 RateLimiter* limiter) {
  const JudgeRequest request{sample.id, BuildPrompt(sample)};
  std::string raw;
  for (std::size_t attempt = 0;; ++attempt) {
    if (limiter != nullptr) limiter->Acquire();
    try {
      raw = judge.Complete(request);
      break;
    } catch (const JudgeCallError& e) {
      if (!e.transient() || attempt >= options.max_retries) {
        return {std::nullopt, "judge_unavailable", e.what()};
      }
      if (options.retry_backoff.count() > 0) {
        std::this_thread::sleep_for(options.retry_backoff * (attempt + 1));
      }
    }
  }
  auto parsed = ParseJudgment(raw, !sample.images.empty(), sample.id);
  if (auto* failure = std::get_if<ParseFailureInfo>(&parsed)) {
    return {std::nullopt, std::string(ToString(failure->code)), failure->detail};
  }
  return {std::get<QualityScore>(std::move(parsed)), {}, {}};
}

}  // namespace

std::string_view ToString(Dimension dimension) {
  switch (dimension) {
    case Dimension::kMedicalAccuracy: return "medical_accuracy";
    case Dimension::kLanguageClarity: return "language_clarity";
    case Dimension::kCompleteness: return "completeness";
    case Dimension::kImagingRelevance: return "imaging_relevance";
    case Dimension::kPracticality: return "practicality";
  }
  return "?";
}

std::string_view ToString(ParseFailure failure) {
  switch (failure) {
    case ParseFailure::kNoJson: return "no_json";
    case ParseFailure::kMissingDimension: return "missing_dimension";
    case ParseFailure::kScoreOutOfRange: return "score_out_of_range";
    case ParseFailure::kInvalidScore: return "invalid_score";
  }
  return "?";
}

std::string_view ToString(Decision decision) {
  switch (decision) {
    case Decision::kKeep: return "keep";
    case Decision::kDrop: return "drop";
    case Decision::kUndecided: return "undecided";
  }
  return "?";
}

void JudgePolicy::Validate() const {
  auto fail = [](const std::string& message) {
    throw Error(ErrorKind::kConfig, "quality.bad_policy", message);
  };
  if (sample_size < 1) fail("sample_size must be >= 1");
  if (min_overall_mean < kMinScore || min_overall_mean > kMaxScore) {
    fail("min_overall_mean must lie in [1, 5]");
  }
  if (min_dim_mean < kMinScore || min_dim_mean > kMaxScore) fail("min_dim_mean must lie in [1, 5]");
  if (max_failure_fraction < 0.0 || max_failure_fraction > 1.0) {
    fail("max_failure_fraction must lie in [0, 1]");
  }
}

std::vector<corpus::Sample> SampleForReview(
    const std::function<std::optional<corpus::Sample>()>& next, const JudgePolicy& policy) {
  policy.Validate();
  Rng rng(policy.seed);
  // Reservoir of (stream position, sample).
  std::vector<std::pair<std::size_t, corpus::Sample>> reservoir;
  reservoir.reserve(policy.sample_size);
  std::size_t seen = 0;
  while (auto sample = next()) {
    if (reservoir.size() < policy.sample_size) {
      reservoir.emplace_back(seen, std::move(*sample));
    } else {
      const std::uint64_t slot = UniformIndex(rng, seen + 1);
      if (slot < policy.sample_size) reservoir[slot] = {seen, std::move(*sample)};
    }
    ++seen;
  }
  if (seen == 0) throw Error(ErrorKind::kConfig, "quality.empty_dataset", "no samples to review");
  std::sort(reservoir.begin(), reservoir.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<corpus::Sample> out;
  out.reserve(reservoir.size());
  for (auto& [pos, sample] : reservoir) out.push_back(std::move(sample));
  return out;
}

std::vector<corpus::Sample> SampleForReview(std::span<const corpus::Sample> samples,
                                            const JudgePolicy& policy) {
  std::size_t i = 0;
  return SampleForReview(
      [&]() -> std::optional<corpus::Sample> {
        if (i >= samples.size()) return std::nullopt;
        return samples[i++];
      },
      policy);
}

ParseResult ParseJudgment(std::string_view raw, bool had_image, std::string sample_id) {
  auto doc = FirstJsonObject(raw);
  if (!doc) return ParseFailureInfo{ParseFailure::kNoJson, "no JSON object in response"};

  std::array<const json*, 6> blocks{};
  for (const auto& [key, value] : doc->items()) {
    if (auto slot = SlotForKey(NormalizeKey(key)); slot && blocks[*slot] == nullptr) {
      blocks[*slot] = &value;
    }
  }

  QualityScore result;
  result.sample_id = std::move(sample_id);
  for (std::size_t slot = 0; slot < blocks.size(); ++slot) {
    const json* block = blocks[slot];
    const std::string_view name = kResponseNames[slot];
    if (block == nullptr) {
      return ParseFailureInfo{ParseFailure::kMissingDimension, fmt::format("missing '{}'", name)};
    }
    DimensionScore& target = slot == kOverallSlot ? result.overall : result.dims[slot];
    const bool forced = slot == static_cast<std::size_t>(Dimension::kImagingRelevance) && !had_image;

    std::optional<long long> score;
    if (block->is_object()) {
      if (auto it = block->find("comment"); it != block->end() && it->is_string()) {
        target.comment = it->get<std::string>();
      }
      if (auto it = block->find("score"); it != block->end()) score = ReadScore(*it);
    } else {
      score = ReadScore(*block);
    }

    if (forced) {
      if (!score || *score != 1) {
        result.override_note =
            score ? fmt::format("imaging_relevance forced to 1 (no image; judge reported {})", *score)
                  : std::string("imaging_relevance forced to 1 (no image; judge score unreadable)");
      }
      target.score = 1;
      continue;
    }
    if (!score) {
      return ParseFailureInfo{ParseFailure::kInvalidScore,
                              fmt::format("'{}' has no integer score", name)};
    }
    if (*score < kMinScore || *score > kMaxScore) {
      return ParseFailureInfo{ParseFailure::kScoreOutOfRange,
                              fmt::format("'{}' score {} outside 1-5", name, *score)};
    }
    target.score = static_cast<int>(*score);
  }
  return result;
}

Decision Decide(const AssessmentReport& report, const JudgePolicy& policy) {
  if (report.n_judged == 0 || !report.overall.mean) return Decision::kUndecided;
  bool scores_ok = *report.overall.mean >= policy.min_overall_mean;
  for (const auto& stats : report.dims) {
    scores_ok = scores_ok && stats.mean && *stats.mean >= policy.min_dim_mean;
  }
  if (!scores_ok) return Decision::kDrop;
  if (report.failure_fraction() > policy.max_failure_fraction) return Decision::kUndecided;
  return Decision::kKeep;
}

AssessmentReport AssessDataset(std::string dataset_id, std::span<const corpus::Sample> samples,
                               JudgeClient& judge, const JudgePolicy& policy,
                               const AssessOptions& options) {
  policy.Validate();
  std::unique_ptr<RateLimiter> limiter;
  if (options.requests_per_minute) {
    limiter = std::make_unique<RateLimiter>(*options.requests_per_minute);
  }

  std::vector<Outcome> outcomes(samples.size());
  const std::size_t workers =
      std::clamp<std::size_t>(options.max_in_flight, 1, std::max<std::size_t>(samples.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      outcomes[i] = JudgeOne(samples[i], judge, options, limiter.get());
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < samples.size(); i = next++) {
          outcomes[i] = JudgeOne(samples[i], judge, options, limiter.get());
        }
      });
    }
  }

  AssessmentReport report;
  report.dataset_id = std::move(dataset_id);
  report.n_sampled = samples.size();
  std::size_t judge_failures = 0;
  for (auto& outcome : outcomes) {
    if (!outcome.score) {
      ++report.failure_count;
      ++report.failures_by_code[outcome.failure_code];
      if (outcome.failure_code == "judge_unavailable") ++judge_failures;
      continue;
    }
    const QualityScore& score = *outcome.score;
    for (std::size_t d = 0; d < kDimensions.size(); ++d) AddToStats(report.dims[d], score.dims[d].score);
    AddToStats(report.overall, score.overall.score);
    report.scores.push_back(std::move(*outcome.score));
  }
  report.n_judged = report.scores.size();
  for (auto& stats : report.dims) FinalizeStats(stats, report.n_judged);
  FinalizeStats(report.overall, report.n_judged);

  report.decision = Decide(report, policy);
  if (report.failure_fraction() > policy.max_failure_fraction) {
    report.annotations.push_back(fmt::format(
        "failure fraction {:.4f} exceeds {:.4f} ({} judge call failures, {} unparseable)",
        report.failure_fraction(), policy.max_failure_fraction, judge_failures,
        report.failure_count - judge_failures));
  }
  for (const auto& score : report.scores) {
    if (score.override_note) {
      report.annotations.push_back(fmt::format("{}: {}", score.sample_id, *score.override_note));
    }
  }
  return report;
}

ordered_json ReportToJson(const AssessmentReport& report) {
  ordered_json out;
  out["dataset_id"] = report.dataset_id;
  out["n_sampled"] = report.n_sampled;
  out["n_judged"] = report.n_judged;
  ordered_json dims;
  for (Dimension d : kDimensions) {
    dims[std::string(ToString(d))] = StatsToJson(report.dims[static_cast<std::size_t>(d)]);
  }
  out["dimensions"] = std::move(dims);
  out["overall"] = StatsToJson(report.overall);
  out["failure_count"] = report.failure_count;
  out["failures_by_code"] = report.failures_by_code;
  out["decision"] = ToString(report.decision);
  out["annotations"] = report.annotations;
  ordered_json samples = ordered_json::array();
  for (const auto& score : report.scores) {
    ordered_json item;
    item["sample_id"] = score.sample_id;
    for (Dimension d : kDimensions) item[std::string(ToString(d))] = score[d].score;
    item["overall"] = score.overall.score;
    samples.push_back(std::move(item));
  }
  out["samples"] = std::move(samples);
  return out;
}

AssessmentReport ReportFromJson(const json& doc) {
  try {
    AssessmentReport report;
    report.dataset_id = doc.at("dataset_id").get<std::string>();
    report.n_sampled = doc.at("n_sampled").get<std::size_t>();
    report.n_judged = doc.at("n_judged").get<std::size_t>();
    for (Dimension d : kDimensions) {
      report.dims[static_cast<std::size_t>(d)] =
          StatsFromJson(doc.at("dimensions").at(std::string(ToString(d))));
    }
    report.overall = StatsFromJson(doc.at("overall"));
    report.failure_count = doc.at("failure_count").get<std::size_t>();
    report.failures_by_code =
        doc.value("failures_by_code", std::map<std::string, std::size_t>{});
    report.decision = ParseDecision(doc.at("decision").get<std::string>());
    report.annotations = doc.value("annotations", std::vector<std::string>{});
    for (const auto& item : doc.value("samples", json::array())) {
      QualityScore score;
      score.sample_id = item.at("sample_id").get<std::string>();
      for (Dimension d : kDimensions) score[d].score = item.at(std::string(ToString(d))).get<int>();
      score.overall.score = item.at("overall").get<int>();
      report.scores.push_back(std::move(score));
    }
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, "quality.bad_report", e.what());
  }
}

}  // namespace medcurate::quality
