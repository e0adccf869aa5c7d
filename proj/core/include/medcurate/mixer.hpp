#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcurate/corpus.hpp"

namespace medcurate::mixer {

enum class Stage { kPretrain, kSft1General, kSft2Medical, kSft3Cross };
enum class BalanceMode { kNone, kCapToMin, kExplicitTargets };

std::string_view ToString(Stage stage);
std::string_view ToString(BalanceMode mode);

// Name of the refusal filter as it appears in MixSpec source filter lists.
inline constexpr std::string_view kRefusalFilter = "refusal";

// Lower-case prefixes matched against the first assistant turn.
std::vector<std::string> DefaultRefusalPatterns();

struct MixSource {
  std::string dataset_id;
  std::optional<std::size_t> target_count;
  std::vector<std::string> filters;
};

struct MixSpec {
  Stage stage = Stage::kSft3Cross;
  std::vector<MixSource> sources;
  std::uint64_t seed = 1;
  BalanceMode balance_mode = BalanceMode::kNone;
  std::vector<std::string> refusal_patterns = DefaultRefusalPatterns();

  // Structural checks; `manifest` (if given) must resolve every source.
  void Validate(const corpus::DatasetManifest* manifest = nullptr) const;
  // Targets divided by `scale` (ceiling, minimum 1).
  MixSpec Scaled(std::size_t scale) const;

  static MixSpec FromJson(const nlohmann::json& doc);
  nlohmann::ordered_json ToJson() const;
};

struct MixReport {
  std::map<std::string, std::size_t> per_source;
  std::map<std::string, std::size_t> modality;  // missing tag counts as "unknown"
  std::map<std::string, std::size_t> category;
  std::size_t total = 0;
  std::map<std::string, std::size_t> refusals_dropped;  // per source

  nlohmann::ordered_json ToJson() const;
  // Fixed-width text rendering of the histograms.
  std::string RenderTable() const;
};

struct FilterStats {
  std::size_t dropped = 0;
  std::vector<std::string> dropped_ids;
};

// True when the sample is an instruction sample whose first assistant turn,
// trimmed and case-folded, starts with one of the patterns.
bool IsRefusal(const corpus::Sample& sample, std::span<const std::string> patterns);

// Keeps everything except refusals.
std::vector<corpus::Sample> FilterRefusals(std::vector<corpus::Sample> samples,
                                           std::span<const std::string> patterns,
                                           FilterStats* stats = nullptr);

// Reservoir sample of min(target, n) items, then stably sorted by id.
// Throws Error(kConfig) on target 0 or an empty stream.
std::vector<corpus::Sample> Downsample(
    const std::function<std::optional<corpus::Sample>()>& next, std::size_t target,
    std::uint64_t seed);
std::vector<corpus::Sample> Downsample(std::span<const corpus::Sample> samples,
                                       std::size_t target, std::uint64_t seed);

MixReport ModalityReport(std::span<const corpus::Sample> samples);

struct MixResult {
  std::vector<corpus::Sample> samples;  // final interleaved order
  MixReport report;
};

// Filters, balances and interleaves the sources. Pure: no files written.
MixResult BuildStageMix(const MixSpec& spec, const corpus::DatasetManifest& manifest);

struct MixWriteOptions {
  std::size_t shard_size = 10000;
};

// Writes mix_NNNNN.jsonl shards (corpus format, dataset_id kept per line),
// mix_report.json and mix_report.txt. Returns shard paths.
std::vector<std::filesystem::path> WriteMix(const MixResult& mix, const MixSpec& spec,
                                            const std::filesystem::path& out_dir,
                                            MixWriteOptions options = {});

}  // namespace medcurate::mixer
