#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace medcurate::corpus {

enum class Role { kCaption, kUser, kAssistant, kInterleavedText };
enum class Category { kCaption, kInterleaved, kInstruction };
enum class Domain { kGeneral, kMedical };

std::string_view ToString(Role role);
std::string_view ToString(Category category);
std::string_view ToString(Domain domain);
// Throw medcurate::Error (kConfig) on unknown names.
Role ParseRole(std::string_view name);
Category ParseCategory(std::string_view name);
Domain ParseDomain(std::string_view name);

struct TextTurn {
  Role role = Role::kUser;
  std::string content;

  friend bool operator==(const TextTurn&, const TextTurn&) = default;
};

// One multimodal record. Images stay base64 end to end.
struct Sample {
  std::string id;
  std::string dataset_id;
  std::vector<std::string> images;
  std::vector<TextTurn> text_turns;
  Category category = Category::kInstruction;
  Domain domain = Domain::kGeneral;
  std::optional<std::string> modality_tag;
  std::map<std::string, std::string> metadata;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct ManifestEntry {
  std::string dataset_id;
  Category category = Category::kInstruction;
  Domain domain = Domain::kGeneral;
  std::vector<std::filesystem::path> shard_paths;
  std::optional<std::size_t> declared_count;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  const ManifestEntry* Find(std::string_view dataset_id) const;
};

// Names of violated invariants; empty means the sample is valid.
struct ValidationResult {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

// Violation names reported by ValidateSample.
inline constexpr std::string_view kEmptyId = "empty-id";
inline constexpr std::string_view kEmptyDatasetId = "empty-dataset-id";
inline constexpr std::string_view kCaptionRequiresImage = "caption-requires-image";
inline constexpr std::string_view kCaptionRequiresText = "caption-requires-text";
inline constexpr std::string_view kInstructionRequiresUser = "instruction-requires-user";
inline constexpr std::string_view kInstructionRequiresAssistant =
    "instruction-requires-assistant";
inline constexpr std::string_view kInvalidBase64 = "invalid-base64";

ValidationResult ValidateSample(const Sample& sample);

// Strict check of standard (RFC 4648, padded) base64.
bool IsValidBase64(std::string_view payload);
std::string EncodeBase64(std::string_view bytes);

// Parses and validates a manifest document. Relative shard paths resolve
// against the manifest's directory.
DatasetManifest IngestManifest(const std::filesystem::path& path);
DatasetManifest ParseManifest(std::string_view text,
                              const std::filesystem::path& base_dir = {});
nlohmann::ordered_json ManifestToJson(const DatasetManifest& manifest);
void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

// Shard line codec. `dataset_id` is used when the line carries none.
Sample SampleFromJson(const nlohmann::json& record, std::string_view dataset_id);
nlohmann::ordered_json SampleToJson(const Sample& sample);

// Position inside a dataset stream: next line to read in shard `shard`.
struct Cursor {
  std::size_t shard = 0;
  std::size_t line = 0;

  friend bool operator==(const Cursor&, const Cursor&) = default;
};

struct LineIssue {
  std::filesystem::path shard;
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct LoadOptions {
  bool strict = true;
};

// Single-consumer stream over a dataset's shards, in shard order then line
// order. In strict mode the first malformed line throws; otherwise it is
// recorded in issues() and skipped.
class SampleStream {
 public:
  SampleStream(const ManifestEntry& entry, LoadOptions options = {},
               Cursor start = {});

  std::optional<Sample> Next();
  Cursor cursor() const { return cursor_; }
  const std::vector<LineIssue>& issues() const { return issues_; }

 private:
  bool OpenShard();

  ManifestEntry entry_;
  LoadOptions options_;
  Cursor cursor_;
  std::ifstream file_;
  bool file_open_ = false;
  std::vector<LineIssue> issues_;
};

SampleStream LoadSamples(const DatasetManifest& manifest,
                         std::string_view dataset_id, LoadOptions options = {},
                         Cursor start = {});

// Drains a stream into a vector.
std::vector<Sample> LoadAll(const DatasetManifest& manifest,
                            std::string_view dataset_id,
                            LoadOptions options = {});

// Writes samples as one JSON object per line. Returns lines written.
std::size_t WriteShard(const std::vector<Sample>& samples,
                       const std::filesystem::path& path,
                       bool include_dataset_id = false);

}  // namespace medcurate::corpus
