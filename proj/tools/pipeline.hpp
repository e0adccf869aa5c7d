#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcurate/lengths.hpp"
#include "medcurate/packer.hpp"
#include "medcurate/quality.hpp"

namespace medcurate::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitJudge = 3;
inline constexpr int kExitCapacity = 4;
inline constexpr int kExitIo = 5;

enum class Command { kIngest, kAssess, kFilter, kPack, kMix, kReport, kVerify };

std::string_view ToString(Command command);
std::optional<Command> ParseCommand(std::string_view name);

// Environment variable holding the judge bearer token.
inline constexpr const char* kTokenEnv = "MEDCURATE_JUDGE_TOKEN";

struct JudgeSettings {
  std::string endpoint;  // base URL of a chat-completion service
  std::string path = "/v1/chat/completions";
  std::filesystem::path replay_dir;
  std::string model;
  std::string auth_token;  // never written to disk
  std::optional<double> requests_per_minute;
  std::size_t max_retries = 3;
  std::size_t max_in_flight = 4;
};

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir = "out";
  std::filesystem::path mix_spec;
  std::filesystem::path packed_dir;   // verify/report input; default <out>/packed
  std::filesystem::path reports_dir;  // filter input; default <out>/reports
  std::vector<std::string> datasets;  // restrict assess/pack/report; empty = all
  JudgeSettings judge;
  quality::JudgePolicy policy;
  lengths::LengthConfig lengths;
  std::string counter = "whitespace";
  packer::OversizePolicy oversize = packer::OversizePolicy::kIsolate;
  std::size_t shard_size = 1;
  std::size_t mix_shard_size = 10000;
  bool strict = true;
  bool assess_general = false;  // judge general-domain datasets too
  std::uint64_t seed = 1;
  std::size_t scale = 1;
  std::size_t jobs = 1;

  // Layer helpers; each overrides only the keys present.
  void ApplyEnvironment();
  void ApplyJson(const nlohmann::json& doc);
  nlohmann::ordered_json ToJson() const;  // auth token omitted

  // Throws medcurate::Error (kConfig) when `command` cannot run with this config.
  void Validate(Command command) const;

  std::filesystem::path PackedDir() const;
  std::filesystem::path ReportsDir() const;
};

// Runs one pipeline command. Errors are reported on `err` and mapped to
// exit codes; nothing is thrown.
int RunCommand(Command command, const PipelineConfig& config, std::ostream& out,
               std::ostream& err);

// Full command line entry point: parses argv, layers config sources
// (flags > config file > environment > defaults) and runs the command.
int Main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace medcurate::cli
