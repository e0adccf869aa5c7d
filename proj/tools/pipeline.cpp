#include "pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "medcurate/corpus.hpp"
#include "medcurate/error.hpp"
#include "medcurate/judge.hpp"
#include "medcurate/mixer.hpp"

namespace medcurate::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Error ConfigError(const std::string& message) {
  return Error(ErrorKind::kConfig, "cli.config", message);
}

void WriteJson(const fs::path& path, const ordered_json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cli.unwritable", path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::kIo, "cli.write_failed", path.string());
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cli.unwritable", path.string());
  out << text;
}

json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cli.missing_file", path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kJudge: return kExitJudge;
    case ErrorKind::kCapacity: return kExitCapacity;
    case ErrorKind::kIo: return kExitIo;
  }
  return kExitConfig;
}

bool Selected(const PipelineConfig& config, const std::string& dataset_id) {
  if (config.datasets.empty()) return true;
  return std::find(config.datasets.begin(), config.datasets.end(), dataset_id) !=
         config.datasets.end();
}

corpus::LoadOptions LoadOpts(const PipelineConfig& config) { return {config.strict}; }

void PrepareOutDir(const PipelineConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cli.unwritable", config.out_dir.string() + ": " + ec.message());
  WriteJson(config.out_dir / "effective_config.json", config.ToJson());
}

// ---------------------------------------------------------------- commands

int RunIngest(const PipelineConfig& config, std::ostream& out) {
  const auto manifest = corpus::IngestManifest(config.manifest);
  ordered_json datasets = ordered_json::array();
  bool ok = true;
  for (const auto& entry : manifest.entries) {
    auto stream = corpus::LoadSamples(manifest, entry.dataset_id, LoadOpts(config));
    std::size_t count = 0;
    while (stream.Next()) ++count;

    ordered_json item;
    item["dataset_id"] = entry.dataset_id;
    item["samples"] = count;
    item["declared_count"] = entry.declared_count ? ordered_json(*entry.declared_count)
                                                  : ordered_json(nullptr);
    ordered_json issues = ordered_json::array();
    for (const auto& issue : stream.issues()) {
      issues.push_back({{"shard", issue.shard.generic_string()},
                        {"line", issue.line},
                        {"reason", issue.reason}});
    }
    item["issues"] = std::move(issues);
    const bool count_ok = !entry.declared_count || *entry.declared_count == count;
    item["count_matches"] = count_ok;
    ok = ok && count_ok;
    datasets.push_back(std::move(item));
    out << fmt::format("{}: {} sample(s), {} skipped line(s){}\n", entry.dataset_id, count,
                       stream.issues().size(),
                       count_ok ? "" : fmt::format(" (declared {})", *entry.declared_count));
  }
  WriteJson(config.out_dir / "ingest_report.json", ordered_json{{"datasets", datasets}});
  return ok ? kExitOk : kExitConfig;
}

std::unique_ptr<quality::JudgeClient> MakeJudge(const PipelineConfig& config,
                                                const std::string& dataset_id) {
  if (!config.judge.replay_dir.empty()) {
    const fs::path per_dataset = config.judge.replay_dir / dataset_id;
    return std::make_unique<quality::ReplayJudge>(fs::is_directory(per_dataset)
                                                      ? per_dataset
                                                      : config.judge.replay_dir);
  }
  quality::HttpJudgeConfig http;
  http.base_url = config.judge.endpoint;
  http.path = config.judge.path;
  http.model = config.judge.model;
  http.auth_token = config.judge.auth_token;
  return std::make_unique<quality::HttpJudge>(std::move(http));
}

int RunAssess(const PipelineConfig& config, std::ostream& out) {
  const auto manifest = corpus::IngestManifest(config.manifest);
  const fs::path reports = config.out_dir / "reports";
  fs::create_directories(reports);

  quality::JudgePolicy policy = config.policy;
  policy.seed = config.seed;
  quality::AssessOptions options;
  options.max_retries = config.judge.max_retries;
  options.max_in_flight = std::max(config.judge.max_in_flight, config.jobs);
  options.requests_per_minute = config.judge.requests_per_minute;

  bool undecided = false;
  for (const auto& entry : manifest.entries) {
    const bool explicit_pick = !config.datasets.empty();
    if (!Selected(config, entry.dataset_id)) continue;
    if (!explicit_pick && entry.domain != corpus::Domain::kMedical && !config.assess_general) {
      continue;
    }
    auto stream = corpus::LoadSamples(manifest, entry.dataset_id, LoadOpts(config));
    const auto review = quality::SampleForReview([&] { return stream.Next(); }, policy);
    auto judge = MakeJudge(config, entry.dataset_id);
    const auto report = quality::AssessDataset(entry.dataset_id, review, *judge, policy, options);
    WriteJson(reports / (entry.dataset_id + ".json"), quality::ReportToJson(report));
    out << fmt::format("{}: judged {}/{}, overall mean {}, failures {}, decision {}\n",
                       entry.dataset_id, report.n_judged, report.n_sampled,
                       report.overall.mean ? fmt::format("{:.3f}", *report.overall.mean) : "n/a",
                       report.failure_count, quality::ToString(report.decision));
    undecided = undecided || report.decision == quality::Decision::kUndecided;
  }
  return undecided ? kExitJudge : kExitOk;
}

int RunFilter(const PipelineConfig& config, std::ostream& out) {
  const auto manifest = corpus::IngestManifest(config.manifest);
  corpus::DatasetManifest kept;
  for (auto entry : manifest.entries) {
    const fs::path report_path = config.ReportsDir() / (entry.dataset_id + ".json");
    std::string verdict = "not assessed";
    bool keep = true;
    if (fs::exists(report_path)) {
      const auto report = quality::ReportFromJson(ReadJsonFile(report_path));
      verdict = std::string(quality::ToString(report.decision));
      keep = report.decision == quality::Decision::kKeep;
    }
    out << fmt::format("{}: {} -> {}\n", entry.dataset_id, verdict, keep ? "kept" : "excluded");
    if (!keep) continue;
    for (auto& shard : entry.shard_paths) shard = fs::absolute(shard).lexically_normal();
    kept.entries.push_back(std::move(entry));
  }
  corpus::WriteManifest(kept, config.out_dir / "manifest.filtered.json");
  return kExitOk;
}

std::vector<corpus::Sample> LoadSelected(const PipelineConfig& config,
                                         const corpus::DatasetManifest& manifest) {
  std::vector<corpus::Sample> samples;
  for (const auto& entry : manifest.entries) {
    if (!Selected(config, entry.dataset_id)) continue;
    auto loaded = corpus::LoadAll(manifest, entry.dataset_id, LoadOpts(config));
    std::move(loaded.begin(), loaded.end(), std::back_inserter(samples));
  }
  return samples;
}

int RunPack(const PipelineConfig& config, std::ostream& out) {
  const auto manifest = corpus::IngestManifest(config.manifest);
  const auto samples = LoadSelected(config, manifest);
  const auto counter = lengths::CounterByName(config.counter);
  auto result = packer::PackSamples(samples, config.lengths, counter, config.oversize);

  const fs::path packed = config.PackedDir();
  if (fs::exists(packed)) {
    // Stale bins from an earlier run would otherwise mix with this one.
    for (const auto& old : packer::ListPackedFiles(packed)) fs::remove(old);
    if (fs::exists(packed / "oversize")) {
      for (const auto& old : packer::ListPackedFiles(packed / "oversize")) fs::remove(old);
    }
  }
  const std::size_t files = packer::WritePacked(result.bins, packed, {config.shard_size});
  WriteJson(config.out_dir / "packing_report.json", packer::ToJson(result.report));
  out << fmt::format("packed {} sample(s) into {} bin(s) ({} isolated oversize) across {} file(s); "
                     "occupancy {}/{} = {:.4f}\n",
                     result.report.n_samples, result.report.n_bins, result.report.oversize_count,
                     files, result.report.occupancy.used, result.report.occupancy.available,
                     result.report.occupancy.value());
  return kExitOk;
}

int RunMix(const PipelineConfig& config, std::ostream& out) {
  const auto manifest = corpus::IngestManifest(config.manifest);
  auto spec = mixer::MixSpec::FromJson(ReadJsonFile(config.mix_spec)).Scaled(config.scale);
  const auto mix = mixer::BuildStageMix(spec, manifest);
  const auto shards = mixer::WriteMix(mix, spec, config.out_dir / "mix", {config.mix_shard_size});
  out << mix.report.RenderTable();
  out << fmt::format("wrote {} shard(s) to {}\n", shards.size(), (config.out_dir / "mix").string());
  return kExitOk;
}

int RunReport(const PipelineConfig& config, std::ostream& out) {
  if (!config.manifest.empty()) {
    const auto manifest = corpus::IngestManifest(config.manifest);
    const auto samples = LoadSelected(config, manifest);
    auto report = mixer::ModalityReport(samples);
    for (const auto& s : samples) ++report.per_source[s.dataset_id];
    WriteJson(config.out_dir / "modality_report.json", report.ToJson());
    WriteText(config.out_dir / "modality_report.txt", report.RenderTable());
    out << report.RenderTable();
  }
  const fs::path packed = config.PackedDir();
  if (fs::is_directory(packed)) {
    const auto files = packer::ListPackedFiles(packed);
    const auto verify = packer::VerifyPacking(files, config.lengths.capacity);
    WriteJson(config.out_dir / "occupancy_report.json", packer::ToJson(verify));
    out << fmt::format("occupancy: {} bin(s), {}/{} = {:.4f}\n", verify.report.n_bins,
                       verify.report.occupancy.used, verify.report.occupancy.available,
                       verify.report.occupancy.value());
  }
  return kExitOk;
}

int RunVerify(const PipelineConfig& config, std::ostream& out) {
  const fs::path packed = config.PackedDir();
  if (!fs::is_directory(packed)) {
    throw Error(ErrorKind::kIo, "packer.missing_dir", packed.string());
  }
  const auto files = packer::ListPackedFiles(packed);
  const auto verify = packer::VerifyPacking(files, config.lengths.capacity);
  WriteJson(config.out_dir / "verify_report.json", packer::ToJson(verify));
  out << fmt::format("verified {} file(s), {} bin(s), {} sample(s); occupancy {}/{} = {:.4f}\n",
                     files.size(), verify.report.n_bins, verify.report.n_samples,
                     verify.report.occupancy.used, verify.report.occupancy.available,
                     verify.report.occupancy.value());
  bool capacity_problem = false;
  bool malformed = false;
  for (const auto& f : verify.findings) {
    out << fmt::format("  {} [{}#{}]: {}\n", packer::ToString(f.kind), f.path.filename().string(),
                       f.document, f.detail);
    capacity_problem = capacity_problem || f.kind != packer::FindingKind::kMalformed;
    malformed = malformed || f.kind == packer::FindingKind::kMalformed;
  }
  if (capacity_problem) return kExitCapacity;
  if (malformed) return kExitConfig;
  return kExitOk;
}

}  // namespace

std::string_view ToString(Command command) {
  switch (command) {
    case Command::kIngest: return "ingest";
    case Command::kAssess: return "assess";
    case Command::kFilter: return "filter";
    case Command::kPack: return "pack";
    case Command::kMix: return "mix";
    case Command::kReport: return "report";
    case Command::kVerify: return "verify";
  }
  return "?";
}

std::optional<Command> ParseCommand(std::string_view name) {
  for (Command c : {Command::kIngest, Command::kAssess, Command::kFilter, Command::kPack,
                    Command::kMix, Command::kReport, Command::kVerify}) {
    if (ToString(c) == name) return c;
  }
  return std::nullopt;
}

void PipelineConfig::ApplyEnvironment() {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* value = std::getenv(name);
    if (value == nullptr || *value == '\0') return std::nullopt;
    return std::string(value);
  };
  if (auto v = env("MEDCURATE_MANIFEST")) manifest = *v;
  if (auto v = env("MEDCURATE_OUT")) out_dir = *v;
  if (auto v = env("MEDCURATE_JUDGE_ENDPOINT")) judge.endpoint = *v;
  if (auto v = env("MEDCURATE_JUDGE_MODEL")) judge.model = *v;
  if (auto v = env("MEDCURATE_REPLAY_DIR")) judge.replay_dir = *v;
  if (auto v = env(kTokenEnv)) judge.auth_token = *v;
  try {
    if (auto v = env("MEDCURATE_SEED")) seed = std::stoull(*v);
    if (auto v = env("MEDCURATE_JOBS")) jobs = std::stoull(*v);
  } catch (const std::exception&) {
    throw ConfigError("MEDCURATE_SEED / MEDCURATE_JOBS must be integers");
  }
}

void PipelineConfig::ApplyJson(const json& doc) {
  try {
    auto path_key = [&](const char* key, fs::path& target) {
      if (doc.contains(key)) target = doc.at(key).get<std::string>();
    };
    path_key("manifest", manifest);
    path_key("out_dir", out_dir);
    path_key("mix_spec", mix_spec);
    path_key("packed_dir", packed_dir);
    path_key("reports_dir", reports_dir);
    if (doc.contains("datasets")) datasets = doc.at("datasets").get<std::vector<std::string>>();
    if (doc.contains("judge")) {
      const auto& j = doc.at("judge");
      judge.endpoint = j.value("endpoint", judge.endpoint);
      judge.path = j.value("path", judge.path);
      if (j.contains("replay_dir")) judge.replay_dir = j.at("replay_dir").get<std::string>();
      judge.model = j.value("model", judge.model);
      if (j.contains("requests_per_minute") && !j.at("requests_per_minute").is_null()) {
        judge.requests_per_minute = j.at("requests_per_minute").get<double>();
      }
      judge.max_retries = j.value("max_retries", judge.max_retries);
      judge.max_in_flight = j.value("max_in_flight", judge.max_in_flight);
    }
    if (doc.contains("policy")) {
      const auto& p = doc.at("policy");
      policy.sample_size = p.value("sample_size", policy.sample_size);
      policy.min_overall_mean = p.value("min_overall_mean", policy.min_overall_mean);
      policy.min_dim_mean = p.value("min_dim_mean", policy.min_dim_mean);
      policy.max_failure_fraction = p.value("max_failure_fraction", policy.max_failure_fraction);
    }
    if (doc.contains("lengths")) {
      const auto& l = doc.at("lengths");
      lengths.tokens_per_image = l.value("tokens_per_image", lengths.tokens_per_image);
      lengths.per_sample_overhead = l.value("per_sample_overhead", lengths.per_sample_overhead);
      lengths.capacity = l.value("capacity", lengths.capacity);
      counter = l.value("counter", counter);
    }
    if (doc.contains("oversize")) {
      oversize = packer::ParseOversizePolicy(doc.at("oversize").get<std::string>());
    }
    shard_size = doc.value("shard_size", shard_size);
    mix_shard_size = doc.value("mix_shard_size", mix_shard_size);
    strict = doc.value("strict", strict);
    assess_general = doc.value("assess_general", assess_general);
    seed = doc.value("seed", seed);
    scale = doc.value("scale", scale);
    jobs = doc.value("jobs", jobs);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config file: {}", e.what()));
  }
}

ordered_json PipelineConfig::ToJson() const {
  ordered_json out;
  out["manifest"] = manifest.generic_string();
  out["out_dir"] = out_dir.generic_string();
  out["mix_spec"] = mix_spec.generic_string();
  out["packed_dir"] = PackedDir().generic_string();
  out["reports_dir"] = ReportsDir().generic_string();
  out["datasets"] = datasets;
  out["judge"] = {{"endpoint", judge.endpoint},
                  {"path", judge.path},
                  {"replay_dir", judge.replay_dir.generic_string()},
                  {"model", judge.model},
                  {"requests_per_minute", judge.requests_per_minute
                                              ? ordered_json(*judge.requests_per_minute)
                                              : ordered_json(nullptr)},
                  {"max_retries", judge.max_retries},
                  {"max_in_flight", judge.max_in_flight},
                  {"auth_token_set", !judge.auth_token.empty()}};
  out["policy"] = {{"sample_size", policy.sample_size},
                   {"min_overall_mean", policy.min_overall_mean},
                   {"min_dim_mean", policy.min_dim_mean},
                   {"max_failure_fraction", policy.max_failure_fraction}};
  out["lengths"] = {{"tokens_per_image", lengths.tokens_per_image},
                    {"per_sample_overhead", lengths.per_sample_overhead},
                    {"capacity", lengths.capacity},
                    {"counter", counter}};
  out["oversize"] = packer::ToString(oversize);
  out["shard_size"] = shard_size;
  out["mix_shard_size"] = mix_shard_size;
  out["strict"] = strict;
  out["assess_general"] = assess_general;
  out["seed"] = seed;
  out["scale"] = scale;
  out["jobs"] = jobs;
  return out;
}

fs::path PipelineConfig::PackedDir() const {
  return packed_dir.empty() ? out_dir / "packed" : packed_dir;
}

fs::path PipelineConfig::ReportsDir() const {
  return reports_dir.empty() ? out_dir / "reports" : reports_dir;
}

void PipelineConfig::Validate(Command command) const {
  if (seed < 1) throw ConfigError("seed must be >= 1");
  if (scale < 1) throw ConfigError("scale must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (out_dir.empty()) throw ConfigError("output directory is required");
  const bool needs_manifest = command != Command::kVerify && command != Command::kReport;
  if (needs_manifest && manifest.empty()) {
    throw ConfigError(fmt::format("'{}' needs --manifest", ToString(command)));
  }
  if (!manifest.empty() && !fs::is_regular_file(manifest)) {
    throw Error(ErrorKind::kIo, "cli.missing_file", manifest.string());
  }
  lengths.Validate();
  (void)lengths::CounterByName(counter);
  policy.Validate();
  if (command == Command::kAssess) {
    if (judge.replay_dir.empty() && judge.endpoint.empty()) {
      throw ConfigError("assess needs --replay-dir or --judge-endpoint");
    }
    if (!judge.replay_dir.empty() && !fs::is_directory(judge.replay_dir)) {
      throw Error(ErrorKind::kIo, "cli.missing_file", judge.replay_dir.string());
    }
  }
  if (command == Command::kMix) {
    if (mix_spec.empty()) throw ConfigError("mix needs --spec");
    if (!fs::is_regular_file(mix_spec)) throw Error(ErrorKind::kIo, "cli.missing_file", mix_spec.string());
  }
}

int RunCommand(Command command, const PipelineConfig& config, std::ostream& out,
               std::ostream& err) {
  try {
    config.Validate(command);
    PrepareOutDir(config);
    switch (command) {
      case Command::kIngest: return RunIngest(config, out);
      case Command::kAssess: return RunAssess(config, out);
      case Command::kFilter: return RunFilter(config, out);
      case Command::kPack: return RunPack(config, out);
      case Command::kMix: return RunMix(config, out);
      case Command::kReport: return RunReport(config, out);
      case Command::kVerify: return RunVerify(config, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return ExitCodeFor(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: io: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

int Main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"medcurate: multimodal training-data curation and sequence packing"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file, "JSON config file");

  struct Flags {
    std::string manifest, out_dir, mix_spec, packed_dir, reports_dir;
    std::vector<std::string> datasets;
    std::string judge_endpoint, judge_model, replay_dir;
    double rpm = 0;
    std::size_t max_retries = 0, sample_size = 0, tokens_per_image = 0, overhead = 0, capacity = 0;
    std::size_t shard_size = 0, scale = 0, jobs = 0;
    double min_overall = 0, min_dim = 0, max_failure = 0;
    std::string counter, oversize;
    std::uint64_t seed = 0;
    bool lenient = false, assess_general = false;
  } f;

  auto opt = [](CLI::Option* o) { return o; };
  auto* o_manifest = opt(app.add_option("--manifest", f.manifest, "dataset manifest (JSON)"));
  auto* o_out = opt(app.add_option("--out", f.out_dir, "output directory"));
  auto* o_spec = opt(app.add_option("--spec", f.mix_spec, "MixSpec file (mix)"));
  auto* o_packed = opt(app.add_option("--packed-dir", f.packed_dir, "packed files (verify/report)"));
  auto* o_reports = opt(app.add_option("--reports-dir", f.reports_dir, "assessment reports (filter)"));
  auto* o_datasets = opt(app.add_option("--dataset", f.datasets, "restrict to dataset id (repeatable)"));
  auto* o_endpoint = opt(app.add_option("--judge-endpoint", f.judge_endpoint, "judge base URL"));
  auto* o_model = opt(app.add_option("--judge-model", f.judge_model, "judge model name"));
  auto* o_replay = opt(app.add_option("--replay-dir", f.replay_dir, "replayed judge transcripts"));
  auto* o_rpm = opt(app.add_option("--rate-limit", f.rpm, "judge requests per minute"));
  auto* o_retries = opt(app.add_option("--max-retries", f.max_retries, "judge retries"));
  auto* o_sample = opt(app.add_option("--sample-size", f.sample_size, "samples reviewed per dataset"));
  auto* o_min_overall = opt(app.add_option("--min-overall-mean", f.min_overall));
  auto* o_min_dim = opt(app.add_option("--min-dim-mean", f.min_dim));
  auto* o_max_fail = opt(app.add_option("--max-failure-fraction", f.max_failure));
  auto* o_tpi = opt(app.add_option("--tokens-per-image", f.tokens_per_image, "visual tokens per image"));
  auto* o_overhead = opt(app.add_option("--overhead", f.overhead, "per-sample token overhead"));
  auto* o_capacity = opt(app.add_option("--capacity", f.capacity, "bin capacity in tokens"));
  auto* o_counter = opt(app.add_option("--counter", f.counter, "token counter")
                            ->check(CLI::IsMember({"whitespace", "bytes4"})));
  auto* o_oversize = opt(app.add_option("--oversize", f.oversize, "oversize policy")
                             ->check(CLI::IsMember({"reject", "isolate"})));
  auto* o_shard = opt(app.add_option("--shard-size", f.shard_size, "bins per packed file"));
  auto* o_seed = opt(app.add_option("--seed", f.seed, "global seed"));
  auto* o_scale = opt(app.add_option("--scale", f.scale, "divisor applied to mix targets"));
  auto* o_jobs = opt(app.add_option("--jobs", f.jobs, "parallelism bound"));
  auto* o_lenient = opt(app.add_flag("--lenient", f.lenient, "skip malformed shard lines"));
  auto* o_general = opt(app.add_flag("--assess-general", f.assess_general,
                                     "also judge general-domain datasets"));

  app.add_subcommand("ingest", "validate shards against the manifest");
  app.add_subcommand("assess", "judge sampled data and write per-dataset reports");
  app.add_subcommand("filter", "write a manifest keeping only datasets judged keep");
  app.add_subcommand("pack", "FFD sequence packing into capacity-bounded bins");
  app.add_subcommand("mix", "build a stage training mixture");
  app.add_subcommand("report", "modality and occupancy summaries");
  app.add_subcommand("verify", "re-check packed files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitConfig;
  }

  PipelineConfig config;
  try {
    config.ApplyEnvironment();
    if (!config_file.empty()) config.ApplyJson(ReadJsonFile(config_file));
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return ExitCodeFor(e.kind());
  }
  auto given = [](CLI::Option* o) { return o->count() > 0; };
  if (given(o_manifest)) config.manifest = f.manifest;
  if (given(o_out)) config.out_dir = f.out_dir;
  if (given(o_spec)) config.mix_spec = f.mix_spec;
  if (given(o_packed)) config.packed_dir = f.packed_dir;
  if (given(o_reports)) config.reports_dir = f.reports_dir;
  if (given(o_datasets)) config.datasets = f.datasets;
  if (given(o_endpoint)) config.judge.endpoint = f.judge_endpoint;
  if (given(o_model)) config.judge.model = f.judge_model;
  if (given(o_replay)) config.judge.replay_dir = f.replay_dir;
  if (given(o_rpm)) config.judge.requests_per_minute = f.rpm;
  if (given(o_retries)) config.judge.max_retries = f.max_retries;
  if (given(o_sample)) config.policy.sample_size = f.sample_size;
  if (given(o_min_overall)) config.policy.min_overall_mean = f.min_overall;
  if (given(o_min_dim)) config.policy.min_dim_mean = f.min_dim;
  if (given(o_max_fail)) config.policy.max_failure_fraction = f.max_failure;
  if (given(o_tpi)) config.lengths.tokens_per_image = f.tokens_per_image;
  if (given(o_overhead)) config.lengths.per_sample_overhead = f.overhead;
  if (given(o_capacity)) config.lengths.capacity = f.capacity;
  if (given(o_counter)) config.counter = f.counter;
  if (given(o_oversize)) config.oversize = packer::ParseOversizePolicy(f.oversize);
  if (given(o_shard)) config.shard_size = f.shard_size;
  if (given(o_seed)) config.seed = f.seed;
  if (given(o_scale)) config.scale = f.scale;
  if (given(o_jobs)) config.jobs = f.jobs;
  if (given(o_lenient)) config.strict = !f.lenient;
  if (given(o_general)) config.assess_general = f.assess_general;

  const auto subcommands = app.get_subcommands();
  const auto command = ParseCommand(subcommands.front()->get_name());
  return RunCommand(*command, config, out, err);
}

}  // namespace medcurate::cli
