#include "medcurate/mixer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "medcurate/error.hpp"
#include "medcurate/random.hpp"

namespace medcurate::mixer {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

Error MixError(std::string code, const std::string& message) {
  return Error(ErrorKind::kConfig, "mixer." + std::move(code), message);
}

std::string Lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view Trim(std::string_view text) {
  const auto begin = text.find_first_not_of(" \t\r\n\f\v");
  if (begin == std::string_view::npos) return {};
  const auto end = text.find_last_not_of(" \t\r\n\f\v");
  return text.substr(begin, end - begin + 1);
}

Stage ParseStage(std::string_view name) {
  if (name == "pretrain") return Stage::kPretrain;
  if (name == "sft1_general") return Stage::kSft1General;
  if (name == "sft2_medical") return Stage::kSft2Medical;
  if (name == "sft3_cross") return Stage::kSft3Cross;
  throw MixError("bad_spec", fmt::format("unknown stage '{}'", name));
}

BalanceMode ParseBalanceMode(std::string_view name) {
  if (name == "none") return BalanceMode::kNone;
  if (name == "cap_to_min") return BalanceMode::kCapToMin;
  if (name == "explicit_targets") return BalanceMode::kExplicitTargets;
  throw MixError("bad_spec", fmt::format("unknown balance_mode '{}'", name));
}

std::uint64_t SourceSeed(std::uint64_t seed, std::string_view dataset_id) {
  return MixSeed(seed, Fnv1a(dataset_id));
}

void AddHistogram(MixReport& report, const corpus::Sample& sample) {
  ++report.modality[sample.modality_tag.value_or("unknown")];
  ++report.category[std::string(corpus::ToString(sample.category))];
  ++report.total;
}

}  // namespace

std::string_view ToString(Stage stage) {
  switch (stage) {
    case Stage::kPretrain: return "pretrain";
    case Stage::kSft1General: return "sft1_general";
    case Stage::kSft2Medical: return "sft2_medical";
    case Stage::kSft3Cross: return "sft3_cross";
  }
  return "?";
}

std::string_view ToString(BalanceMode mode) {
  switch (mode) {
    case BalanceMode::kNone: return "none";
    case BalanceMode::kCapToMin: return "cap_to_min";
    case BalanceMode::kExplicitTargets: return "explicit_targets";
  }
  return "?";
}

std::vector<std::string> DefaultRefusalPatterns() {
  return {"sorry, i can't", "i cannot assist", "i'm unable to"};
}

void MixSpec::Validate(const corpus::DatasetManifest* manifest) const {
  if (sources.empty()) throw MixError("bad_spec", "no sources");
  std::set<std::string> seen;
  for (const auto& source : sources) {
    if (!seen.insert(source.dataset_id).second) {
      throw MixError("bad_spec", fmt::format("source '{}' listed twice", source.dataset_id));
    }
    if (source.target_count && *source.target_count < 1) {
      throw MixError("bad_spec", fmt::format("source '{}': target_count must be >= 1",
                                             source.dataset_id));
    }
    if (balance_mode == BalanceMode::kExplicitTargets && !source.target_count) {
      throw MixError("bad_spec", fmt::format("explicit_targets: source '{}' has no target_count",
                                             source.dataset_id));
    }
    for (const auto& filter : source.filters) {
      if (filter != kRefusalFilter) {
        throw MixError("unknown_filter", fmt::format("'{}' on source '{}'", filter, source.dataset_id));
      }
      if (refusal_patterns.empty()) {
        throw MixError("bad_spec", "refusal filter requested with an empty pattern list");
      }
    }
    if (manifest != nullptr && manifest->Find(source.dataset_id) == nullptr) {
      throw MixError("unresolvable_source", source.dataset_id);
    }
  }
}

MixSpec MixSpec::Scaled(std::size_t scale) const {
  if (scale < 1) throw MixError("bad_scale", "scale must be >= 1");
  MixSpec out = *this;
  for (auto& source : out.sources) {
    if (source.target_count) {
      source.target_count = std::max<std::size_t>(1, (*source.target_count + scale - 1) / scale);
    }
  }
  return out;
}

MixSpec MixSpec::FromJson(const json& doc) {
  try {
    MixSpec spec;
    spec.stage = ParseStage(doc.at("stage").get<std::string>());
    spec.seed = doc.value("seed", std::uint64_t{1});
    spec.balance_mode = ParseBalanceMode(doc.value("balance_mode", std::string("none")));
    if (doc.contains("refusal_patterns")) {
      spec.refusal_patterns.clear();
      for (const auto& p : doc.at("refusal_patterns")) spec.refusal_patterns.push_back(Lower(p.get<std::string>()));
    }
    for (const auto& item : doc.at("sources")) {
      MixSource source;
      source.dataset_id = item.at("dataset_id").get<std::string>();
      if (item.contains("target_count") && !item.at("target_count").is_null()) {
        const auto& t = item.at("target_count");
        if (!t.is_number_integer() || t.get<long long>() < 1) {
          throw MixError("bad_spec", fmt::format("source '{}': target_count must be an integer >= 1",
                                                 source.dataset_id));
        }
        source.target_count = t.get<std::size_t>();
      }
      source.filters = item.value("filters", std::vector<std::string>{});
      spec.sources.push_back(std::move(source));
    }
    return spec;
  } catch (const json::exception& e) {
    throw MixError("bad_spec", e.what());
  }
}

ordered_json MixSpec::ToJson() const {
  ordered_json out;
  out["stage"] = ToString(stage);
  out["seed"] = seed;
  out["balance_mode"] = ToString(balance_mode);
  out["refusal_patterns"] = refusal_patterns;
  ordered_json list = ordered_json::array();
  for (const auto& s : sources) {
    ordered_json item;
    item["dataset_id"] = s.dataset_id;
    item["target_count"] = s.target_count ? ordered_json(*s.target_count) : ordered_json(nullptr);
    item["filters"] = s.filters;
    list.push_back(std::move(item));
  }
  out["sources"] = std::move(list);
  return out;
}

ordered_json MixReport::ToJson() const {
  ordered_json out;
  out["total"] = total;
  out["per_source"] = per_source;
  out["modality"] = modality;
  out["category"] = category;
  out["refusals_dropped"] = refusals_dropped;
  return out;
}

std::string MixReport::RenderTable() const {
  std::string out;
  auto section = [&](std::string_view title, const std::map<std::string, std::size_t>& counts) {
    std::size_t width = title.size();
    for (const auto& [key, value] : counts) width = std::max(width, key.size());
    out += fmt::format("{:<{}}  {:>8}  {:>7}\n", title, width, "count", "share");
    for (const auto& [key, value] : counts) {
      const double share = total == 0 ? 0.0 : 100.0 * static_cast<double>(value) / total;
      out += fmt::format("{:<{}}  {:>8}  {:>6.2f}%\n", key, width, value, share);
    }
    out += '\n';
  };
  section("source", per_source);
  section("modality", modality);
  section("category", category);
  out += fmt::format("total  {}\n", total);
  return out;
}

bool IsRefusal(const corpus::Sample& sample, std::span<const std::string> patterns) {
  if (sample.category != corpus::Category::kInstruction) return false;
  auto turn = std::find_if(sample.text_turns.begin(), sample.text_turns.end(),
                           [](const corpus::TextTurn& t) { return t.role == corpus::Role::kAssistant; });
  if (turn == sample.text_turns.end()) return false;
  const std::string answer = Lower(Trim(turn->content));
  return std::any_of(patterns.begin(), patterns.end(), [&](const std::string& pattern) {
    const std::string p = Lower(pattern);
    return !p.empty() && answer.starts_with(p);
  });
}

std::vector<corpus::Sample> FilterRefusals(std::vector<corpus::Sample> samples,
                                           std::span<const std::string> patterns,
                                           FilterStats* stats) {
  std::vector<corpus::Sample> kept;
  kept.reserve(samples.size());
  for (auto& sample : samples) {
    if (IsRefusal(sample, patterns)) {
      spdlog::debug("refusal filter dropped {}/{}", sample.dataset_id, sample.id);
      if (stats != nullptr) {
        ++stats->dropped;
        stats->dropped_ids.push_back(sample.id);
      }
      continue;
    }
    kept.push_back(std::move(sample));
  }
  return kept;
}

std::vector<corpus::Sample> Downsample(
    const std::function<std::optional<corpus::Sample>()>& next, std::size_t target,
    std::uint64_t seed) {
  if (target < 1) throw MixError("bad_target", "target must be >= 1");
  Rng rng(seed);
  std::vector<corpus::Sample> reservoir;
  std::size_t seen = 0;
  while (auto sample = next()) {
    if (reservoir.size() < target) {
      reservoir.push_back(std::move(*sample));
    } else {
      const std::uint64_t slot = UniformIndex(rng, seen + 1);
      if (slot < target) reservoir[slot] = std::move(*sample);
    }
    ++seen;
  }
  if (seen == 0) throw MixError("empty_source", "nothing to downsample");
  std::stable_sort(reservoir.begin(), reservoir.end(),
                   [](const corpus::Sample& a, const corpus::Sample& b) { return a.id < b.id; });
  return reservoir;
}

std::vector<corpus::Sample> Downsample(std::span<const corpus::Sample> samples,
                                       std::size_t target, std::uint64_t seed) {
  std::size_t i = 0;
  return Downsample(
      [&]() -> std::optional<corpus::Sample> {
        if (i >= samples.size()) return std::nullopt;
        return samples[i++];
      },
      target, seed);
}

MixReport ModalityReport(std::span<const corpus::Sample> samples) {
  MixReport report;
  for (const auto& s : samples) AddHistogram(report, s);
  return report;
}

MixResult BuildStageMix(const MixSpec& spec, const corpus::DatasetManifest& manifest) {
  spec.Validate(&manifest);

  MixReport report;
  std::vector<std::vector<corpus::Sample>> pools;
  for (const auto& source : spec.sources) {
    auto samples = corpus::LoadAll(manifest, source.dataset_id);
    if (!source.filters.empty()) {
      FilterStats stats;
      samples = FilterRefusals(std::move(samples), spec.refusal_patterns, &stats);
      report.refusals_dropped[source.dataset_id] = stats.dropped;
      if (stats.dropped > 0) {
        spdlog::info("{}: refusal filter dropped {} sample(s)", source.dataset_id, stats.dropped);
      }
    }
    pools.push_back(std::move(samples));
  }

  std::size_t floor = pools.empty() ? 0 : pools.front().size();
  for (const auto& pool : pools) floor = std::min(floor, pool.size());
  if (spec.balance_mode == BalanceMode::kCapToMin && floor == 0) {
    throw MixError("empty_source", "cap_to_min: a source has no samples left");
  }

  for (std::size_t i = 0; i < spec.sources.size(); ++i) {
    const auto& source = spec.sources[i];
    std::optional<std::size_t> target;
    if (spec.balance_mode == BalanceMode::kCapToMin) {
      target = floor;
    } else {
      target = source.target_count;
    }
    if (target && pools[i].empty()) {
      throw MixError("empty_source", fmt::format("source '{}' has no samples left", source.dataset_id));
    }
    if (target) pools[i] = Downsample(pools[i], *target, SourceSeed(spec.seed, source.dataset_id));
    report.per_source[source.dataset_id] = pools[i].size();
  }

  MixResult result;
  for (auto& pool : pools) {
    std::move(pool.begin(), pool.end(), std::back_inserter(result.samples));
  }
  Rng rng(spec.seed);
  for (std::size_t i = result.samples.size(); i > 1; --i) {
    std::swap(result.samples[i - 1], result.samples[UniformIndex(rng, i)]);
  }
  for (const auto& s : result.samples) AddHistogram(report, s);
  result.report = std::move(report);
  return result;
}

std::vector<std::filesystem::path> WriteMix(const MixResult& mix, const MixSpec& spec,
                                            const std::filesystem::path& out_dir,
                                            MixWriteOptions options) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "mixer.unwritable", out_dir.string() + ": " + ec.message());
  const std::size_t shard_size = std::max<std::size_t>(options.shard_size, 1);

  std::vector<std::filesystem::path> shards;
  for (std::size_t start = 0; start < mix.samples.size(); start += shard_size) {
    const auto stop = std::min(mix.samples.size(), start + shard_size);
    std::vector<corpus::Sample> chunk(mix.samples.begin() + start, mix.samples.begin() + stop);
    auto path = out_dir / fmt::format("mix_{:05d}.jsonl", shards.size());
    corpus::WriteShard(chunk, path, /*include_dataset_id=*/true);
    shards.push_back(std::move(path));
  }

  ordered_json report = mix.report.ToJson();
  report["spec"] = spec.ToJson();
  std::ofstream json_out(out_dir / "mix_report.json", std::ios::binary | std::ios::trunc);
  std::ofstream text_out(out_dir / "mix_report.txt", std::ios::binary | std::ios::trunc);
  if (!json_out || !text_out) throw Error(ErrorKind::kIo, "mixer.unwritable", out_dir.string());
  json_out << report.dump(2) << '\n';
  text_out << mix.report.RenderTable();
  return shards;
}

}  // namespace medcurate::mixer
