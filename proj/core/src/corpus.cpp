#include "medcurate/corpus.hpp"

#include <sodium.h>

#include <algorithm>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "medcurate/error.hpp"

namespace medcurate::corpus {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

Error ConfigError(std::string code, const std::string& message) {
  return Error(ErrorKind::kConfig, "corpus." + std::move(code), message);
}

Error IoError(std::string code, const std::string& message) {
  return Error(ErrorKind::kIo, "corpus." + std::move(code), message);
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing_file", path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

const std::string& RequireString(const json& object, const char* key) {
  auto it = object.find(key);
  if (it == object.end() || !it->is_string()) {
    throw ConfigError("bad_record", fmt::format("field '{}' must be a string", key));
  }
  return it->get_ref<const std::string&>();
}

}  // namespace

std::string_view ToString(Role role) {
  switch (role) {
    case Role::kCaption: return "caption";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
    case Role::kInterleavedText: return "interleaved_text";
  }
  return "?";
}

std::string_view ToString(Category category) {
  switch (category) {
    case Category::kCaption: return "caption";
    case Category::kInterleaved: return "interleaved";
    case Category::kInstruction: return "instruction";
  }
  return "?";
}

std::string_view ToString(Domain domain) {
  return domain == Domain::kGeneral ? "general" : "medical";
}

Role ParseRole(std::string_view name) {
  if (name == "caption") return Role::kCaption;
  if (name == "user") return Role::kUser;
  if (name == "assistant") return Role::kAssistant;
  if (name == "interleaved_text") return Role::kInterleavedText;
  throw ConfigError("unknown_role", std::string(name));
}

Category ParseCategory(std::string_view name) {
  if (name == "caption") return Category::kCaption;
  if (name == "interleaved") return Category::kInterleaved;
  if (name == "instruction") return Category::kInstruction;
  throw ConfigError("unknown_category", std::string(name));
}

Domain ParseDomain(std::string_view name) {
  if (name == "general") return Domain::kGeneral;
  if (name == "medical") return Domain::kMedical;
  throw ConfigError("unknown_domain", std::string(name));
}

const ManifestEntry* DatasetManifest::Find(std::string_view dataset_id) const {
  auto it = std::find_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) {
    return e.dataset_id == dataset_id;
  });
  return it == entries.end() ? nullptr : &*it;
}

bool IsValidBase64(std::string_view payload) {
  if (payload.size() % 4 != 0) return false;
  if (sodium_init() < 0) return false;
  std::vector<unsigned char> decoded(payload.size() / 4 * 3 + 3);
  std::size_t decoded_len = 0;
  const char* end = nullptr;
  const int rc = sodium_base642bin(decoded.data(), decoded.size(), payload.data(),
                                   payload.size(), nullptr, &decoded_len, &end,
                                   sodium_base64_VARIANT_ORIGINAL);
  return rc == 0 && end == payload.data() + payload.size();
}

std::string EncodeBase64(std::string_view bytes) {
  if (sodium_init() < 0) throw Error(ErrorKind::kIo, "corpus.sodium", "init failed");
  const std::size_t len =
      sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(len, '\0');
  sodium_bin2base64(out.data(), len,
                    reinterpret_cast<const unsigned char*>(bytes.data()),
                    bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(len - 1);  // drop terminator
  return out;
}

ValidationResult ValidateSample(const Sample& sample) {
  ValidationResult result;
  auto add = [&](std::string_view name) { result.violations.emplace_back(name); };
  auto has_role = [&](Role role) {
    return std::any_of(sample.text_turns.begin(), sample.text_turns.end(),
                       [&](const TextTurn& t) { return t.role == role; });
  };

  if (sample.id.empty()) add(kEmptyId);
  if (sample.dataset_id.empty()) add(kEmptyDatasetId);
  if (sample.category == Category::kCaption) {
    if (sample.images.empty()) add(kCaptionRequiresImage);
    if (sample.text_turns.empty()) add(kCaptionRequiresText);
  }
  if (sample.category == Category::kInstruction) {
    if (!has_role(Role::kUser)) add(kInstructionRequiresUser);
    if (!has_role(Role::kAssistant)) add(kInstructionRequiresAssistant);
  }
  if (!std::all_of(sample.images.begin(), sample.images.end(), IsValidBase64)) {
    add(kInvalidBase64);
  }
  return result;
}

DatasetManifest ParseManifest(std::string_view text,
                              const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset -> line number
    const std::size_t limit = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + limit, '\n');
    throw ConfigError("parse_error", fmt::format("line {}: {}", line, e.what()));
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
    throw ConfigError("parse_error", "manifest must be an object with an 'entries' array");
  }

  DatasetManifest manifest;
  std::set<std::string> seen;
  for (const auto& item : doc["entries"]) {
    if (!item.is_object()) throw ConfigError("parse_error", "entry must be an object");
    ManifestEntry entry;
    entry.dataset_id = RequireString(item, "dataset_id");
    if (entry.dataset_id.empty()) throw ConfigError("parse_error", "empty dataset_id");
    if (!seen.insert(entry.dataset_id).second) {
      throw ConfigError("duplicate_dataset_id", entry.dataset_id);
    }
    entry.category = ParseCategory(RequireString(item, "category"));
    entry.domain = ParseDomain(RequireString(item, "domain"));
    if (item.contains("shard_paths")) {
      if (!item["shard_paths"].is_array()) {
        throw ConfigError("parse_error", "shard_paths must be an array");
      }
      for (const auto& p : item["shard_paths"]) {
        if (!p.is_string() || p.get_ref<const std::string&>().empty() ||
            p.get_ref<const std::string&>().find('\0') != std::string::npos) {
          throw ConfigError("bad_shard_path",
                            fmt::format("dataset '{}': invalid shard path", entry.dataset_id));
        }
        std::filesystem::path shard(p.get<std::string>());
        if (shard.is_relative() && !base_dir.empty()) shard = base_dir / shard;
        entry.shard_paths.push_back(shard.lexically_normal());
      }
    }
    if (item.contains("declared_count") && !item["declared_count"].is_null()) {
      const auto& count = item["declared_count"];
      if (!count.is_number_integer() || count.get<long long>() < 0) {
        throw ConfigError("parse_error", "declared_count must be an integer >= 0");
      }
      entry.declared_count = count.get<std::size_t>();
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

DatasetManifest IngestManifest(const std::filesystem::path& path) {
  return ParseManifest(ReadFile(path), path.parent_path());
}

ordered_json ManifestToJson(const DatasetManifest& manifest) {
  ordered_json entries = ordered_json::array();
  for (const auto& e : manifest.entries) {
    ordered_json item;
    item["dataset_id"] = e.dataset_id;
    item["category"] = ToString(e.category);
    item["domain"] = ToString(e.domain);
    ordered_json shards = ordered_json::array();
    for (const auto& p : e.shard_paths) shards.push_back(p.generic_string());
    item["shard_paths"] = std::move(shards);
    if (e.declared_count) item["declared_count"] = *e.declared_count;
    entries.push_back(std::move(item));
  }
  ordered_json doc;
  doc["entries"] = std::move(entries);
  return doc;
}

void WriteManifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("unwritable", path.string());
  out << ManifestToJson(manifest).dump(2) << '\n';
}

Sample SampleFromJson(const json& record, std::string_view dataset_id) {
  if (!record.is_object()) throw ConfigError("bad_record", "record must be an object");
  Sample s;
  s.id = RequireString(record, "id");
  if (auto it = record.find("dataset_id"); it != record.end() && it->is_string()) {
    s.dataset_id = it->get<std::string>();
  } else {
    s.dataset_id = std::string(dataset_id);
  }
  if (auto it = record.find("images"); it != record.end()) {
    if (!it->is_array()) throw ConfigError("bad_record", "images must be an array");
    for (const auto& img : *it) {
      if (!img.is_string()) throw ConfigError("bad_record", "image must be a string");
      s.images.push_back(img.get<std::string>());
    }
  }
  auto turns = record.find("text_turns");
  if (turns == record.end() || !turns->is_array()) {
    throw ConfigError("bad_record", "text_turns must be an array");
  }
  for (const auto& t : *turns) {
    if (!t.is_object()) throw ConfigError("bad_record", "turn must be an object");
    s.text_turns.push_back({ParseRole(RequireString(t, "role")), RequireString(t, "content")});
  }
  s.category = ParseCategory(RequireString(record, "category"));
  s.domain = ParseDomain(RequireString(record, "domain"));
  if (auto it = record.find("modality_tag"); it != record.end() && !it->is_null()) {
    if (!it->is_string()) throw ConfigError("bad_record", "modality_tag must be a string");
    s.modality_tag = it->get<std::string>();
  }
  if (auto it = record.find("metadata"); it != record.end() && !it->is_null()) {
    if (!it->is_object()) throw ConfigError("bad_record", "metadata must be an object");
    for (const auto& [key, value] : it->items()) {
      s.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  return s;
}

ordered_json SampleToJson(const Sample& sample) {
  ordered_json turns = ordered_json::array();
  for (const auto& t : sample.text_turns) {
    turns.push_back({{"role", ToString(t.role)}, {"content", t.content}});
  }
  ordered_json out;
  out["id"] = sample.id;
  out["images"] = sample.images;
  out["text_turns"] = std::move(turns);
  out["category"] = ToString(sample.category);
  out["domain"] = ToString(sample.domain);
  if (sample.modality_tag) out["modality_tag"] = *sample.modality_tag;
  out["metadata"] = ordered_json::object();
  for (const auto& [key, value] : sample.metadata) out["metadata"][key] = value;
  return out;
}

SampleStream::SampleStream(const ManifestEntry& entry, LoadOptions options, Cursor start)
    : entry_(entry), options_(options), cursor_(start) {}

bool SampleStream::OpenShard() {
  if (cursor_.shard >= entry_.shard_paths.size()) return false;
  const auto& path = entry_.shard_paths[cursor_.shard];
  file_ = std::ifstream(path, std::ios::binary);
  if (!file_) throw IoError("unreadable_shard", path.string());
  std::string skipped;
  for (std::size_t i = 0; i < cursor_.line && std::getline(file_, skipped); ++i) {
  }
  file_open_ = true;
  return true;
}

std::optional<Sample> SampleStream::Next() {
  while (true) {
    if (!file_open_ && !OpenShard()) return std::nullopt;
    std::string line;
    if (!std::getline(file_, line)) {
      file_open_ = false;
      file_.close();
      ++cursor_.shard;
      cursor_.line = 0;
      continue;
    }
    ++cursor_.line;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    const auto& shard = entry_.shard_paths[cursor_.shard];
    std::string reason;
    try {
      Sample sample = SampleFromJson(json::parse(line), entry_.dataset_id);
      auto validation = ValidateSample(sample);
      if (validation.ok()) return sample;
      for (const auto& v : validation.violations) {
        reason += reason.empty() ? v : "," + v;
      }
    } catch (const json::exception& e) {
      reason = e.what();
    } catch (const Error& e) {
      reason = e.what();
    }
    if (options_.strict) {
      throw ConfigError("invalid_line",
                        fmt::format("{}:{}: {}", shard.string(), cursor_.line, reason));
    }
    issues_.push_back({shard, cursor_.line, reason});
  }
}

SampleStream LoadSamples(const DatasetManifest& manifest, std::string_view dataset_id,
                         LoadOptions options, Cursor start) {
  const ManifestEntry* entry = manifest.Find(dataset_id);
  if (entry == nullptr) throw ConfigError("unknown_dataset", std::string(dataset_id));
  return SampleStream(*entry, options, start);
}

std::vector<Sample> LoadAll(const DatasetManifest& manifest, std::string_view dataset_id,
                            LoadOptions options) {
  auto stream = LoadSamples(manifest, dataset_id, options);
  std::vector<Sample> out;
  while (auto s = stream.Next()) out.push_back(std::move(*s));
  return out;
}

std::size_t WriteShard(const std::vector<Sample>& samples,
                       const std::filesystem::path& path, bool include_dataset_id) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("unwritable", path.string());
  for (const auto& s : samples) {
    auto record = SampleToJson(s);
    if (include_dataset_id) {
      ordered_json with_id;
      with_id["id"] = s.id;
      with_id["dataset_id"] = s.dataset_id;
      for (auto it = record.begin(); it != record.end(); ++it) {
        if (it.key() != "id") with_id[it.key()] = it.value();
      }
      record = std::move(with_id);
    }
    out << record.dump() << '\n';
  }
  if (!out) throw IoError("write_failed", path.string());
  return samples.size();
}

}  // namespace medcurate::corpus
