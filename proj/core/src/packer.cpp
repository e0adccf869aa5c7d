#include "medcurate/packer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "medcurate/error.hpp"

namespace medcurate::packer {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Leftmost-fit query structure: max of remaining capacity over bin slots.
class SlackTree {
 public:
  explicit SlackTree(std::size_t slots) {
    size_ = 1;
    while (size_ < std::max<std::size_t>(slots, 1)) size_ <<= 1;
    tree_.assign(2 * size_, 0);
  }

  void Set(std::size_t slot, std::size_t slack) {
    std::size_t node = slot + size_;
    tree_[node] = slack;
    for (node >>= 1; node >= 1; node >>= 1) {
      tree_[node] = std::max(tree_[2 * node], tree_[2 * node + 1]);
    }
  }

  std::size_t Get(std::size_t slot) const { return tree_[slot + size_]; }

  // Lowest slot with slack >= need, or npos.
  std::size_t FindFirst(std::size_t need) const {
    if (tree_[1] < need) return npos;
    std::size_t node = 1;
    while (node < size_) {
      node = tree_[2 * node] >= need ? 2 * node : 2 * node + 1;
    }
    return node - size_;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t size_ = 1;
  std::vector<std::size_t> tree_;
};

std::vector<std::size_t> DecreasingOrder(std::span<const std::size_t> lengths) {
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lengths[a] > lengths[b];
  });
  return order;
}

// Validates lengths and splits off oversize items. Returns the in-capacity
// items in FFD visiting order.
std::vector<std::size_t> Prepare(std::span<const std::size_t> lengths, std::size_t capacity,
                                 OversizePolicy policy, PackPlan& plan) {
  if (capacity == 0) throw Error(ErrorKind::kConfig, "packer.bad_capacity", "capacity must be >= 1");
  std::vector<std::size_t> zero;
  std::vector<std::size_t> oversize;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] == 0) zero.push_back(i);
    if (lengths[i] > capacity) oversize.push_back(i);
  }
  if (!zero.empty()) {
    throw Error(ErrorKind::kConfig, "packer.zero_length",
                fmt::format("{} item(s) with zero length, first index {}", zero.size(),
                            zero.front()));
  }
  if (!oversize.empty() && policy == OversizePolicy::kReject) {
    std::string offenders;
    for (std::size_t i : oversize) {
      offenders += fmt::format("{}item {} (length {})", offenders.empty() ? "" : ", ", i,
                               lengths[i]);
    }
    throw Error(ErrorKind::kCapacity, "packer.oversize",
                fmt::format("capacity {} exceeded by {}", capacity, offenders));
  }

  plan.report.n_samples = lengths.size();
  plan.report.capacity = capacity;
  plan.report.oversize_policy = policy;
  plan.report.oversize_count = oversize.size();

  std::vector<std::size_t> order = DecreasingOrder(lengths);
  std::erase_if(order, [&](std::size_t i) { return lengths[i] > capacity; });
  return order;
}

void Finish(std::span<const std::size_t> lengths, std::size_t capacity, PackPlan& plan) {
  std::uint64_t used = 0;
  for (const auto& bin : plan.bins) used += bin.total;
  plan.report.n_bins = plan.bins.size();
  plan.report.occupancy = {used, static_cast<std::uint64_t>(plan.bins.size()) * capacity};

  for (std::size_t i : DecreasingOrder(lengths)) {
    if (lengths[i] > capacity) plan.bins.push_back({{i}, lengths[i], true});
  }
}

}  // namespace

std::string_view ToString(OversizePolicy policy) {
  return policy == OversizePolicy::kReject ? "reject" : "isolate";
}

OversizePolicy ParseOversizePolicy(std::string_view name) {
  if (name == "reject") return OversizePolicy::kReject;
  if (name == "isolate") return OversizePolicy::kIsolate;
  throw Error(ErrorKind::kConfig, "packer.unknown_policy", std::string(name));
}

std::string_view ToString(FindingKind kind) {
  switch (kind) {
    case FindingKind::kCapacityViolation: return "capacity_violation";
    case FindingKind::kParallelMismatch: return "parallel_mismatch";
    case FindingKind::kMalformed: return "malformed";
  }
  return "?";
}

ordered_json ToJson(const PackingReport& report) {
  ordered_json out;
  out["n_samples"] = report.n_samples;
  out["n_bins"] = report.n_bins;
  out["capacity"] = report.capacity;
  out["occupancy"] = {{"used", report.occupancy.used},
                      {"available", report.occupancy.available},
                      {"value", report.occupancy.value()}};
  out["oversize_count"] = report.oversize_count;
  out["oversize_policy"] = ToString(report.oversize_policy);
  return out;
}

ordered_json ToJson(const VerifyReport& report) {
  ordered_json out;
  out["n_samples"] = report.report.n_samples;
  out["n_bins"] = report.report.n_bins;
  out["capacity"] = report.report.capacity;
  out["occupancy"] = {{"used", report.report.occupancy.used},
                      {"available", report.report.occupancy.available},
                      {"value", report.report.occupancy.value()}};
  ordered_json findings = ordered_json::array();
  for (const auto& f : report.findings) {
    findings.push_back({{"path", f.path.generic_string()},
                        {"document", f.document},
                        {"kind", ToString(f.kind)},
                        {"detail", f.detail}});
  }
  out["findings"] = std::move(findings);
  out["ok"] = report.ok();
  return out;
}

PackPlan PackFfd(std::span<const std::size_t> lengths, std::size_t capacity,
                 OversizePolicy policy) {
  PackPlan plan;
  const auto order = Prepare(lengths, capacity, policy, plan);

  SlackTree slack(order.size());
  for (std::size_t item : order) {
    const std::size_t need = lengths[item];
    std::size_t slot = slack.FindFirst(need);
    if (slot == SlackTree::npos) {
      slot = plan.bins.size();
      plan.bins.emplace_back();
      slack.Set(slot, capacity);
    }
    auto& bin = plan.bins[slot];
    bin.items.push_back(item);
    bin.total += need;
    slack.Set(slot, slack.Get(slot) - need);
  }
  Finish(lengths, capacity, plan);
  return plan;
}

PackPlan PackFfdNaive(std::span<const std::size_t> lengths, std::size_t capacity,
                      OversizePolicy policy) {
  PackPlan plan;
  const auto order = Prepare(lengths, capacity, policy, plan);
  for (std::size_t item : order) {
    auto it = std::find_if(plan.bins.begin(), plan.bins.end(), [&](const BinAssignment& b) {
      return b.total + lengths[item] <= capacity;
    });
    if (it == plan.bins.end()) it = plan.bins.insert(plan.bins.end(), BinAssignment{});
    it->items.push_back(item);
    it->total += lengths[item];
  }
  Finish(lengths, capacity, plan);
  return plan;
}

PackResult PackSamples(std::span<const corpus::Sample> samples,
                       const lengths::LengthConfig& config,
                       const lengths::TokenCounter& counter, OversizePolicy policy) {
  config.Validate();
  std::vector<std::size_t> sizes;
  sizes.reserve(samples.size());
  for (const auto& s : samples) sizes.push_back(lengths::SampleLength(s, config, counter));
  if (policy == OversizePolicy::kReject) {
    std::string offenders;
    std::size_t count = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (sizes[i] <= config.capacity) continue;
      if (++count <= 20) {
        offenders += fmt::format("{}{} (length {})", offenders.empty() ? "" : ", ", samples[i].id, sizes[i]);
      }
    }
    if (count > 0) {
      if (count > 20) offenders += fmt::format(", and {} more", count - 20);
      throw Error(ErrorKind::kCapacity, "packer.oversize",
                  fmt::format("{} sample(s) exceed capacity {}: {}", count, config.capacity, offenders));
    }
  }

  PackPlan plan = PackFfd(sizes, config.capacity, policy);
  PackResult result;
  result.report = plan.report;
  result.bins.reserve(plan.bins.size());
  for (const auto& assignment : plan.bins) {
    PackedBin bin;
    bin.total = assignment.total;
    bin.oversize = assignment.oversize;
    for (std::size_t i : assignment.items) {
      bin.samples.push_back(samples[i]);
      bin.lengths.push_back(sizes[i]);
    }
    result.bins.push_back(std::move(bin));
  }
  return result;
}

PackedRecord PackedRecord::From(const corpus::Sample& sample) {
  return {sample.id, sample.images, sample.text_turns, sample.metadata};
}

PackedDocument ToDocument(const PackedBin& bin) {
  PackedDocument doc;
  doc.lengths = bin.lengths;
  doc.data.reserve(bin.samples.size());
  for (const auto& s : bin.samples) doc.data.push_back(PackedRecord::From(s));
  return doc;
}

std::string SerializeDocument(const PackedDocument& document) {
  ordered_json data = ordered_json::array();
  for (const auto& record : document.data) {
    ordered_json turns = ordered_json::array();
    for (const auto& t : record.text_turns) {
      turns.push_back({{"role", corpus::ToString(t.role)}, {"content", t.content}});
    }
    ordered_json item;
    item["id"] = record.id;
    item["images"] = record.images;
    item["text_turns"] = std::move(turns);
    item["metadata"] = ordered_json::object();
    for (const auto& [key, value] : record.metadata) item["metadata"][key] = value;
    data.push_back(std::move(item));
  }
  ordered_json doc;
  doc["data"] = std::move(data);
  doc["lengths"] = document.lengths;
  return doc.dump();
}

namespace {

PackedDocument ParseDocument(const json& doc) {
  if (!doc.is_object()) throw std::runtime_error("document is not an object");
  if (doc.size() != 2 || !doc.contains("data") || !doc.contains("lengths")) {
    throw std::runtime_error("document must have exactly the keys 'data' and 'lengths'");
  }
  const auto& data = doc.at("data");
  const auto& lens = doc.at("lengths");
  if (!data.is_array() || !lens.is_array()) throw std::runtime_error("'data'/'lengths' must be arrays");
  PackedDocument out;
  for (const auto& l : lens) {
    if (!l.is_number_unsigned()) throw std::runtime_error("lengths must be non-negative integers");
    out.lengths.push_back(l.get<std::size_t>());
  }
  for (const auto& item : data) {
    PackedRecord record;
    record.id = item.at("id").get<std::string>();
    record.images = item.at("images").get<std::vector<std::string>>();
    for (const auto& t : item.at("text_turns")) {
      record.text_turns.push_back({corpus::ParseRole(t.at("role").get<std::string>()),
                                   t.at("content").get<std::string>()});
    }
    if (auto it = item.find("metadata"); it != item.end()) {
      record.metadata = it->get<std::map<std::string, std::string>>();
    }
    out.data.push_back(std::move(record));
  }
  return out;
}

void WriteFile(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "packer.unwritable", path.string());
  out << contents;
  if (!out) throw Error(ErrorKind::kIo, "packer.write_failed", path.string());
}

std::size_t WriteGroup(const std::vector<const PackedBin*>& bins,
                       const std::filesystem::path& dir, std::size_t shard_size) {
  if (bins.empty()) return 0;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "packer.unwritable", dir.string() + ": " + ec.message());

  std::size_t files = 0;
  if (shard_size <= 1) {
    for (const PackedBin* bin : bins) {
      WriteFile(dir / fmt::format("bin_{:06d}.json", files),
                SerializeDocument(ToDocument(*bin)) + "\n");
      ++files;
    }
    return files;
  }
  for (std::size_t start = 0; start < bins.size(); start += shard_size) {
    std::string contents;
    const std::size_t stop = std::min(bins.size(), start + shard_size);
    for (std::size_t i = start; i < stop; ++i) {
      contents += SerializeDocument(ToDocument(*bins[i]));
      contents += '\n';
    }
    WriteFile(dir / fmt::format("bins_{:06d}.jsonl", files), contents);
    ++files;
  }
  return files;
}

}  // namespace

std::size_t WritePacked(const std::vector<PackedBin>& bins,
                        const std::filesystem::path& out_dir, WriteOptions options) {
  std::vector<const PackedBin*> regular;
  std::vector<const PackedBin*> isolated;
  for (const auto& bin : bins) (bin.oversize ? isolated : regular).push_back(&bin);
  return WriteGroup(regular, out_dir, options.shard_size) +
         WriteGroup(isolated, out_dir / "oversize", options.shard_size);
}

std::vector<PackedDocument> ReadPackedFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "packer.unreadable", path.string());
  std::vector<PackedDocument> docs;
  std::string line;
  std::size_t line_no = 0;
  try {
    if (path.extension() == ".jsonl") {
      while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        docs.push_back(ParseDocument(json::parse(line)));
      }
    } else {
      std::ostringstream buffer;
      buffer << in.rdbuf();
      docs.push_back(ParseDocument(json::parse(buffer.str())));
    }
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kConfig, "packer.malformed",
                line_no ? fmt::format("{}:{}: {}", path.string(), line_no, e.what())
                        : fmt::format("{}: {}", path.string(), e.what()));
  }
  return docs;
}

std::vector<std::filesystem::path> ListPackedFiles(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    const bool single = name.starts_with("bin_") && name.ends_with(".json");
    const bool shard = name.starts_with("bins_") && name.ends_with(".jsonl");
    if (single || shard) files.push_back(entry.path());
  }
  if (ec) throw Error(ErrorKind::kIo, "packer.unreadable", dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  return files;
}

VerifyReport VerifyPacking(std::span<const std::filesystem::path> paths, std::size_t capacity) {
  VerifyReport out;
  out.report.capacity = capacity;
  std::uint64_t used = 0;
  for (const auto& path : paths) {
    std::vector<PackedDocument> docs;
    try {
      docs = ReadPackedFile(path);
    } catch (const Error& e) {
      out.findings.push_back({path, 0, FindingKind::kMalformed, e.what()});
      continue;
    }
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const auto& doc = docs[d];
      const std::uint64_t total =
          std::accumulate(doc.lengths.begin(), doc.lengths.end(), std::uint64_t{0});
      if (doc.data.size() != doc.lengths.size()) {
        out.findings.push_back({path, d, FindingKind::kParallelMismatch,
                                fmt::format("|data|={} |lengths|={}", doc.data.size(),
                                            doc.lengths.size())});
      }
      if (total > capacity) {
        out.findings.push_back({path, d, FindingKind::kCapacityViolation,
                                fmt::format("total {} > capacity {}", total, capacity)});
      }
      used += total;
      out.report.n_samples += doc.data.size();
      ++out.report.n_bins;
    }
  }
  out.report.occupancy = {used, static_cast<std::uint64_t>(out.report.n_bins) * capacity};
  return out;
}

}  // namespace medcurate::packer
