#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "medcurate/corpus.hpp"
#include "medcurate/lengths.hpp"

namespace medcurate::packer {

enum class OversizePolicy { kReject, kIsolate };

std::string_view ToString(OversizePolicy policy);
OversizePolicy ParseOversizePolicy(std::string_view name);

// Exact fraction used / available; compared by cross-multiplication.
struct Occupancy {
  std::uint64_t used = 0;
  std::uint64_t available = 0;

  double value() const {
    return available == 0 ? 0.0 : static_cast<double>(used) / static_cast<double>(available);
  }
  friend bool operator==(const Occupancy& a, const Occupancy& b) {
    return static_cast<unsigned __int128>(a.used) * b.available ==
           static_cast<unsigned __int128>(b.used) * a.available;
  }
};

struct PackingReport {
  std::size_t n_samples = 0;
  std::size_t n_bins = 0;  // regular bins; isolated oversize bins excluded
  std::size_t capacity = lengths::kContextCapacity;
  Occupancy occupancy;
  std::size_t oversize_count = 0;
  OversizePolicy oversize_policy = OversizePolicy::kIsolate;
};

nlohmann::ordered_json ToJson(const PackingReport& report);

// Bin of item indices in placement order.
struct BinAssignment {
  std::vector<std::size_t> items;
  std::size_t total = 0;
  bool oversize = false;
};

struct PackPlan {
  std::vector<BinAssignment> bins;  // regular bins first, then isolated ones
  PackingReport report;
};

// First-Fit-Decreasing over item lengths. Items are visited by length
// descending, ties by index ascending; each goes to the lowest-indexed bin
// with room. Runs in O(n log n) via a max segment tree over bin slack.
// Throws Error(kCapacity, "packer.oversize") under kReject when any length
// exceeds capacity, and Error(kConfig) on zero lengths.
PackPlan PackFfd(std::span<const std::size_t> lengths, std::size_t capacity,
                 OversizePolicy policy = OversizePolicy::kIsolate);

// Same contract with the textbook O(n * bins) scan; kept as a reference.
PackPlan PackFfdNaive(std::span<const std::size_t> lengths, std::size_t capacity,
                      OversizePolicy policy = OversizePolicy::kIsolate);

struct PackedBin {
  std::vector<corpus::Sample> samples;
  std::vector<std::size_t> lengths;
  std::size_t total = 0;
  bool oversize = false;
};

struct PackResult {
  std::vector<PackedBin> bins;
  PackingReport report;
};

// Computes per-sample lengths and packs them.
PackResult PackSamples(std::span<const corpus::Sample> samples,
                       const lengths::LengthConfig& config,
                       const lengths::TokenCounter& counter,
                       OversizePolicy policy = OversizePolicy::kIsolate);

// The subset of a sample that lands in a packed file.
struct PackedRecord {
  std::string id;
  std::vector<std::string> images;
  std::vector<corpus::TextTurn> text_turns;
  std::map<std::string, std::string> metadata;

  static PackedRecord From(const corpus::Sample& sample);
  friend bool operator==(const PackedRecord&, const PackedRecord&) = default;
};

struct PackedDocument {
  std::vector<PackedRecord> data;
  std::vector<std::size_t> lengths;

  friend bool operator==(const PackedDocument&, const PackedDocument&) = default;
};

PackedDocument ToDocument(const PackedBin& bin);

// Serializes one bin as {"data": [...], "lengths": [...]} in that key order,
// compact, no trailing newline.
std::string SerializeDocument(const PackedDocument& document);

struct WriteOptions {
  // <= 1: one bin_NNNNNN.json per bin; otherwise bins_NNNNNN.jsonl with up to
  // shard_size documents, one per line.
  std::size_t shard_size = 1;
};

// Regular bins go to out_dir, isolated oversize bins to out_dir/oversize.
// Returns the number of files written.
std::size_t WritePacked(const std::vector<PackedBin>& bins,
                        const std::filesystem::path& out_dir, WriteOptions options = {});

// Parses every document in a .json or .jsonl packed file.
std::vector<PackedDocument> ReadPackedFile(const std::filesystem::path& path);

// Packed files (bin_*.json, bins_*.jsonl) directly inside dir, sorted by name.
std::vector<std::filesystem::path> ListPackedFiles(const std::filesystem::path& dir);

enum class FindingKind { kCapacityViolation, kParallelMismatch, kMalformed };
std::string_view ToString(FindingKind kind);

struct Finding {
  std::filesystem::path path;
  std::size_t document = 0;
  FindingKind kind = FindingKind::kMalformed;
  std::string detail;
};

struct VerifyReport {
  PackingReport report;
  std::vector<Finding> findings;

  bool ok() const { return findings.empty(); }
};

nlohmann::ordered_json ToJson(const VerifyReport& report);

// Re-parses packed files and recomputes totals and occupancy from "lengths".
VerifyReport VerifyPacking(std::span<const std::filesystem::path> paths,
                           std::size_t capacity = lengths::kContextCapacity);

}  // namespace medcurate::packer
