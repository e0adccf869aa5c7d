#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "medcurate/corpus.hpp"

namespace medcurate::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("medcurate_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void WriteFile(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << contents;
}

inline std::string Words(std::size_t n, const std::string& word = "tok") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += word;
  }
  return out;
}

inline corpus::Sample Instruction(std::string id, std::string dataset, std::size_t images,
                                  std::string question, std::string answer) {
  corpus::Sample s;
  s.id = std::move(id);
  s.dataset_id = std::move(dataset);
  s.category = corpus::Category::kInstruction;
  s.domain = corpus::Domain::kMedical;
  for (std::size_t i = 0; i < images; ++i) s.images.push_back(corpus::EncodeBase64("img" + std::to_string(i)));
  s.text_turns = {{corpus::Role::kUser, std::move(question)},
                  {corpus::Role::kAssistant, std::move(answer)}};
  return s;
}

inline corpus::Sample Caption(std::string id, std::string dataset, std::string caption) {
  corpus::Sample s;
  s.id = std::move(id);
  s.dataset_id = std::move(dataset);
  s.category = corpus::Category::kCaption;
  s.domain = corpus::Domain::kMedical;
  s.images = {corpus::EncodeBase64("pixels")};
  s.text_turns = {{corpus::Role::kCaption, std::move(caption)}};
  return s;
}

// The five samples of the packing worked example. With 144 tokens per image
// and the whitespace counter their lengths are 2000, 1500, 1200, 900, 500.
// tests/golden/make_golden.py builds the same records independently.
inline std::vector<corpus::Sample> WorkedExampleSamples() {
  const std::size_t targets[] = {2000, 1500, 1200, 900, 500};
  std::vector<corpus::Sample> out;
  for (std::size_t k = 0; k < 5; ++k) {
    const std::size_t images = targets[k] / 144;
    const std::size_t words = targets[k] % 144;
    corpus::Sample s;
    s.id = "pack-" + std::to_string(k);
    s.dataset_id = "golden";
    s.category = corpus::Category::kInstruction;
    s.domain = corpus::Domain::kMedical;
    for (std::size_t j = 0; j < images; ++j) {
      s.images.push_back(corpus::EncodeBase64("img-" + std::to_string(k) + "-" + std::to_string(j)));
    }
    s.text_turns = {{corpus::Role::kUser, Words(words / 2, "what")},
                    {corpus::Role::kAssistant, Words(words - words / 2, "answer")}};
    s.metadata = {{"source", "golden"}, {"index", std::to_string(k)}};
    out.push_back(std::move(s));
  }
  return out;
}

// Writes `samples` as a single-shard dataset and returns a manifest entry
// JSON fragment for it.
inline std::string ShardEntry(const std::filesystem::path& dir, const std::string& dataset_id,
                              const std::string& category, const std::string& domain,
                              const std::vector<corpus::Sample>& samples) {
  const auto shard = dir / (dataset_id + ".jsonl");
  corpus::WriteShard(samples, shard);
  return "{\"dataset_id\":\"" + dataset_id + "\",\"category\":\"" + category +
         "\",\"domain\":\"" + domain + "\",\"shard_paths\":[\"" + shard.generic_string() + "\"]}";
}

}  // namespace medcurate::testing
