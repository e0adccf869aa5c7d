#include "medcurate/lengths.hpp"

#include <fmt/format.h>

#include "medcurate/error.hpp"

namespace medcurate::lengths {

namespace {

bool IsSpace(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

void LengthConfig::Validate() const {
  if (tokens_per_image < 1) {
    throw Error(ErrorKind::kConfig, "lengths.bad_config", "tokens_per_image must be >= 1");
  }
  if (capacity < tokens_per_image + per_sample_overhead) {
    throw Error(ErrorKind::kConfig, "lengths.bad_config",
                fmt::format("capacity {} < tokens_per_image {} + overhead {}", capacity,
                            tokens_per_image, per_sample_overhead));
  }
}

TokenCounter WhitespaceCounter() {
  return {"whitespace", [](std::string_view text) {
            std::size_t tokens = 0;
            bool in_token = false;
            for (unsigned char c : text) {
              const bool space = IsSpace(c);
              if (!space && !in_token) ++tokens;
              in_token = !space;
            }
            return tokens;
          }};
}

TokenCounter ByteHeuristicCounter() {
  return {"bytes4", [](std::string_view text) { return (text.size() + 3) / 4; }};
}

TokenCounter CounterByName(std::string_view name) {
  if (name == "whitespace") return WhitespaceCounter();
  if (name == "bytes4") return ByteHeuristicCounter();
  throw Error(ErrorKind::kConfig, "lengths.unknown_counter", std::string(name));
}

std::size_t SampleLength(const corpus::Sample& sample, const LengthConfig& config,
                         const TokenCounter& counter) {
  std::size_t total = sample.images.size() * config.tokens_per_image;
  for (const auto& turn : sample.text_turns) total += counter.Count(turn.content);
  return total + config.per_sample_overhead;
}

}  // namespace medcurate::lengths
