#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

#include "medcurate/corpus.hpp"

namespace medcurate::lengths {

inline constexpr std::size_t kPackingTokensPerImage = 144;
inline constexpr std::size_t kSftTokensPerImage = 729;
inline constexpr std::size_t kContextCapacity = 4096;

struct LengthConfig {
  std::size_t tokens_per_image = kPackingTokensPerImage;
  std::size_t per_sample_overhead = 0;
  std::size_t capacity = kContextCapacity;

  // Throws medcurate::Error (kConfig) when the invariants do not hold.
  void Validate() const;
};

// Named, injectable text token counter. Must be deterministic with
// Count("") == 0.
struct TokenCounter {
  std::string name;
  std::function<std::size_t(std::string_view)> count;

  std::size_t Count(std::string_view text) const { return count(text); }
};

// Counts maximal runs of non-whitespace characters.
TokenCounter WhitespaceCounter();
// ceil(bytes / 4).
TokenCounter ByteHeuristicCounter();
// "whitespace" or "bytes4"; throws on other names.
TokenCounter CounterByName(std::string_view name);

std::size_t SampleLength(const corpus::Sample& sample, const LengthConfig& config,
                         const TokenCounter& counter);

}  // namespace medcurate::lengths
