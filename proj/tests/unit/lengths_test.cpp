#include "medcurate/lengths.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "medcurate/error.hpp"
#include "test_support.hpp"

namespace medcurate::lengths {
namespace {

corpus::Sample Bare(std::size_t images, std::vector<std::string> texts) {
  corpus::Sample s;
  s.id = "s";
  s.dataset_id = "d";
  s.category = corpus::Category::kInterleaved;
  for (std::size_t i = 0; i < images; ++i) s.images.push_back("AAAA");
  for (auto& t : texts) s.text_turns.push_back({corpus::Role::kInterleavedText, std::move(t)});
  return s;
}

// Token enumeration through iostream extraction; independent of the
// counter's scanner.
std::size_t EnumerateTokens(const corpus::Sample& s) {
  std::size_t n = 0;
  for (const auto& turn : s.text_turns) {
    std::istringstream in(turn.content);
    std::string token;
    while (in >> token) ++n;
  }
  return n;
}

TEST(SampleLengthTest, ZeroCase) {
  EXPECT_EQ(SampleLength(Bare(0, {""}), {144, 0, 4096}, WhitespaceCounter()), 0u);
  EXPECT_EQ(SampleLength(Bare(0, {}), {144, 0, 4096}, WhitespaceCounter()), 0u);
}

TEST(SampleLengthTest, TwoImagesHundredTokens) {
  const auto s = Bare(2, {testing::Words(60), testing::Words(40)});
  EXPECT_EQ(SampleLength(s, {144, 0, 4096}, WhitespaceCounter()), 388u);
}

TEST(SampleLengthTest, OneImageSftBudgetWithOverhead) {
  EXPECT_EQ(SampleLength(Bare(1, {""}), {729, 2, 4096}, WhitespaceCounter()), 731u);
}

TEST(SampleLengthTest, MatchesEnumerationOnFixtureCorpus) {
  std::mt19937_64 rng(11);
  const char* vocab[] = {"lung", "nodule", "CT", "axial", "  ", "\t", "\n", "x-ray", "é"};
  const LengthConfig cfg{144, 3, 4096};
  for (int i = 0; i < 100; ++i) {
    std::vector<std::string> texts;
    for (std::size_t t = 0, turns = rng() % 4; t < turns; ++t) {
      std::string text;
      for (std::size_t w = 0, words = rng() % 50; w < words; ++w) {
        text += vocab[rng() % std::size(vocab)];
        if (rng() % 3) text += ' ';
      }
      texts.push_back(text);
    }
    const auto s = Bare(rng() % 5, texts);
    EXPECT_EQ(SampleLength(s, cfg, WhitespaceCounter()),
              s.images.size() * 144 + EnumerateTokens(s) + 3);
  }
}

TEST(TokenCounterTest, BundledCountersContract) {
  std::mt19937_64 rng(5);
  for (const auto& counter : {WhitespaceCounter(), ByteHeuristicCounter()}) {
    EXPECT_EQ(counter.Count(""), 0u) << counter.name;
    for (int i = 0; i < 500; ++i) {
      std::string a, b;
      for (std::size_t k = 0, n = rng() % 30; k < n; ++k) a += " ab\tc"[rng() % 5];
      for (std::size_t k = 0, n = rng() % 30; k < n; ++k) b += " ab\tc"[rng() % 5];
      EXPECT_LE(counter.Count(a + b), counter.Count(a) + counter.Count(b) + 1) << counter.name;
      EXPECT_EQ(counter.Count(a), counter.Count(a));
    }
  }
  EXPECT_EQ(ByteHeuristicCounter().Count("abcde"), 2u);
  EXPECT_EQ(WhitespaceCounter().Count("  a  bb\nc "), 3u);
}

TEST(TokenCounterTest, ByName) {
  EXPECT_EQ(CounterByName("whitespace").name, "whitespace");
  EXPECT_EQ(CounterByName("bytes4").name, "bytes4");
  EXPECT_THROW(CounterByName("bpe"), Error);
}

TEST(LengthConfigTest, Invariants) {
  EXPECT_NO_THROW((LengthConfig{144, 0, 4096}.Validate()));
  EXPECT_THROW((LengthConfig{0, 0, 4096}.Validate()), Error);
  EXPECT_THROW((LengthConfig{729, 10, 700}.Validate()), Error);
  EXPECT_EQ(LengthConfig{}.tokens_per_image, 144u);
  EXPECT_EQ(LengthConfig{}.capacity, 4096u);
  EXPECT_EQ(kSftTokensPerImage, 729u);
}

}  // namespace
}  // namespace medcurate::lengths
