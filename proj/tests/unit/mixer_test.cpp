#include "medcurate/mixer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "medcurate/error.hpp"
#include "mix_support.hpp"
#include "test_support.hpp"

namespace medcurate::mixer {
namespace {

using testing::TempDir;

std::vector<corpus::Sample> Numbered(std::size_t n) {
  std::vector<corpus::Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(testing::Instruction("n" + std::to_string(100000 + i), "d", 0, "q", "a"));
  }
  return out;
}

std::multiset<std::string> Ids(const std::vector<corpus::Sample>& samples) {
  std::multiset<std::string> ids;
  for (const auto& s : samples) ids.insert(s.id);
  return ids;
}

TEST(RefusalTest, Examples) {
  const auto patterns = DefaultRefusalPatterns();
  EXPECT_TRUE(IsRefusal(testing::Instruction("a", "d", 0, "q", "Sorry, I can't assist with that."), patterns));
  EXPECT_TRUE(IsRefusal(testing::Instruction("a", "d", 0, "q", "  \tI CANNOT ASSIST here"), patterns));
  EXPECT_FALSE(IsRefusal(testing::Instruction("a", "d", 0, "q", "The X-ray shows..."), patterns));
  EXPECT_FALSE(IsRefusal(testing::Caption("c", "d", "Sorry, I can't see"), patterns));
  // Only the first assistant turn counts.
  auto multi = testing::Instruction("m", "d", 0, "q", "Fine answer.");
  multi.text_turns.push_back({corpus::Role::kUser, "more?"});
  multi.text_turns.push_back({corpus::Role::kAssistant, "Sorry, I can't go on."});
  EXPECT_FALSE(IsRefusal(multi, patterns));
}

TEST(RefusalTest, FilterReportsDrops) {
  std::vector<corpus::Sample> samples = {
      testing::Instruction("a", "d", 0, "q", "Sorry, I can't."),
      testing::Instruction("b", "d", 0, "q", "Yes."),
      testing::Caption("c", "d", "Sorry, blurry"),
  };
  FilterStats stats;
  const auto kept = FilterRefusals(samples, DefaultRefusalPatterns(), &stats);
  EXPECT_EQ(stats.dropped, 1u);
  EXPECT_EQ(stats.dropped_ids, std::vector<std::string>{"a"});
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].id, "b");
  EXPECT_EQ(kept[1].id, "c");
}

TEST(DownsampleTest, Examples) {
  const auto samples = Numbered(1000);
  const auto a = Downsample(samples, 20, 5);
  EXPECT_EQ(a.size(), 20u);
  EXPECT_EQ(a, Downsample(samples, 20, 5));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), [](auto& x, auto& y) { return x.id < y.id; }));
  EXPECT_EQ(Ids(a).size(), 20u);
  EXPECT_NE(Downsample(samples, 20, 6), a);

  EXPECT_EQ(Ids(Downsample(samples, 2000, 5)), Ids(samples));
  EXPECT_EQ(Ids(Downsample(samples, 1000, 5)), Ids(samples));
  EXPECT_THROW(Downsample(samples, 0, 5), Error);
  EXPECT_THROW(Downsample(std::span<const corpus::Sample>{}, 3, 5), Error);
}

TEST(DownsampleTest, EveryItemEquallyLikely) {
  const auto samples = Numbered(10);
  std::map<std::string, int> hits;
  for (std::uint64_t seed = 0; seed < 5000; ++seed) {
    for (const auto& s : Downsample(samples, 3, seed)) ++hits[s.id];
  }
  for (const auto& [id, n] : hits) EXPECT_NEAR(n, 1500, 150) << id;
}

TEST(ModalityReportTest, CountsTags) {
  std::vector<corpus::Sample> samples;
  for (const char* tag : {"CT", "CT", "X-Ray", "CT", "X-Ray", ""}) {
    auto s = testing::Instruction(std::string("s") + tag, "d", 1, "q", "a");
    if (*tag) s.modality_tag = tag;
    samples.push_back(s);
  }
  samples[5].category = corpus::Category::kCaption;
  const auto report = ModalityReport(samples);
  EXPECT_EQ(report.modality, (std::map<std::string, std::size_t>{{"CT", 3}, {"X-Ray", 2}, {"unknown", 1}}));
  EXPECT_EQ(report.category, (std::map<std::string, std::size_t>{{"caption", 1}, {"instruction", 5}}));
  EXPECT_EQ(report.total, 6u);
  EXPECT_NE(report.RenderTable().find("X-Ray"), std::string::npos);
}

TEST(ModalityReportTest, EmptyStream) {
  const auto report = ModalityReport({});
  EXPECT_EQ(report.total, 0u);
  EXPECT_TRUE(report.modality.empty());
  EXPECT_TRUE(report.category.empty());
}

class MixFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    manifest_ = corpus::IngestManifest(testing::WriteShapedCorpus(dir_.path(), testing::CrossStageShapes()));
  }

  TempDir dir_;
  corpus::DatasetManifest manifest_;
};

TEST_F(MixFixture, IdentityMix) {
  MixSpec spec;
  spec.sources = {{"slake", std::nullopt, {}}};
  const auto mix = BuildStageMix(spec, manifest_);
  EXPECT_EQ(Ids(mix.samples), Ids(corpus::LoadAll(manifest_, "slake")));
  EXPECT_EQ(mix.report.total, 25u);
}

TEST_F(MixFixture, CrossStageTargets) {
  const auto spec = MixSpec::FromJson(nlohmann::json::parse(testing::CrossStageSpecJson())).Scaled(1000);
  const auto mix = BuildStageMix(spec, manifest_);
  const std::map<std::string, std::size_t> expected = {
      {"general", 180}, {"llava_med", 13}, {"pmc_vqa", 20}, {"pubmedvision", 60},
      {"path_vqa", 30}, {"slake", 25},     {"vqa_rad", 15}};
  EXPECT_EQ(mix.report.per_source, expected);
  EXPECT_EQ(mix.report.total, 343u);
  EXPECT_EQ(mix.samples.size(), 343u);
  EXPECT_EQ(mix.report.refusals_dropped.at("general"), 40u);
  for (const auto& s : mix.samples) EXPECT_FALSE(IsRefusal(s, spec.refusal_patterns)) << s.id;

  std::size_t modality_sum = 0, category_sum = 0;
  for (const auto& [k, n] : mix.report.modality) modality_sum += n;
  for (const auto& [k, n] : mix.report.category) category_sum += n;
  EXPECT_EQ(modality_sum, 343u);
  EXPECT_EQ(category_sum, 343u);
  EXPECT_EQ(mix.report.category.at("caption"), 60u);

  // The shuffle interleaves sources instead of concatenating them.
  std::size_t switches = 0;
  for (std::size_t i = 1; i < mix.samples.size(); ++i) {
    switches += mix.samples[i].dataset_id != mix.samples[i - 1].dataset_id;
  }
  EXPECT_GT(switches, 100u);
}

TEST_F(MixFixture, StageTwoShowsBothCategories) {
  MixSpec spec;
  spec.stage = Stage::kSft2Medical;
  spec.sources = {{"general", std::nullopt, {"refusal"}},
                  {"pubmedvision", std::nullopt, {}},
                  {"slake", std::nullopt, {}}};
  const auto mix = BuildStageMix(spec, manifest_);
  std::map<std::string, std::size_t> categories;
  for (const auto& s : mix.samples) ++categories[std::string(corpus::ToString(s.category))];
  EXPECT_EQ(mix.report.category, categories);
  EXPECT_EQ(categories.at("instruction"), 220u + 25u);
  EXPECT_EQ(categories.at("caption"), 90u);
}

TEST_F(MixFixture, CapToMinBalances) {
  MixSpec spec;
  spec.balance_mode = BalanceMode::kCapToMin;
  spec.sources = {{"general", std::nullopt, {"refusal"}},
                  {"vqa_rad", std::nullopt, {}},
                  {"pmc_vqa", std::nullopt, {"refusal"}}};
  const auto mix = BuildStageMix(spec, manifest_);
  for (const auto& [id, n] : mix.report.per_source) EXPECT_EQ(n, 15u) << id;
  EXPECT_EQ(mix.report.total, 45u);
}

TEST_F(MixFixture, RerunsAreByteIdentical) {
  const auto spec = MixSpec::FromJson(nlohmann::json::parse(testing::CrossStageSpecJson())).Scaled(1000);
  TempDir a, b;
  const auto shards_a = WriteMix(BuildStageMix(spec, manifest_), spec, a.path(), {100});
  const auto shards_b = WriteMix(BuildStageMix(spec, manifest_), spec, b.path(), {100});
  ASSERT_EQ(shards_a.size(), 4u);
  ASSERT_EQ(shards_b.size(), 4u);
  std::size_t lines = 0;
  for (std::size_t i = 0; i < shards_a.size(); ++i) {
    const auto text = testing::ReadFile(shards_a[i]);
    EXPECT_EQ(text, testing::ReadFile(shards_b[i]));
    lines += std::count(text.begin(), text.end(), '\n');
  }
  EXPECT_EQ(lines, 343u);
  for (const char* name : {"mix_report.json", "mix_report.txt"}) {
    EXPECT_EQ(testing::ReadFile(a / name), testing::ReadFile(b / name));
  }

  auto reseeded = spec;
  reseeded.seed = 8;
  TempDir c;
  const auto shards_c = WriteMix(BuildStageMix(reseeded, manifest_), reseeded, c.path(), {100});
  EXPECT_NE(testing::ReadFile(shards_c[0]), testing::ReadFile(shards_a[0]));
}

TEST_F(MixFixture, ShardsReloadAsCorpus) {
  MixSpec spec;
  spec.sources = {{"vqa_rad", std::nullopt, {}}, {"slake", std::nullopt, {}}};
  const auto mix = BuildStageMix(spec, manifest_);
  TempDir out;
  const auto shards = WriteMix(mix, spec, out.path());
  ASSERT_EQ(shards.size(), 1u);
  const auto manifest = corpus::ParseManifest(
      R"({"entries":[{"dataset_id":"mixed","category":"instruction","domain":"medical","shard_paths":[")" +
      shards[0].generic_string() + "\"]}]}");
  const auto reloaded = corpus::LoadAll(manifest, "mixed");
  ASSERT_EQ(reloaded.size(), mix.samples.size());
  for (std::size_t i = 0; i < reloaded.size(); ++i) EXPECT_EQ(reloaded[i], mix.samples[i]);
}

TEST_F(MixFixture, SpecErrors) {
  MixSpec spec;
  spec.sources = {{"slake", std::nullopt, {"profanity"}}};
  try {
    BuildStageMix(spec, manifest_);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "mixer.unknown_filter");
  }
  spec.sources = {{"nope", std::nullopt, {}}};
  try {
    BuildStageMix(spec, manifest_);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "mixer.unresolvable_source");
  }
  spec.balance_mode = BalanceMode::kExplicitTargets;
  spec.sources = {{"slake", std::nullopt, {}}};
  EXPECT_THROW(spec.Validate(&manifest_), Error);
  EXPECT_THROW(MixSpec::FromJson(nlohmann::json::parse(
                   R"({"stage":"sft3_cross","sources":[{"dataset_id":"a","target_count":0}]})")),
               Error);
}

TEST(MixSpecTest, ScaledRoundsUp) {
  MixSpec spec;
  spec.sources = {{"a", 180000, {}}, {"b", 1, {}}, {"c", 1500, {}}, {"d", std::nullopt, {}}};
  const auto scaled = spec.Scaled(1000);
  EXPECT_EQ(scaled.sources[0].target_count, 180u);
  EXPECT_EQ(scaled.sources[1].target_count, 1u);
  EXPECT_EQ(scaled.sources[2].target_count, 2u);
  EXPECT_FALSE(scaled.sources[3].target_count);
  EXPECT_EQ(MixSpec::FromJson(nlohmann::json::parse(spec.ToJson().dump())).ToJson(), spec.ToJson());
}

}  // namespace
}  // namespace medcurate::mixer
