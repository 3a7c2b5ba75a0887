#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "spe/error.hpp"
#include "spe/pairing.hpp"

using namespace spe;

namespace {

std::vector<BacklogItem> items_with(const std::vector<std::int64_t>& sps) {
  std::vector<BacklogItem> items;
  for (std::size_t i = 0; i < sps.size(); ++i) {
    BacklogItem it;
    it.id = "I" + std::to_string(i);
    it.story_point = StoryPoint(sps[i]);
    it.split = Split::train;
    items.push_back(it);
  }
  return items;
}

}  // namespace

TEST(JudgmentLabel, FollowsStoryPointOrder) {
  EXPECT_EQ(judgment_label(5, 3), 1);
  EXPECT_EQ(judgment_label(2, 7), -1);
  EXPECT_THROW(judgment_label(4, 4), std::invalid_argument);
}

TEST(SimulatePairs, DistinctStoryPointsGiveExactlyKPerAnchor) {
  const auto items = items_with({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  const auto set = simulate_pairs(items, 3, 99);
  EXPECT_EQ(set.pairs.size(), 30u);
  EXPECT_EQ(set.dropped, 0u);
  EXPECT_EQ(set.shortfall, 0u);
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::set<std::string> partners;
    for (std::size_t j = 0; j < 3; ++j) {
      const auto& p = set.pairs[i * 3 + j];
      EXPECT_EQ(p.a, items[i].id);
      EXPECT_NE(p.a, p.b);
      partners.insert(p.b);
    }
    EXPECT_EQ(partners.size(), 3u);
  }
}

TEST(SimulatePairs, LabelsMatchStoryPointSign) {
  const auto items = items_with({5, 3, 8, 1, 13, 2});
  std::map<std::string, double> sp;
  for (const auto& it : items) sp[it.id] = it.sp();
  const auto set = simulate_pairs(items, 2, 5);
  for (const auto& p : set.pairs) EXPECT_EQ(p.y, sp[p.a] > sp[p.b] ? 1 : -1);
}

TEST(SimulatePairs, AllTiedGivesNothingAndFullShortfall) {
  const auto items = items_with({5, 5, 5, 5});
  const auto set = simulate_pairs(items, 2, 1);
  EXPECT_TRUE(set.pairs.empty());
  EXPECT_EQ(set.dropped, 4u);
  EXPECT_EQ(set.shortfall, 8u);
}

TEST(SimulatePairs, TiesAreRedrawnFromRemainingCandidates) {
  // Anchor 0 (sp 1) has two tied items and one valid partner.
  const auto items = items_with({1, 1, 1, 2});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto set = simulate_pairs(items, 1, seed);
    EXPECT_EQ(set.pairs.size(), 4u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(set.pairs[i].b, "I3");
  }
  const auto k2 = simulate_pairs(items, 2, 0);
  // Three anchors get one partner each, the sp-2 anchor gets two.
  EXPECT_EQ(k2.pairs.size(), 5u);
  EXPECT_EQ(k2.dropped, 3u);
  EXPECT_EQ(k2.shortfall, 3u);
}

TEST(SimulatePairs, DeterministicPerSeed) {
  const auto items = items_with({1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_EQ(simulate_pairs(items, 2, 17).pairs, simulate_pairs(items, 2, 17).pairs);
  EXPECT_NE(simulate_pairs(items, 2, 17).pairs, simulate_pairs(items, 2, 18).pairs);
}

TEST(SimulatePairs, Preconditions) {
  EXPECT_THROW(simulate_pairs(items_with({1}), 1, 0), ValidationError);
  EXPECT_THROW(simulate_pairs(items_with({1, 2}), 0, 0), ValidationError);
  auto unlabeled = items_with({1, 2});
  unlabeled[1].story_point.reset();
  EXPECT_THROW(simulate_pairs(unlabeled, 1, 0), ValidationError);
}

TEST(AnnotationPairs, FourItemsOnePartnerEach) {
  const auto items = items_with({1, 1, 1, 1});
  const auto pairs = generate_annotation_pairs(items, 1, 3);
  ASSERT_EQ(pairs.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(pairs[i].a, items[i].id);
    EXPECT_NE(pairs[i].a, pairs[i].b);
  }
}

TEST(AnnotationPairs, TwoItemsPairEachOther) {
  const auto pairs = generate_annotation_pairs(items_with({1, 2}), 1, 0);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0], (UnlabeledPair{"I0", "I1"}));
  EXPECT_EQ(pairs[1], (UnlabeledPair{"I1", "I0"}));
}

TEST(AnnotationPairs, PartnerPoolExhaustion) {
  const auto items = items_with({1, 2, 3, 4, 5});
  const auto pairs = generate_annotation_pairs(items, 10, 0);
  ASSERT_EQ(pairs.size(), 20u);
  for (std::size_t i = 0; i < 5; ++i) {
    std::set<std::string> partners;
    for (std::size_t j = 0; j < 4; ++j) partners.insert(pairs[i * 4 + j].b);
    EXPECT_EQ(partners.size(), 4u);
    EXPECT_FALSE(partners.count(items[i].id));
  }
}

TEST(PairsIo, JsonLinesRoundTrip) {
  const std::vector<ComparativePair> pairs{{"a", "b", 1}, {"b", "c", -1}};
  const auto text = serialize_pairs(pairs);
  EXPECT_EQ(text, "{\"a\":\"a\",\"b\":\"b\",\"y\":1}\n{\"a\":\"b\",\"b\":\"c\",\"y\":-1}\n");
  EXPECT_EQ(parse_pairs(text), pairs);
  const std::vector<UnlabeledPair> unlabeled{{"a", "b"}};
  EXPECT_EQ(parse_annotation_pairs(serialize_annotation_pairs(unlabeled)), unlabeled);
  EXPECT_THROW(parse_pairs("{\"a\":\"x\",\"b\":\"y\",\"y\":0}\n"), Error);
  EXPECT_THROW(parse_pairs("{\"a\":\"x\",\"b\":\"x\",\"y\":1}\n"), Error);

  const auto path = std::filesystem::temp_directory_path() / "spe_pairs_test.jsonl";
  save_pairs(pairs, path);
  EXPECT_EQ(load_pairs(path), pairs);
  std::filesystem::remove(path);
}
