#include <gtest/gtest.h>

#include <sstream>

#include "commentguard/corpus.hpp"
#include "commentguard/rng.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace commentguard;
using namespace commentguard::corpus;
using testing_support::make_item;

namespace {

std::array<std::size_t, 4> hist(std::size_t o, std::size_t p, std::size_t c, std::size_t s) { return {o, p, c, s}; }

std::string record(const std::string& id, int label, const std::string& split, std::size_t comments) {
  nlohmann::ordered_json r{{"id", id}, {"text", "news " + id}, {"label", label}, {"split", split}};
  r["comments"] = nlohmann::json::array();
  for (std::size_t k = 0; k < comments; ++k) {
    r["comments"].push_back({{"text", "comment " + std::to_string(k)}, {"category", "original"}});
  }
  return r.dump();
}

DatasetSplit parse(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Dataset, RoundTripsThroughTheLineFormat) {
  DatasetSplit data;
  data.train = {make_item("a", 1, 3, 1, 1, 1), make_item("b", 0, 2, 0, 0, 0)};
  data.validation = {make_item("c", 0, 4, 2, 2, 2)};
  data.test = {make_item("d", 1, 3, 1, 1, 1)};
  std::ostringstream out;
  write_dataset(data, out);
  EXPECT_EQ(parse(out.str()), data);
}

TEST(Dataset, EmptyFileHasNoRecords) {
  EXPECT_NE(error_of("").find("no records"), std::string::npos);
  EXPECT_NE(error_of("\n\n").find("no records"), std::string::npos);
}

TEST(Dataset, RejectsLabelOutsideZeroOne) {
  const auto msg = error_of(record("x", 2, "train", 1));
  EXPECT_NE(msg.find("invalid label"), std::string::npos);
  EXPECT_NE(msg.find("line 1"), std::string::npos);
}

TEST(Dataset, ReportsLineOfMalformedRecord) {
  const auto text = record("a", 0, "train", 1) + "\n" + record("b", 1, "test", 1) + "\n{not json\n";
  EXPECT_NE(error_of(text).find("line 3"), std::string::npos);
}

TEST(Dataset, RejectsDuplicateIds) {
  const auto text = record("a", 0, "train", 1) + "\n" + record("a", 1, "test", 1) + "\n";
  const auto msg = error_of(text);
  EXPECT_NE(msg.find("duplicate id"), std::string::npos);
  EXPECT_NE(msg.find("line 2"), std::string::npos);
}

TEST(Dataset, RejectsUnknownSplitAndCategory) {
  EXPECT_NE(error_of(record("a", 0, "holdout", 1)).find("unknown split"), std::string::npos);
  const std::string bad =
      R"({"id":"a","text":"t","label":0,"split":"train","comments":[{"text":"c","category":"sarcasm"}]})";
  EXPECT_NE(error_of(bad).find("unknown comment category"), std::string::npos);
}

TEST(Dataset, RejectsBlankComments) {
  const std::string bad =
      R"({"id":"a","text":"t","label":0,"split":"train","comments":[{"text":"   ","category":"original"}]})";
  EXPECT_NE(error_of(bad).find("empty comment"), std::string::npos);
}

TEST(Dataset, MissingFileIsAnError) {
  EXPECT_THROW(load_dataset("/nonexistent/commentguard.jsonl"), DataError);
}

// Weibo-16 shaped file: training items carry 12 comments, validation and
// test items 6, as in the usual statistics table for that corpus.
TEST(Dataset, StatisticsReproduceWeibo16Counts) {
  std::ostringstream file;
  std::size_t n = 0;
  auto emit = [&](const std::string& split, int label, std::size_t items, std::size_t per_item) {
    for (std::size_t i = 0; i < items; ++i) file << record("w" + std::to_string(n++), label, split, per_item) << '\n';
  };
  emit("train", 1, 369, 12);
  emit("train", 0, 676, 12);
  emit("validation", 1, 154, 6);
  emit("validation", 0, 316, 6);
  emit("test", 1, 70, 6);
  emit("test", 0, 112, 6);

  const auto stats = statistics(parse(file.str()));
  EXPECT_EQ(stats.train.fake_items, 369u);
  EXPECT_EQ(stats.train.fake_comments, 4428u);
  EXPECT_EQ(stats.train.real_items, 676u);
  EXPECT_EQ(stats.train.real_comments, 8112u);
  EXPECT_EQ(stats.train.items(), 1045u);
  EXPECT_EQ(stats.train.comments(), 12540u);
  EXPECT_EQ(stats.validation.items(), 470u);
  EXPECT_EQ(stats.validation.comments(), 2820u);
  EXPECT_EQ(stats.test.items(), 182u);
  EXPECT_EQ(stats.test.comments(), 1092u);
  EXPECT_EQ(stats.total().fake_items, 593u);
  EXPECT_EQ(stats.total().fake_comments, 5772u);
  EXPECT_EQ(stats.total().real_items, 1104u);
  EXPECT_EQ(stats.total().real_comments, 10680u);
  EXPECT_EQ(stats.total().items(), 1697u);
  EXPECT_EQ(stats.total().comments(), 16452u);

  const auto table = format_statistics(stats);
  EXPECT_NE(table.find("1045"), std::string::npos);
  EXPECT_NE(table.find("12540"), std::string::npos);
}

TEST(ValidationBundle, OriginalsThenAttackComments) {
  const auto item = make_item("v", 1, 5, 4, 4, 4);
  const auto b = build_validation_bundle(item, CommentCategory::Perception, 6, 1);
  ASSERT_EQ(b.size(), 6u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(b.ordered_comments[i], item.of_category(CommentCategory::Original)[i]);
  }
  for (std::size_t i = 3; i < 6; ++i) EXPECT_EQ(b.ordered_comments[i].category, CommentCategory::Perception);
  EXPECT_EQ(b.histogram(), hist(3, 3, 0, 0));
}

TEST(ValidationBundle, MEqualsThreeHasNoAttackSlots) {
  const auto item = make_item("v", 0, 3, 1, 1, 1);
  EXPECT_EQ(build_validation_bundle(item, CommentCategory::SocioEmotional, 3, 9).histogram(), hist(3, 0, 0, 0));
}

TEST(ValidationBundle, InsufficientCommentsAreRejected) {
  const auto item = make_item("v", 0, 3, 2, 2, 2);
  EXPECT_THROW(build_validation_bundle(item, CommentCategory::Cognition, 6, 0), PreconditionError);
  EXPECT_THROW(build_validation_bundle(make_item("w", 0, 2, 5, 5, 5), CommentCategory::Cognition, 5, 0),
               PreconditionError);
  EXPECT_THROW(build_validation_bundle(item, CommentCategory::Original, 4, 0), PreconditionError);
}

TEST(ValidationBundle, AttackSubsetKeepsStoredOrder) {
  const auto item = make_item("v", 0, 3, 8, 1, 1);
  const auto pool = item.of_category(CommentCategory::Perception);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto b = build_validation_bundle(item, CommentCategory::Perception, 7, seed);
    std::size_t last = 0;
    for (std::size_t i = 3; i < b.size(); ++i) {
      const auto pos = static_cast<std::size_t>(
          std::find(pool.begin(), pool.end(), b.ordered_comments[i]) - pool.begin());
      ASSERT_LT(pos, pool.size());
      if (i > 3) EXPECT_GT(pos, last);
      last = pos;
    }
  }
}

TEST(TestBundle, MFourIsCanonicalOrder) {
  const auto item = make_item("t", 1, 3, 3, 3, 3);
  const auto b = build_test_bundle(item, 4, 5);
  ASSERT_EQ(b.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(b.ordered_comments[i].category, kAllCategories[i]);
}

TEST(TestBundle, SeededTailIsReproducible) {
  const auto item = make_item("t", 1, 3, 3, 3, 3);
  const auto a = build_test_bundle(item, 8, 42);
  const auto b = build_test_bundle(item, 8, 42);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.ordered_comments[i].category, kAllCategories[i]);
  bool differs = false;
  for (std::uint64_t s = 0; s < 10 && !differs; ++s) differs = build_test_bundle(item, 8, s) != a;
  EXPECT_TRUE(differs);
}

TEST(TestBundle, MissingCategoryIsRejected) {
  EXPECT_THROW(build_test_bundle(make_item("t", 0, 3, 1, 1, 0), 4, 0), PreconditionError);
  EXPECT_THROW(build_test_bundle(make_item("t", 0, 3, 1, 1, 1), 3, 0), PreconditionError);
}

TEST(TrainingBundle, WorkedCompositions) {
  const auto item = make_item("r", 0, 6, 3, 3, 3);
  AllocationPlan plan{{6, 4, 2}, 12, kBaseSlots};
  EXPECT_EQ(build_training_bundle(item, plan, 16, 3).histogram(), hist(1, 7, 5, 3));

  AllocationPlan none{{0, 0, 0}, 0, kBaseSlots};
  const auto base = build_training_bundle(item, none, 4, 3);
  ASSERT_EQ(base.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(base.ordered_comments[i].category, kAllCategories[i]);

  AllocationPlan one{{1, 0, 0}, 2, kBaseSlots};
  EXPECT_EQ(build_training_bundle(item, one, 6, 3).histogram(), hist(2, 2, 1, 1));
}

TEST(TrainingBundle, AbsentCategoriesFallBackToOriginal) {
  const auto item = make_item("r", 0, 4, 0, 2, 0);
  AllocationPlan plan{{2, 1, 1}, 4, kBaseSlots};
  EXPECT_EQ(build_training_bundle(item, plan, 8, 0).histogram(), hist(6, 0, 2, 0));
}

TEST(TrainingBundle, RejectsOverfullPlansAndSmallM) {
  const auto item = make_item("r", 0, 4, 2, 2, 2);
  EXPECT_THROW(build_training_bundle(item, AllocationPlan{{3, 0, 0}, 2, kBaseSlots}, 6, 0), PreconditionError);
  EXPECT_THROW(build_training_bundle(item, AllocationPlan{}, 3, 0), PreconditionError);
}

TEST(TrainingBundle, SamplesWithoutReplacementWhenPoolSuffices) {
  const auto item = make_item("r", 0, 12, 5, 5, 5);
  const auto b = build_training_bundle(item, AllocationPlan{{4, 0, 0}, 4, kBaseSlots}, 8, 11);
  std::vector<std::string> perception;
  for (const auto& c : b.ordered_comments) {
    if (c.category == CommentCategory::Perception) perception.push_back(c.text);
  }
  ASSERT_EQ(perception.size(), 5u);
  std::sort(perception.begin(), perception.end());
  EXPECT_EQ(std::unique(perception.begin(), perception.end()), perception.end());
}

TEST(CleanBundle, CyclesOriginalsInStoredOrder) {
  const auto item = make_item("k", 0, 3, 2, 2, 2);
  const auto b = build_clean_bundle(item, 7);
  const auto o = item.of_category(CommentCategory::Original);
  ASSERT_EQ(b.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(b.ordered_comments[i], o[i % 3]);
}

TEST(AttackBundle, ReplacesTrailingSlots) {
  const auto item = make_item("k", 0, 8, 3, 3, 3);
  const auto clean = build_clean_bundle(item, 8);
  EXPECT_EQ(build_attack_bundle(item, CommentCategory::Cognition, 0, 8, 1), clean);
  const auto b = build_attack_bundle(item, CommentCategory::Cognition, 3, 8, 1);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(b.ordered_comments[i], clean.ordered_comments[i]);
  for (std::size_t i = 5; i < 8; ++i) EXPECT_EQ(b.ordered_comments[i].category, CommentCategory::Cognition);
}

// Every builder returns exactly M comments and is a pure function of its
// arguments.
TEST(BundleProperties, LengthAndPurity) {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t M = 4 + rng.index(20);
    const auto item = make_item("p" + std::to_string(trial), static_cast<int>(rng.index(2)), 3 + rng.index(5),
                                M + rng.index(3), 1 + rng.index(M), M + rng.index(2));
    const auto seed = rng.next();
    const auto plan = uniform_plan(M);

    const auto v = build_validation_bundle(item, CommentCategory::Perception, M, seed);
    const auto t = build_test_bundle(item, M, seed);
    const auto r = build_training_bundle(item, plan, M, seed);
    const auto c = build_clean_bundle(item, M);
    const auto a = build_attack_bundle(item, CommentCategory::SocioEmotional, rng.index(M + 1), M, seed);
    for (const auto* b : {&v, &t, &r, &c, &a}) EXPECT_EQ(b->size(), M);
    EXPECT_EQ(v.histogram()[0], 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(v.ordered_comments[i].category, CommentCategory::Original);

    EXPECT_EQ(v, build_validation_bundle(item, CommentCategory::Perception, M, seed));
    EXPECT_EQ(t, build_test_bundle(item, M, seed));
    EXPECT_EQ(r, build_training_bundle(item, plan, M, seed));
  }
}

TEST(Plan, UniformInitialPlan) {
  EXPECT_EQ(uniform_plan(8).quota, (AttackArray<std::size_t>{1, 1, 1}));
  EXPECT_EQ(uniform_plan(8).budget, 4u);
  EXPECT_EQ(uniform_plan(16).quota, (AttackArray<std::size_t>{4, 4, 4}));
  EXPECT_EQ(uniform_plan(4).quota, (AttackArray<std::size_t>{0, 0, 0}));
  EXPECT_THROW(uniform_plan(3), PreconditionError);
}

TEST(Categories, ParseAndPrint) {
  for (auto c : kAllCategories) EXPECT_EQ(parse_category(to_string(c)), c);
  EXPECT_FALSE(parse_category("rumor").has_value());
  EXPECT_THROW(attack_index(CommentCategory::Original), std::invalid_argument);
}
