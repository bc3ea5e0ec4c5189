#include <gtest/gtest.h>

#include <random>

#include "factsteer/locator/shift_locator.hpp"
#include "support/fixed_backend.hpp"
#include "support/planted.hpp"
#include "support/brute_force.hpp"

using namespace factsteer;
using namespace factsteer::locator;

namespace {

LayerScanReport report(const std::string& name, const std::vector<double>& deltas) {
  LayerScanReport r;
  r.group = name;
  r.n_examples = 1;
  for (std::size_t l = 0; l < deltas.size(); ++l) r.per_layer.push_back({int(l), 1.0, 1.0, deltas[l]});
  return r;
}

}  // namespace

TEST(Ppl, TwoWayCoinIsTwo) {
  fixed::Backend b(2, 2, [](const std::vector<int>&, int) { return Vector{0.0, 0.0}; });
  for (int l = 0; l <= 2; ++l) EXPECT_DOUBLE_EQ(answer_token_ppl({{1}, {}}, {{0, 1, 1}, {}}, l, b), 2.0);
}

TEST(Ppl, CertainAnswerIsOne) {
  fixed::Backend b(1, 3, [](const std::vector<int>&, int) { return Vector{-1e4, 0.0, -1e4}; });
  EXPECT_EQ(answer_token_ppl({{2}, {}}, {{1, 1}, {}}, 1, b), 1.0);
}

TEST(Ppl, UniformEqualsVocabularySize) {
  for (int v : {2, 7, 64, 1000}) {
    fixed::Backend b(1, v, [v](const std::vector<int>&, int) { return Vector(std::size_t(v), 3.25); });
    EXPECT_EQ(answer_token_ppl({{1}, {}}, {{0, 1}, {}}, 1, b), double(v));
  }
}

TEST(Ppl, MatchesBruteForceSoftmax) {
  const model::ToyTransformer m(model::ToyConfig{});
  std::mt19937 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> prompt(1 + rng() % 8), answer(1 + rng() % 4);
    for (int& t : prompt) t = 1 + rng() % 63;
    for (int& t : answer) t = rng() % 64;
    const int layer = rng() % 5;
    const double got = answer_token_ppl({prompt, {}}, {answer, {}}, layer, m);
    const double want = brute::answer_ppl(m, prompt, answer, layer);
    ASSERT_LT(std::fabs(got - want) / want, 1e-6) << trial;
  }
}

TEST(Ppl, RejectsEmptyInputsAndBadLayer) {
  const model::ToyTransformer m(model::ToyConfig{});
  EXPECT_THROW(answer_token_ppl({{1}, {}}, {{}, {}}, 1, m), InvalidArgument);
  EXPECT_THROW(answer_token_ppl({{}, {}}, {{1}, {}}, 1, m), InvalidArgument);
  EXPECT_THROW(answer_token_ppl({{1}, {}}, {{1}, {}}, 5, m), InvalidArgument);
}

TEST(Deviation, Examples) {
  EXPECT_DOUBLE_EQ(relative_deviation(10.0, 8.0), 0.2);
  EXPECT_DOUBLE_EQ(relative_deviation(10.0, 12.0), 0.2);
  EXPECT_EQ(relative_deviation(4.0, 4.0), 0.0);
  EXPECT_THROW(relative_deviation(0.0, 1.0), InvalidArgument);
}

TEST(Fusion, TieGoesToDeeperLayer) {
  // fd ranks 3 > 2 > 1 > 4, pb ranks 2 > 3 > 4 > 1: layers 3 and 2 both score 1.5.
  auto fd = report("fd", {9.0, 0.2, 0.3, 0.4, 0.1});
  auto pb = report("pb", {9.0, 0.1, 0.4, 0.3, 0.2});
  const auto f = fuse_rankings({rank_layers(fd), rank_layers(pb)});
  EXPECT_DOUBLE_EQ(f.scores.at(3), 1.5);
  EXPECT_DOUBLE_EQ(f.scores.at(2), 1.5);
  EXPECT_EQ(f.scores.count(0), 0u);
  EXPECT_EQ(fuse_and_select(fd, pb), 3);
  EXPECT_EQ(fd.selected_layer, 3);
  EXPECT_EQ(pb.fused_ranking, (std::vector<int>{3, 2, 4, 1}));
}

TEST(Fusion, EqualDeltasRankDeeperFirst) {
  EXPECT_EQ(rank_layers(report("x", {0.0, 0.5, 0.5, 0.5})), (std::vector<int>{3, 2, 1}));
}

TEST(Fusion, EmptyGroupIsNamed) {
  auto fd = report("factual_degraded", {0, 1});
  LayerScanReport pb;
  pb.group = "personalized_beneficial";
  try {
    fuse_and_select(fd, pb);
    FAIL();
  } catch (const EmptyGroupError& e) {
    EXPECT_NE(std::string(e.what()).find("personalized_beneficial"), std::string::npos);
  }
}

TEST(Scan, RecoversPlantedBlock) {
  for (int block = 1; block <= 4; ++block)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto b = planted::backend(seed, block);
      const auto r = scan_layers(planted::corpus(seed), b);
      EXPECT_EQ(r.selected_layer, block) << "seed " << seed;
    }
}

TEST(Scan, UnplantedBackendSeesOnlyContextEffects) {
  const model::ToyTransformer m(model::ToyConfig{});
  const auto corpus = planted::corpus(1);
  const auto r = scan_layers(corpus, m);
  EXPECT_NE(r.selected_layer, -1);
  EXPECT_EQ(r.factual_degraded.per_layer.size(), 5u);
  // Gold-answer PPL at each layer equals the direct computation.
  const auto& e = corpus.front();
  const double want = answer_token_ppl(m.encode(e.prompt_with), m.encode(e.qa.gold_answer), 2, m);
  double mean = 0;
  for (int i = 0; i < 6; ++i)
    mean += answer_token_ppl(m.encode(corpus[i].prompt_with), m.encode(corpus[i].qa.gold_answer), 2, m) / 6;
  EXPECT_GT(want, 0);
  EXPECT_NEAR(r.factual_degraded.per_layer[2].ppl_with, mean, 1e-9 * mean);
}

TEST(Scan, ParallelMatchesSerial) {
  const auto b = planted::backend(2);
  const auto c = planted::corpus(2);
  const auto a = scan_layers(c, b, AnswerSource::gold, 1);
  const auto p = scan_layers(c, b, AnswerSource::gold, 4);
  EXPECT_EQ(to_csv(a), to_csv(p));
}

TEST(Scan, MissingGroupFails) {
  auto c = planted::corpus(0);
  for (auto& e : c) e.label = EntanglementLabel::neutral;
  EXPECT_THROW(scan_layers(c, planted::backend(0)), EmptyGroupError);
}
