#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "factsteer/bench/builder.hpp"
#include "support/brute_force.hpp"
#include "support/synthetic.hpp"

using namespace factsteer;
using namespace factsteer::bench;
using factsteer::retrieval::FlatIndex;

namespace {

Vector random_vec(std::mt19937& rng, int d) {
  std::normal_distribution<double> g;
  Vector v(static_cast<std::size_t>(d));
  for (double& x : v) x = g(rng);
  return v;
}

FlatIndex random_index(std::mt19937& rng, int n, int d) {
  FlatIndex idx;
  for (int i = 0; i < n; ++i) idx.add("f" + std::to_string(100 + i), random_vec(rng, d));
  return idx;
}

}  // namespace

TEST(RetrieveTopk, SmallIndexReturnsEverythingFlagged) {
  FlatIndex idx;
  idx.add("a", {1, 0});
  idx.add("b", {0, 1});
  idx.add("c", {1, 1});
  const auto r = retrieval::retrieve_topk(Vector{1, 0}, idx, 10);
  EXPECT_TRUE(r.truncated);
  ASSERT_EQ(r.hits.size(), 3u);
  EXPECT_EQ(r.hits[0].id, "a");
  EXPECT_NEAR(r.hits[0].cosine, 1.0, 1e-15);
  EXPECT_FALSE(retrieval::retrieve_topk(Vector{1, 0}, idx, 2).truncated);
}

TEST(RetrieveTopk, TiesByAscendingId) {
  FlatIndex idx;
  idx.add("z", {1, 0});
  idx.add("a", {2, 0});
  const auto r = retrieval::retrieve_topk(Vector{1, 0}, idx, 2);
  EXPECT_EQ(r.hits[0].id, "a");
  EXPECT_THROW(retrieval::retrieve_topk(Vector{1, 0}, FlatIndex{}, 1), InvalidArgument);
}

TEST(RetrieveTopk, MatchesFullScanOracle) {
  std::mt19937 rng(5);
  const auto idx = random_index(rng, 50, 8);
  for (int q = 0; q < 200; ++q) {
    const auto query = random_vec(rng, 8);
    const auto got = retrieval::retrieve_topk(query, idx, 10).hits;
    const auto want = brute::topk(query, idx, 10);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].id, want[i].id);
      EXPECT_NEAR(got[i].cosine, want[i].cosine, 1e-12);
    }
  }
}

TEST(HybridRerank, SingleSessionArithmetic) {
  FlatIndex idx;
  idx.add("c", {0.8, 0.6});
  const auto r = hybrid_rerank({Vector{1, 0}}, idx, 10, 100);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_DOUBLE_EQ(r[0].s_freq, 1.0);
  EXPECT_NEAR(r[0].s_sim, 0.8, 1e-12);
  EXPECT_NEAR(r[0].hybrid, 0.9, 1e-12);
}

TEST(HybridRerank, TwoOfFourSessions) {
  FlatIndex idx;
  idx.add("c", {1, 0});
  idx.add("d", {0, 1});
  // k = 1: sessions 0 and 1 retrieve c, sessions 2 and 3 retrieve d.
  const std::vector<Vector> sessions{{0.6, 0.5}, {0.5, 0.4}, {0.1, 1}, {0.2, 1}};
  const auto r = hybrid_rerank(sessions, idx, 1, 100);
  const auto it = std::find_if(r.begin(), r.end(), [](const auto& c) { return c.fact_qa_id == "c"; });
  ASSERT_NE(it, r.end());
  EXPECT_DOUBLE_EQ(it->s_freq, 0.5);
  const double cos_c = std::max(0.6 / std::sqrt(0.61), 0.5 / std::sqrt(0.41));
  EXPECT_NEAR(it->s_sim, cos_c, 1e-12);
  EXPECT_NEAR(it->hybrid, (0.5 + cos_c) / 2, 1e-12);
}

TEST(HybridRerank, MatchesBruteForceOnFiveUsersThreeSessions) {
  std::mt19937 rng(9);
  const auto idx = random_index(rng, 40, 6);
  for (int user = 0; user < 5; ++user) {
    std::vector<Vector> sessions;
    for (int s = 0; s < 3; ++s) sessions.push_back(random_vec(rng, 6));
    const auto got = hybrid_rerank(sessions, idx, 10, 100);

    const auto want = brute::rerank(sessions, idx, 10);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].fact_qa_id, want[i].fact_qa_id);
      EXPECT_NEAR(got[i].hybrid, want[i].hybrid, 1e-12);
    }
  }
}

TEST(HybridRerank, InvariantsDedupBoundsAndSessionOrder) {
  std::mt19937 rng(2);
  const auto idx = random_index(rng, 30, 5);
  std::vector<Vector> sessions;
  for (int s = 0; s < 6; ++s) sessions.push_back(random_vec(rng, 5));
  const auto a = hybrid_rerank(sessions, idx, 10, 100);
  std::set<std::string> ids;
  for (const auto& c : a) {
    EXPECT_TRUE(ids.insert(c.fact_qa_id).second);
    EXPECT_GE(c.hybrid, -0.5);
    EXPECT_LE(c.hybrid, 1.0);
    EXPECT_DOUBLE_EQ(c.hybrid, (c.s_freq + c.s_sim) / 2);
  }
  std::reverse(sessions.begin(), sessions.end());
  const auto b = hybrid_rerank(sessions, idx, 10, 100);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].fact_qa_id, b[i].fact_qa_id);
    EXPECT_EQ(a[i].s_freq, b[i].s_freq);
    EXPECT_EQ(a[i].s_sim, b[i].s_sim);
  }
  EXPECT_LE(hybrid_rerank(sessions, idx, 10, 3).size(), 3u);
  EXPECT_THROW(hybrid_rerank({}, idx), InvalidArgument);
}

TEST(AssembleAndSplit, FourUsersTwoTwoDisjointDeterministic) {
  const auto users = synth::users(4);
  const auto facts = synth::facts(4);
  retrieval::HashingEmbedder emb(64, 0);
  const auto a = build_benchmark(users, facts, emb, {10, 100, 42, 1});
  const auto b = build_benchmark(users, facts, emb, {10, 100, 42, 1});
  EXPECT_EQ(a.split.train.size(), 2u);
  EXPECT_EQ(a.split.test.size(), 2u);
  std::set<std::string> train_users;
  for (const auto& r : a.split.train) train_users.insert(r.user_id);
  for (const auto& r : a.split.test) EXPECT_FALSE(train_users.count(r.user_id));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(nlohmann::json(a.split.train[i]), nlohmann::json(b.split.train[i]));
    EXPECT_EQ(a.split.train[i].factual_qa.kind, QaKind::factual);
    EXPECT_EQ(a.split.train[i].personalized_qa.kind, QaKind::personalized);
  }
}

TEST(AssembleAndSplit, EmptyPoolUserExcluded) {
  const auto users = synth::users(3);
  std::map<std::string, std::vector<CandidateScore>> ranked;
  std::map<std::string, QAInstance> facts;
  facts["f"] = {"f", "", QaKind::factual, "q", "a"};
  ranked[users[0].user_id] = {{"f", 1, 1, 1, {}}};
  ranked[users[1].user_id] = {};
  ranked[users[2].user_id] = {{"f", 1, 1, 1, {}}};  // already used by users[0]
  const auto r = assemble_and_split(users, ranked, facts, 1);
  EXPECT_EQ(r.train.size() + r.test.size(), 1u);
  EXPECT_EQ(r.excluded_users.size(), 2u);
}

TEST(BuildBenchmark, FiveHundredUsersGiveTableThreeShape) {
  const auto users = synth::users(500);
  const auto facts = synth::facts(500);
  retrieval::HashingEmbedder emb(256, 0);  // fewer bucket collisions across 500 topics
  const auto b = build_benchmark(users, facts, emb, {10, 100, 7, 4});
  EXPECT_EQ(b.split.train.size(), 250u);
  EXPECT_EQ(b.split.test.size(), 250u);
  EXPECT_EQ(b.manifest["qa_instances"].get<int>(), 1000);
  EXPECT_TRUE(b.split.excluded_users.empty());
}
