#include <gtest/gtest.h>

#include <random>

#include "factsteer/steer/steering.hpp"
#include "support/planted.hpp"

using namespace factsteer;
using namespace factsteer::steer;
using model::TokenSequence;
using model::ToyConfig;
using model::ToyTransformer;

namespace {

SteeringArtifact artifact(const model::Backend& b, Variant v, int layer, double tau = 0.5, double gamma = 3.0,
                          Vector s_f = {}) {
  const auto d = static_cast<std::size_t>(b.hidden_dim());
  SteeringArtifact a;
  a.config = {v, tau, gamma, layer};
  a.prober.weights.assign(d, 0.0);
  a.prober.feature_mean.assign(d, 0.0);
  a.prober.feature_std.assign(d, 1.0);
  a.prober.layer = layer;
  a.steering.s_f = s_f.empty() ? Vector(d, 0.0) : s_f;
  a.steering.m_fact = a.steering.m_pers = Vector(d, 0.0);
  a.steering.layer = layer;
  a.backend = b.fingerprint();
  return a;
}

std::vector<int> random_ids(std::mt19937& rng, int n) {
  std::vector<int> ids(n);
  for (int& t : ids) t = 1 + rng() % 63;
  return ids;
}

struct PromptPair {
  TokenSequence with, without;
};

// The without-history prompt is a suffix of the with-history prompt.
PromptPair random_pair(std::mt19937& rng) {
  PromptPair p;
  p.without.ids = random_ids(rng, 2 + rng() % 6);
  p.with.ids = random_ids(rng, 1 + rng() % 10);
  p.with.ids.insert(p.with.ids.end(), p.without.ids.begin(), p.without.ids.end());
  return p;
}

Vector random_vector(std::mt19937& rng, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(d);
  for (double& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST(Algebra, BetaVanishesAtOneHalf) {
  for (double g : {0.0, 0.1, 3.0}) EXPECT_EQ(soft_strength(0.5, g), 0.0);
  EXPECT_DOUBLE_EQ(soft_strength(1.0, 3.0), 1.5);
  EXPECT_DOUBLE_EQ(soft_strength(0.0, 3.0), -1.5);
}

TEST(Algebra, SoftBranchReflectsAboutOneHalf) {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector h = random_vector(rng, 16), s = random_vector(rng, 16);
    const double delta = (rng() % 1000) / 2000.0, gamma = (rng() % 300) / 100.0;
    const SteeringConfig cfg{Variant::S, 0.5, gamma, 2};
    const auto up = apply(cfg, h, 0.5 + delta, nullptr, &s);
    const auto down = apply(cfg, h, 0.5 - delta, nullptr, &s);
    for (int k = 0; k < 16; ++k) EXPECT_NEAR((up[k] + down[k]) / 2, h[k], 1e-6);
  }
}

TEST(Algebra, BranchSelection) {
  const Vector h{1.0, 2.0}, v{0.5, 0.5}, s{1.0, -1.0};
  const SteeringConfig H{Variant::H, 0.6, 2.0, 1}, M{Variant::M, 0.6, 2.0, 1};
  EXPECT_EQ(apply(H, h, 0.59, &v, &s), h);
  EXPECT_EQ(apply(H, h, 0.6, &v, &s), (Vector{0.5, 1.5}));
  EXPECT_EQ(apply(M, h, 0.6, &v, &s), (Vector{0.5, 1.5}));
  const auto soft = apply(M, h, 0.55, &v, &s);
  EXPECT_NEAR(soft[0], 1.1, 1e-15);
  EXPECT_NEAR(soft[1], 1.9, 1e-15);
  EXPECT_THROW(apply(H, h, 0.9, nullptr, &s), InvalidArgument);
  EXPECT_THROW(apply(M, h, 0.1, &v, nullptr), InvalidArgument);
}

TEST(Config, Validation) {
  EXPECT_THROW((SteeringConfig{Variant::H, 0.0, 1.0, 1}.validate()), InvalidArgument);
  EXPECT_THROW((SteeringConfig{Variant::H, 1.0, 1.0, 1}.validate()), InvalidArgument);
  EXPECT_THROW((SteeringConfig{Variant::H, 0.5, -1.0, 1}.validate()), InvalidArgument);
  EXPECT_NO_THROW((SteeringConfig{Variant::H, 0.5, 0.0, 1}.validate()));
  EXPECT_EQ(parse_variant("m"), Variant::M);
  EXPECT_THROW(parse_variant("X"), InvalidArgument);
}

TEST(Generate, HardRemovalAtTopLayerReproducesWithoutHistoryDecode) {
  const ToyTransformer m(ToyConfig{});
  const auto a = artifact(m, Variant::H, m.depth());
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_pair(rng);
    SteerOptions o;
    o.max_new_tokens = 24;
    o.risk_override = 1.0;
    const auto got = steered_generate(p.with, p.without, a, m, o);
    EXPECT_TRUE(got.hard_branch);
    EXPECT_EQ(got.tokens.ids, m.generate(p.without, std::nullopt, 24).ids) << trial;
  }
}

TEST(Generate, BelowThresholdAndZeroGammaLeaveDecodeUnchanged) {
  const ToyTransformer m(ToyConfig{});
  std::mt19937 rng(8);
  std::normal_distribution<double> g;
  Vector s(16);
  for (double& x : s) x = g(rng);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_pair(rng);
    const auto plain = m.generate(p.with, std::nullopt, 16).ids;
    SteerOptions o;
    o.max_new_tokens = 16;
    o.risk_override = 0.3;
    EXPECT_EQ(steered_generate(p.with, p.without, artifact(m, Variant::H, 2, 0.5), m, o).tokens.ids, plain);
    o.risk_override = 0.9;
    EXPECT_EQ(steered_generate(p.with, p.without, artifact(m, Variant::S, 2, 0.5, 0.0, s), m, o).tokens.ids,
              plain);
    o.risk_override = 0.5;
    EXPECT_EQ(steered_generate(p.with, p.without, artifact(m, Variant::S, 2, 0.5, 3.0, s), m, o).tokens.ids,
              plain);
  }
}

TEST(Generate, MixedVariantBoundaryTakesHardBranch) {
  const ToyTransformer m(ToyConfig{});
  std::mt19937 rng(9);
  Vector s(16);
  for (double& x : s) x = 40.0 * ((rng() % 2) ? 1.0 : -1.0);
  const double tau = 0.7;
  int soft_differs = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_pair(rng);
    SteerOptions o;
    o.max_new_tokens = 16;
    o.risk_override = tau;
    const auto at = steered_generate(p.with, p.without, artifact(m, Variant::M, 4, tau, 3.0, s), m, o);
    EXPECT_TRUE(at.hard_branch);
    EXPECT_EQ(at.tokens.ids, m.generate(p.without, std::nullopt, 16).ids);
    const auto hard = steered_generate(p.with, p.without, artifact(m, Variant::H, 4, tau, 3.0, s), m, o);
    EXPECT_EQ(at.tokens.ids, hard.tokens.ids);
    o.risk_override = std::nextafter(tau, 0.0);
    const auto below = steered_generate(p.with, p.without, artifact(m, Variant::M, 4, tau, 3.0, s), m, o);
    EXPECT_FALSE(below.hard_branch);
    const auto soft = steered_generate(p.with, p.without, artifact(m, Variant::S, 4, tau, 3.0, s), m, o);
    EXPECT_EQ(below.tokens.ids, soft.tokens.ids);
    soft_differs += below.tokens.ids != at.tokens.ids;
  }
  EXPECT_GT(soft_differs, 0);
}

TEST(Generate, GateIsMonotoneInProbability) {
  const ToyTransformer m(ToyConfig{});
  std::mt19937 rng(10);
  const auto p = random_pair(rng);
  bool seen_hard = false;
  for (int i = 0; i <= 20; ++i) {
    SteerOptions o;
    o.max_new_tokens = 2;
    o.risk_override = i / 20.0;
    const auto r = steered_generate(p.with, p.without, artifact(m, Variant::H, 3, 0.45), m, o);
    if (seen_hard) {
      EXPECT_TRUE(r.hard_branch);
    }
    seen_hard = seen_hard || r.hard_branch;
    EXPECT_EQ(r.hard_branch, o.risk_override >= 0.45);
  }
}

TEST(Generate, ProberScoresFinalPromptState) {
  const ToyTransformer m(ToyConfig{});
  std::mt19937 rng(11);
  const auto p = random_pair(rng);
  auto a = artifact(m, Variant::H, 2, 0.5);
  a.prober.weights = random_vector(rng, 16);
  a.prober.bias = 0.3;
  const auto fwd = m.forward_with_states(p.with);
  const double want = probe::predict(a.prober, fwd.states.state(2, int(p.with.ids.size()) - 1).values);
  SteerOptions o;
  o.max_new_tokens = 3;
  EXPECT_DOUBLE_EQ(steered_generate(p.with, p.without, a, m, o).risk, want);
}

TEST(Generate, FrozenOffsetStillStartsFromWithoutDecode) {
  const ToyTransformer m(ToyConfig{});
  std::mt19937 rng(12);
  const auto p = random_pair(rng);
  SteerOptions o;
  o.max_new_tokens = 5;
  o.freeze_v_u = true;
  o.risk_override = 1.0;
  const auto r = steered_generate(p.with, p.without, artifact(m, Variant::H, 4), m, o);
  ASSERT_FALSE(r.tokens.ids.empty());
  EXPECT_EQ(r.tokens.ids[0], m.generate(p.without, std::nullopt, 1).ids[0]);
}

TEST(Offset, RecoversPlantedShiftAgainstUnplantedTwin) {
  for (int layer = 1; layer <= 4; ++layer) {
    ToyConfig plain;
    ToyConfig shifted;
    Vector delta(16, 0.0);
    delta[0] = 2.5;
    shifted.planted = model::PlantedShift{layer, delta, -1};
    const ToyTransformer a(shifted), b(plain);
    std::mt19937 rng(layer);
    const TokenSequence prompt{random_ids(rng, 6), {}};
    const auto prefix = random_ids(rng, 3);
    const auto v = compute_v_u(prompt, prompt, prefix, a, b, layer);
    for (int k = 0; k < 16; ++k) EXPECT_NEAR(v[k], delta[k], 1e-12);
    const auto other = compute_v_u(prompt, prompt, prefix, a, b, layer == 4 ? 3 : layer + 1);
    for (int k = 0; k < 16; ++k) EXPECT_NEAR(other[k], 0.0, 1e-12);
  }
}

TEST(Offset, ZeroForIdenticalPrompts) {
  const ToyTransformer m(ToyConfig{});
  const TokenSequence p{{4, 5, 6}, {}};
  EXPECT_EQ(compute_v_u(p, p, std::vector<int>{7}, m, 2), Vector(16, 0.0));
}

TEST(Vector, MatchesBruteForceMeans) {
  const auto b = planted::backend(3);
  auto corpus = planted::corpus(3, 4);
  std::mt19937 rng(3);
  for (auto& e : corpus) {
    e.answer_with_ids = random_ids(rng, 1 + rng() % 3);
    e.answer_without_ids = random_ids(rng, 1 + rng() % 3);
  }
  corpus[1].verdict_without = false;  // factual, wrong without history: excluded from m_fact
  corpus[5].verdict_with = std::nullopt;  // unjudged: excluded from m_pers
  const int layer = 2;
  const auto sv = build_steering_vector(corpus, b, layer);
  Vector fact(16, 0.0), pers(16, 0.0);
  int nf = 0, np = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& e = corpus[i];
    const bool use_fact = e.qa.kind == QaKind::factual && i != 1;
    const bool use_pers = e.qa.kind == QaKind::personalized && i != 5;
    if (!use_fact && !use_pers) continue;
    auto ids = b.encode(use_fact ? e.prompt_without : e.prompt_with).ids;
    const auto& resp = use_fact ? e.answer_without_ids : e.answer_with_ids;
    const int start = int(ids.size());
    ids.insert(ids.end(), resp.begin(), resp.end());
    const auto fwd = b.forward_with_states({ids, {}});
    for (int pos = start; pos < int(ids.size()); ++pos) {
      const auto s = fwd.states.at(layer, pos);
      for (int k = 0; k < 16; ++k) (use_fact ? fact : pers)[k] += s[k];
      (use_fact ? nf : np)++;
    }
  }
  EXPECT_EQ(sv.n_fact, std::size_t(nf));
  EXPECT_EQ(sv.n_pers, std::size_t(np));
  for (int k = 0; k < 16; ++k) EXPECT_NEAR(sv.s_f[k], fact[k] / nf - pers[k] / np, 1e-12);
}

TEST(Vector, EmptyGroupsAreNamed) {
  const auto b = planted::backend(3);
  auto corpus = planted::corpus(3, 2);
  for (auto& e : corpus) e.answer_with_ids = e.answer_without_ids = {5};
  auto no_fact = corpus;
  for (auto& e : no_fact)
    if (e.qa.kind == QaKind::factual) e.verdict_without = false;
  try {
    build_steering_vector(no_fact, b, 2);
    FAIL();
  } catch (const EmptyGroupError& e) {
    EXPECT_NE(std::string(e.what()).find("m_fact"), std::string::npos);
  }
  auto no_pers = corpus;
  for (auto& e : no_pers) e.label = EntanglementLabel::neutral;
  EXPECT_THROW(build_steering_vector(no_pers, b, 2), EmptyGroupError);
}

TEST(Artifact, RoundTripAndMismatch) {
  const ToyTransformer m(ToyConfig{});
  const auto a = artifact(m, Variant::M, 3, 0.6, 1.2);
  const auto r = nlohmann::json(a).get<SteeringArtifact>();
  EXPECT_EQ(r.config.variant, Variant::M);
  EXPECT_EQ(r.config.tau, 0.6);
  EXPECT_EQ(r.backend, a.backend);
  EXPECT_NO_THROW(check_compatible(r, m));

  ToyConfig deeper;
  deeper.depth = 5;
  EXPECT_THROW(check_compatible(a, ToyTransformer(deeper)), ArtifactMismatch);
  ToyConfig reseeded;
  reseeded.seed = 8;
  EXPECT_THROW(check_compatible(a, ToyTransformer(reseeded)), ArtifactMismatch);
  auto old = nlohmann::json(a);
  old["version"] = 0;
  EXPECT_THROW(old.get<SteeringArtifact>(), ArtifactMismatch);
}
