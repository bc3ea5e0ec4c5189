#include <gtest/gtest.h>

#include <random>

#include "factsteer/probe/prober.hpp"
#include "support/brute_force.hpp"
#include "support/planted.hpp"

using namespace factsteer;
using namespace factsteer::probe;

namespace {

using Data = brute::Labeled;
using brute::clusters;

double accuracy(const ProberModel& m, const Data& data) {
  int ok = 0;
  for (std::size_t i = 0; i < data.x.size(); ++i) ok += (predict(m, data.x[i]) > 0.5) == (data.y[i] == 1);
  return double(ok) / data.x.size();
}

}  // namespace

TEST(Sigmoid, ValuesAndEdges) {
  EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_GT(sigmoid(-745.0), 0.0);
  EXPECT_GT(sigmoid(-1e6), 0.0);
  EXPECT_LT(sigmoid(1e6), 1.0);
  EXPECT_TRUE(std::isfinite(softplus(1e6)));
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
}

TEST(Loss, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + trial % 5, n = 5 + trial;
    const auto data = clusters(trial, n, d, 2.0);
    Vector w(d);
    for (double& v : w) v = g(rng);
    const double b = g(rng), l2 = 0.1 * (trial % 3);
    const auto lg = loss_and_grad(w, b, data.x, data.y, l2);
    const double h = 1e-6;
    auto check = [&](double analytic, double numeric) {
      const double scale = std::max({std::fabs(analytic), std::fabs(numeric), 1e-3});
      EXPECT_LT(std::fabs(analytic - numeric) / scale, 1e-5) << trial;
    };
    for (int k = 0; k < d; ++k) {
      Vector wp = w, wm = w;
      wp[k] += h;
      wm[k] -= h;
      check(lg.grad_w[k], (loss_and_grad(wp, b, data.x, data.y, l2).loss -
                           loss_and_grad(wm, b, data.x, data.y, l2).loss) / (2 * h));
    }
    check(lg.grad_b,
          (loss_and_grad(w, b + h, data.x, data.y, l2).loss - loss_and_grad(w, b - h, data.x, data.y, l2).loss) /
              (2 * h));
  }
}

TEST(Train, SeparatesSixSigmaClusters) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto data = clusters(s, 200, 16, 6.0);
    const auto m = train(data.x, data.y);
    EXPECT_GE(accuracy(m, data), 0.95);
    EXPECT_TRUE(m.meta.converged);
    EXPECT_EQ(m.meta.n_pos, 100u);
  }
}

TEST(Train, LabelFlipMirrorsProbabilities) {
  auto data = clusters(3, 60, 8, 2.0);
  const auto m = train(data.x, data.y);
  for (int& y : data.y) y = 1 - y;
  const auto f = train(data.x, data.y);
  for (const auto& x : data.x) EXPECT_NEAR(predict(f, x), 1.0 - predict(m, x), 1e-6);
}

TEST(Train, DuplicatedDataGivesSameModel) {
  auto data = clusters(4, 40, 6, 3.0);
  const auto m = train(data.x, data.y);
  auto twice = data;
  twice.x.insert(twice.x.end(), data.x.begin(), data.x.end());
  twice.y.insert(twice.y.end(), data.y.begin(), data.y.end());
  const auto t = train(twice.x, twice.y);
  for (std::size_t k = 0; k < m.weights.size(); ++k) EXPECT_NEAR(m.weights[k], t.weights[k], 1e-8);
  EXPECT_NEAR(m.bias, t.bias, 1e-8);
}

TEST(Train, InvariantToPerDimensionAffineRescaling) {
  auto data = clusters(5, 50, 5, 2.5);
  const auto m = train(data.x, data.y);
  auto scaled = data;
  for (auto& x : scaled.x)
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = x[k] * (k + 1) * 10.0 - 3.0 * k;
  const auto s = train(scaled.x, scaled.y);
  for (std::size_t i = 0; i < data.x.size(); ++i)
    EXPECT_NEAR(predict(m, data.x[i]), predict(s, scaled.x[i]), 1e-8);
}

TEST(Train, LossIsMonotone) {
  const auto data = clusters(6, 80, 10, 1.0);
  std::vector<double> trace;
  TrainOptions opts;
  opts.loss_trace = &trace;
  train(data.x, data.y, opts);
  ASSERT_GT(trace.size(), 2u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1]);
}

TEST(Train, ConstantDimensionAndSeedAreHarmless) {
  auto data = clusters(7, 30, 4, 3.0);
  for (auto& x : data.x) x[2] = 5.0;
  TrainOptions a, b;
  b.seed = 99;
  const auto ma = train(data.x, data.y, a);
  const auto mb = train(data.x, data.y, b);
  EXPECT_EQ(ma.feature_std[2], 1.0);
  EXPECT_EQ(ma.weights, mb.weights);
  EXPECT_EQ(mb.meta.seed, 99u);
}

TEST(Train, RejectsBadInput) {
  EXPECT_THROW(train({}, {}), InvalidArgument);
  EXPECT_THROW(train({{1.0}, {2.0}}, {1, 1}), InvalidArgument);
  EXPECT_THROW(train({{1.0}, {2.0, 3.0}}, {0, 1}), InvalidArgument);
  EXPECT_THROW(train({{1.0}, {NAN}}, {0, 1}), InvalidArgument);
  EXPECT_THROW(train({{1.0}, {2.0}}, {0, 2}), InvalidArgument);
}

TEST(Model, JsonRoundTripAndDimensionCheck) {
  const auto data = clusters(8, 20, 3, 3.0);
  const auto m = train(data.x, data.y, {}, 3);
  const ProberModel r = nlohmann::json(m).get<ProberModel>();
  EXPECT_EQ(r.weights, m.weights);
  EXPECT_EQ(r.layer, 3);
  EXPECT_EQ(predict(r, data.x[0]), predict(m, data.x[0]));
  EXPECT_THROW(score(m, Vector{1.0}), InvalidArgument);
  auto bad = nlohmann::json(m);
  bad["std"][0] = 0.0;
  EXPECT_THROW(bad.get<ProberModel>(), InvalidArgument);
}

TEST(Feature, IsFinalPromptStateAtLayer) {
  const auto b = planted::backend(1);
  const auto c = planted::corpus(1);
  const auto ids = b.encode(c[0].prompt_with);
  const auto fwd = b.forward_with_states(ids);
  for (int l = 0; l <= 4; ++l)
    EXPECT_EQ(extract_feature(c[0], b, l), fwd.states.state(l, int(ids.ids.size()) - 1).values);
  EXPECT_THROW(extract_feature(c[0], b, 5), InvalidArgument);
}
