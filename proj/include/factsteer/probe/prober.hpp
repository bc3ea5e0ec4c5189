#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "factsteer/common/error.hpp"
#include "factsteer/common/vec.hpp"
#include "factsteer/data/records.hpp"
#include "factsteer/model/backend.hpp"

namespace factsteer::probe {

struct TrainingMeta {
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  double l2_strength = 1e-2;
  std::uint64_t seed = 0;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

struct ProberModel {
  Vector weights;
  double bias = 0.0;
  Vector feature_mean;
  Vector feature_std;
  int layer = 0;
  TrainingMeta meta;

  int dim() const { return static_cast<int>(weights.size()); }
};

// Numerically stable logistic function, kept strictly inside (0, 1).
inline double sigmoid(double z) {
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::min(hi, std::max(lo, p));
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline Vector final_token_state(const std::string& prompt, const model::Backend& backend, int layer) {
  backend.validate_layer(layer);
  const auto input = backend.encode(prompt);
  const auto fwd = backend.forward_with_states(input);
  return fwd.states.state(layer, static_cast<int>(input.ids.size()) - 1).values;
}

// Final prompt-token state of the with-history prompt at `layer`.
inline Vector extract_feature(const ContrastiveExample& e, const model::Backend& backend, int layer) {
  return final_token_state(e.prompt_with, backend, layer);
}

struct LossGrad {
  double loss = 0.0;
  Vector grad_w;
  double grad_b = 0.0;
};

// Mean logistic loss plus (l2/2)|w|^2 on already standardized features; the
// bias is not penalized.
inline LossGrad loss_and_grad(const Vector& w, double b, const std::vector<Vector>& x,
                              const std::vector<int>& y, double l2) {
  const double n = static_cast<double>(x.size());
  LossGrad r{0.0, Vector(w.size(), 0.0), 0.0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = dot(w, x[i]) + b;
    r.loss += (softplus(z) - y[i] * z) / n;
    const double g = (sigmoid(z) - y[i]) / n;
    for (std::size_t k = 0; k < w.size(); ++k) r.grad_w[k] += g * x[i][k];
    r.grad_b += g;
  }
  for (std::size_t k = 0; k < w.size(); ++k) {
    r.loss += 0.5 * l2 * w[k] * w[k];
    r.grad_w[k] += l2 * w[k];
  }
  return r;
}

struct TrainOptions {
  double l2_strength = 1e-2;
  std::uint64_t seed = 0;
  double grad_tol = 1e-6;
  int max_iter = 5000;
  std::vector<double>* loss_trace = nullptr;  // per-iteration loss, for diagnostics
};

inline Vector standardize(std::span<const double> f, const Vector& mean, const Vector& std) {
  Vector out(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) out[k] = (f[k] - mean[k]) / std[k];
  return out;
}

// labels: 1 = factual_degraded, 0 = personalized_beneficial. Zero initial
// weights, so the result does not depend on the seed; it is recorded only.
inline ProberModel train(const std::vector<Vector>& features, const std::vector<int>& labels,
                         const TrainOptions& opts = {}, int layer = 0) {
  if (features.empty() || features.size() != labels.size())
    throw InvalidArgument("prober: features and labels must be non-empty and equally long");
  const std::size_t d = features.front().size();
  ProberModel m;
  m.layer = layer;
  m.meta.l2_strength = opts.l2_strength;
  m.meta.seed = opts.seed;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != d) throw InvalidArgument("prober: features differ in dimension");
    if (!all_finite(features[i])) throw InvalidArgument("prober: non-finite feature at row " + std::to_string(i));
    if (labels[i] == 1) ++m.meta.n_pos;
    else if (labels[i] == 0) ++m.meta.n_neg;
    else throw InvalidArgument("prober: labels must be 0 or 1");
  }
  if (m.meta.n_pos == 0 || m.meta.n_neg == 0)
    throw InvalidArgument("prober: training data has a single class");

  const double n = static_cast<double>(features.size());
  m.feature_mean.assign(d, 0.0);
  m.feature_std.assign(d, 0.0);
  for (const auto& f : features)
    for (std::size_t k = 0; k < d; ++k) m.feature_mean[k] += f[k] / n;
  for (const auto& f : features)
    for (std::size_t k = 0; k < d; ++k) m.feature_std[k] += (f[k] - m.feature_mean[k]) * (f[k] - m.feature_mean[k]) / n;
  for (auto& s : m.feature_std) s = s > 0.0 ? std::sqrt(s) : 1.0;
  for (std::size_t k = 0; k < d; ++k)
    if (!(m.feature_std[k] > 1e-12 * std::max(1.0, std::fabs(m.feature_mean[k])))) m.feature_std[k] = 1.0;

  std::vector<Vector> x;
  x.reserve(features.size());
  for (const auto& f : features) x.push_back(standardize(f, m.feature_mean, m.feature_std));

  Vector w(d, 0.0);
  double b = 0.0;
  double step = 1.0;
  auto cur = loss_and_grad(w, b, x, labels, opts.l2_strength);
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const double g2 = dot(cur.grad_w, cur.grad_w) + cur.grad_b * cur.grad_b;
    m.meta.grad_norm = std::sqrt(g2);
    if (m.meta.grad_norm < opts.grad_tol) {
      m.meta.converged = true;
      break;
    }
    if (opts.loss_trace) opts.loss_trace->push_back(cur.loss);
    // Armijo backtracking from a step slightly larger than the last accepted one.
    step = std::min(step * 2.0, 1e3);
    for (;;) {
      Vector w_new = add_scaled(w, -step, cur.grad_w);
      const double b_new = b - step * cur.grad_b;
      auto next = loss_and_grad(w_new, b_new, x, labels, opts.l2_strength);
      if (next.loss <= cur.loss - 0.5 * step * g2 || step < 1e-20) {
        w = std::move(w_new);
        b = b_new;
        cur = std::move(next);
        break;
      }
      step *= 0.5;
    }
  }
  if (!m.meta.converged) {
    const double g2 = dot(cur.grad_w, cur.grad_w) + cur.grad_b * cur.grad_b;
    m.meta.grad_norm = std::sqrt(g2);
    m.meta.converged = m.meta.grad_norm < opts.grad_tol;
  }
  if (opts.loss_trace) opts.loss_trace->push_back(cur.loss);
  m.meta.iterations = it;
  m.weights = std::move(w);
  m.bias = b;
  return m;
}

inline double score(const ProberModel& m, std::span<const double> feature) {
  if (static_cast<int>(feature.size()) != m.dim())
    throw InvalidArgument("prober: feature has dimension " + std::to_string(feature.size()) +
                          ", model expects " + std::to_string(m.dim()));
  return dot(m.weights, standardize(feature, m.feature_mean, m.feature_std)) + m.bias;
}

inline double predict(const ProberModel& m, std::span<const double> feature) {
  return sigmoid(score(m, feature));
}

inline void to_json(nlohmann::json& j, const ProberModel& m) {
  j = {{"W", m.weights},
       {"b", m.bias},
       {"mean", m.feature_mean},
       {"std", m.feature_std},
       {"layer", m.layer},
       {"meta",
        {{"n_pos", m.meta.n_pos},
         {"n_neg", m.meta.n_neg},
         {"l2_strength", m.meta.l2_strength},
         {"seed", m.meta.seed},
         {"iterations", m.meta.iterations},
         {"grad_norm", m.meta.grad_norm},
         {"converged", m.meta.converged}}}};
}

inline void from_json(const nlohmann::json& j, ProberModel& m) {
  j.at("W").get_to(m.weights);
  j.at("b").get_to(m.bias);
  j.at("mean").get_to(m.feature_mean);
  j.at("std").get_to(m.feature_std);
  m.layer = j.value("layer", 0);
  if (m.feature_mean.size() != m.weights.size() || m.feature_std.size() != m.weights.size())
    throw InvalidArgument("prober: W, mean and std must have equal length");
  for (double s : m.feature_std)
    if (!(s > 0.0)) throw InvalidArgument("prober: std entries must be positive");
  if (j.contains("meta")) {
    const auto& t = j["meta"];
    m.meta.n_pos = t.value("n_pos", std::size_t{0});
    m.meta.n_neg = t.value("n_neg", std::size_t{0});
    m.meta.l2_strength = t.value("l2_strength", 1e-2);
    m.meta.seed = t.value("seed", std::uint64_t{0});
    m.meta.iterations = t.value("iterations", 0);
    m.meta.grad_norm = t.value("grad_norm", 0.0);
    m.meta.converged = t.value("converged", false);
  }
}

}  // namespace factsteer::probe
