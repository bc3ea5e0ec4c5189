#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "factsteer/eval/stats.hpp"
#include "factsteer/steer/steering.hpp"

namespace factsteer::eval {

struct EntanglementStats {
  double mean_cos_truthful = 0.0;
  double mean_cos_hallucinated = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
  double dof = 0.0;
  std::size_t n_truthful = 0;
  std::size_t n_hallucinated = 0;
  std::size_t skipped = 0;  // unjudged or an empty response
  std::vector<double> cos_truthful;
  std::vector<double> cos_hallucinated;
};

// Mean of the final-layer states over the response positions of
// prompt ++ response.
inline Vector pooled_response_embedding(const model::TokenSequence& prompt, std::span<const int> response,
                                        const model::Backend& backend) {
  if (response.empty()) throw InvalidArgument("pooled_response_embedding: empty response");
  Vector sum(static_cast<std::size_t>(backend.hidden_dim()), 0.0);
  std::size_t n = 0;
  steer::accumulate_response_states(prompt, response, backend, backend.depth(), sum, n);
  for (auto& v : sum) v /= static_cast<double>(n);
  return sum;
}

// Cosine between pooled personalized and non-personalized response
// embeddings of factual questions, grouped by the personalized verdict and
// compared with Welch's t-test.
inline EntanglementStats entanglement_analysis(const std::vector<ContrastiveExample>& corpus,
                                               const model::Backend& backend) {
  EntanglementStats s;
  for (const auto& e : corpus) {
    if (e.qa.kind != QaKind::factual) continue;
    if (!e.verdict_with || e.answer_with_ids.empty() || e.answer_without_ids.empty()) {
      ++s.skipped;
      continue;
    }
    const auto a = pooled_response_embedding(backend.encode(e.prompt_with), e.answer_with_ids, backend);
    const auto b = pooled_response_embedding(backend.encode(e.prompt_without), e.answer_without_ids, backend);
    (*e.verdict_with ? s.cos_truthful : s.cos_hallucinated).push_back(cosine(a, b));
  }
  s.n_truthful = s.cos_truthful.size();
  s.n_hallucinated = s.cos_hallucinated.size();
  if (s.n_truthful < 2) throw EmptyGroupError("truthful", "entanglement analysis needs >= 2 truthful examples");
  if (s.n_hallucinated < 2)
    throw EmptyGroupError("hallucinated", "entanglement analysis needs >= 2 hallucinated examples");
  const auto t = stats::welch(s.cos_truthful, s.cos_hallucinated);
  s.mean_cos_truthful = t.mean_a;
  s.mean_cos_hallucinated = t.mean_b;
  s.t_statistic = t.t;
  s.p_value = t.p_value;
  s.dof = t.dof;
  return s;
}

inline nlohmann::json to_json_value(const EntanglementStats& s) {
  return {{"mean_cos_truthful", s.mean_cos_truthful},
          {"mean_cos_hallucinated", s.mean_cos_hallucinated},
          {"t_statistic", s.t_statistic},
          {"p_value", s.p_value},
          {"dof", s.dof},
          {"n_truthful", s.n_truthful},
          {"n_hallucinated", s.n_hallucinated},
          {"skipped", s.skipped},
          {"cos_truthful", s.cos_truthful},
          {"cos_hallucinated", s.cos_hallucinated}};
}

}  // namespace factsteer::eval
