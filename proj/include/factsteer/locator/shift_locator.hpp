#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factsteer/common/parallel.hpp"
#include "factsteer/contrast/corpus.hpp"
#include "factsteer/model/backend.hpp"

namespace factsteer::locator {

// log softmax(logits)[index] via log-sum-exp.
inline double log_prob(std::span<const double> logits, int index) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double v : logits) s += std::exp(v - mx);
  return logits[static_cast<std::size_t>(index)] - mx - std::log(s);
}

// Logit-lens perplexity of `answer` after `prompt`, for every layer 0..depth.
inline std::vector<double> answer_token_ppl_all(const model::TokenSequence& prompt,
                                                const model::TokenSequence& answer,
                                                const model::Backend& backend) {
  if (answer.ids.empty()) throw InvalidArgument("answer_token_ppl: empty answer");
  if (prompt.ids.empty()) throw InvalidArgument("answer_token_ppl: empty prompt");
  model::TokenSequence input{prompt.ids, std::nullopt};
  input.ids.insert(input.ids.end(), answer.ids.begin(), answer.ids.end());
  const auto fwd = backend.forward_with_states(input);
  const int np = static_cast<int>(prompt.ids.size());
  const int T = static_cast<int>(answer.ids.size());
  std::vector<double> out;
  for (int l = 0; l <= backend.depth(); ++l) {
    // Geometric mean of 1/p anchored at the first token: 1/p_0 is a plain
    // ratio (exact for uniform logits) and only the log ratios are averaged.
    double anchor_nll = 0.0, anchor_inv = 0.0, spread = 0.0;
    for (int t = 0; t < T; ++t) {
      const auto lens = backend.logit_lens(fwd.states.state(l, np + t - 1));
      const auto& v = lens.values;
      const int a = answer.ids[static_cast<std::size_t>(t)];
      const double mx = *std::max_element(v.begin(), v.end());
      double s = 0.0;
      for (double x : v) s += std::exp(x - mx);
      const double shifted = v[static_cast<std::size_t>(a)] - mx;
      const double nll = std::log(s) - shifted;
      if (t == 0) {
        anchor_nll = nll;
        anchor_inv = s / std::exp(shifted);
      } else {
        spread += nll - anchor_nll;
      }
    }
    const double factor = std::exp(spread / T);
    out.push_back(std::isfinite(anchor_inv) ? anchor_inv * factor : std::exp(anchor_nll + spread / T));
  }
  return out;
}

inline double answer_token_ppl(const model::TokenSequence& prompt, const model::TokenSequence& answer,
                               int layer, const model::Backend& backend) {
  backend.validate_layer(layer);
  return answer_token_ppl_all(prompt, answer, backend)[static_cast<std::size_t>(layer)];
}

inline double relative_deviation(double ppl_with, double ppl_without) {
  if (!(ppl_with > 0.0)) throw InvalidArgument("relative_deviation: ppl_with must be positive");
  return std::fabs(ppl_with - ppl_without) / ppl_with;
}

struct LayerRow {
  int layer = 0;
  double ppl_with = 0.0;  // group means
  double ppl_without = 0.0;
  double delta = 0.0;     // mean of per-example deviations
};

struct LayerScanReport {
  std::string group;
  std::vector<LayerRow> per_layer;  // layers 0..depth
  std::size_t n_examples = 0;
  std::vector<int> fused_ranking;
  int selected_layer = -1;
};

enum class AnswerSource { gold, generated };

// Layers 1..depth ordered by mean delta descending; equal deltas put the
// deeper layer first.
inline std::vector<int> rank_layers(const LayerScanReport& r) {
  std::vector<LayerRow> rows;
  for (const auto& row : r.per_layer)
    if (row.layer >= 1) rows.push_back(row);
  std::sort(rows.begin(), rows.end(), [](const LayerRow& a, const LayerRow& b) {
    if (a.delta != b.delta) return a.delta > b.delta;
    return a.layer > b.layer;
  });
  std::vector<int> out;
  for (const auto& row : rows) out.push_back(row.layer);
  return out;
}

inline LayerScanReport scan_group(const std::vector<const ContrastiveExample*>& examples,
                                  const std::string& group_name, const model::Backend& backend,
                                  AnswerSource source = AnswerSource::gold, std::size_t parallel = 1) {
  if (examples.empty())
    throw EmptyGroupError(group_name, "layer scan: group " + group_name + " is empty");
  const int layers = backend.depth() + 1;
  std::vector<std::vector<double>> with(examples.size()), without(examples.size());
  parallel_for(examples.size(), parallel, [&](std::size_t i) {
    const auto& e = *examples[i];
    model::TokenSequence answer;
    if (source == AnswerSource::gold) answer = backend.encode(e.qa.gold_answer);
    else answer.ids = e.answer_with_ids;
    if (answer.ids.empty())
      throw InvalidArgument("layer scan: example " + e.qa.qa_id + " has an empty answer");
    with[i] = answer_token_ppl_all(backend.encode(e.prompt_with), answer, backend);
    without[i] = answer_token_ppl_all(backend.encode(e.prompt_without), answer, backend);
  });
  LayerScanReport r;
  r.group = group_name;
  r.n_examples = examples.size();
  const double n = static_cast<double>(examples.size());
  for (int l = 0; l < layers; ++l) {
    LayerRow row{l, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto k = static_cast<std::size_t>(l);
      row.ppl_with += with[i][k] / n;
      row.ppl_without += without[i][k] / n;
      row.delta += relative_deviation(with[i][k], without[i][k]) / n;
    }
    r.per_layer.push_back(row);
  }
  return r;
}

struct Fusion {
  std::map<int, double> scores;
  std::vector<int> ranking;
  int selected = -1;
};

// Inverted-rank fusion: score(l) = sum over groups of 1 / rank_g(l); the
// deeper layer wins ties.
inline Fusion fuse_rankings(const std::vector<std::vector<int>>& rankings) {
  if (rankings.empty()) throw InvalidArgument("fuse: no rankings");
  Fusion f;
  for (const auto& r : rankings) {
    if (r.empty()) throw InvalidArgument("fuse: empty ranking");
    for (std::size_t i = 0; i < r.size(); ++i) f.scores[r[i]] += 1.0 / static_cast<double>(i + 1);
  }
  for (const auto& [l, s] : f.scores) f.ranking.push_back(l);
  std::sort(f.ranking.begin(), f.ranking.end(), [&](int a, int b) {
    if (f.scores[a] != f.scores[b]) return f.scores[a] > f.scores[b];
    return a > b;
  });
  f.selected = f.ranking.front();
  return f;
}

inline int fuse_and_select(LayerScanReport& fd, LayerScanReport& pb) {
  if (fd.n_examples == 0) throw EmptyGroupError(fd.group, "fuse: group " + fd.group + " is empty");
  if (pb.n_examples == 0) throw EmptyGroupError(pb.group, "fuse: group " + pb.group + " is empty");
  auto ra = rank_layers(fd), rb = rank_layers(pb);
  auto sa = ra, sb = rb;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa != sb) throw InvalidArgument("fuse: the two scans cover different layer sets");
  const auto f = fuse_rankings({ra, rb});
  fd.fused_ranking = pb.fused_ranking = f.ranking;
  fd.selected_layer = pb.selected_layer = f.selected;
  return f.selected;
}

struct ScanResult {
  LayerScanReport factual_degraded;
  LayerScanReport personalized_beneficial;
  int selected_layer = -1;
};

inline ScanResult scan_layers(const std::vector<ContrastiveExample>& corpus, const model::Backend& backend,
                              AnswerSource source = AnswerSource::gold, std::size_t parallel = 1) {
  const auto fd_group = contrast::require_group(corpus, EntanglementLabel::factual_degraded);
  const auto pb_group = contrast::require_group(corpus, EntanglementLabel::personalized_beneficial);
  ScanResult r;
  r.factual_degraded = scan_group(fd_group, "factual_degraded", backend, source, parallel);
  r.personalized_beneficial = scan_group(pb_group, "personalized_beneficial", backend, source, parallel);
  r.selected_layer = fuse_and_select(r.factual_degraded, r.personalized_beneficial);
  return r;
}

inline nlohmann::json to_json_value(const LayerScanReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.per_layer)
    rows.push_back({{"layer", row.layer}, {"ppl_with", row.ppl_with},
                    {"ppl_without", row.ppl_without}, {"delta", row.delta}});
  return {{"group", r.group}, {"n_examples", r.n_examples}, {"per_layer", rows},
          {"fused_ranking", r.fused_ranking}, {"selected_layer", r.selected_layer}};
}

inline nlohmann::json to_json_value(const ScanResult& r) {
  return {{"selected_layer", r.selected_layer},
          {"groups", {to_json_value(r.factual_degraded), to_json_value(r.personalized_beneficial)}}};
}

inline std::string to_csv(const ScanResult& r) {
  std::ostringstream os;
  os.precision(17);
  os << "layer,ppl_with,ppl_without,delta,group\n";
  for (const auto* g : {&r.factual_degraded, &r.personalized_beneficial})
    for (const auto& row : g->per_layer)
      os << row.layer << ',' << row.ppl_with << ',' << row.ppl_without << ',' << row.delta << ','
         << g->group << '\n';
  return os.str();
}

}  // namespace factsteer::locator
