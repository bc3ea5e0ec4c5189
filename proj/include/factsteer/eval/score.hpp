#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factsteer/data/records.hpp"
#include "factsteer/eval/judge.hpp"

namespace factsteer::eval {

struct ScoreReport {
  std::optional<double> p_score;  // percent; absent without personalized questions
  std::optional<double> f_score;
  std::optional<double> overall;
  std::size_t n_personalized = 0;
  std::size_t n_factual = 0;
  std::size_t correct_personalized = 0;
  std::size_t correct_factual = 0;
  std::size_t unjudged = 0;
  std::vector<JudgeVerdict> verdicts;
};

inline double overall_score(double p, double f) { return (p + f) / 2.0; }

// Unjudged verdicts count as incorrect.
inline ScoreReport score(const std::vector<JudgeVerdict>& verdicts, const std::vector<QAInstance>& qas) {
  std::map<std::string, const QAInstance*> by_id;
  for (const auto& q : qas) by_id[q.qa_id] = &q;
  ScoreReport r;
  r.verdicts = verdicts;
  for (const auto& v : verdicts) {
    auto it = by_id.find(v.qa_id);
    if (it == by_id.end()) throw InvalidArgument("verdict for unknown qa_id " + v.qa_id);
    const bool ok = v.correct.value_or(false);
    if (!v.judged()) ++r.unjudged;
    if (it->second->kind == QaKind::personalized) {
      ++r.n_personalized;
      r.correct_personalized += ok;
    } else {
      ++r.n_factual;
      r.correct_factual += ok;
    }
  }
  if (r.n_personalized) r.p_score = 100.0 * r.correct_personalized / r.n_personalized;
  if (r.n_factual) r.f_score = 100.0 * r.correct_factual / r.n_factual;
  if (r.p_score && r.f_score) r.overall = overall_score(*r.p_score, *r.f_score);
  return r;
}

inline nlohmann::json to_json_value(const ScoreReport& r, bool with_verdicts = true) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j = {{"p_score", opt(r.p_score)},
                      {"f_score", opt(r.f_score)},
                      {"overall", opt(r.overall)},
                      {"n_personalized", r.n_personalized},
                      {"n_factual", r.n_factual},
                      {"correct_personalized", r.correct_personalized},
                      {"correct_factual", r.correct_factual},
                      {"unjudged", r.unjudged}};
  if (with_verdicts) j["verdicts"] = r.verdicts;
  return j;
}

}  // namespace factsteer::eval
