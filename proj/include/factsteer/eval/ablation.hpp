#pragma once

#include <sstream>
#include <vector>

#include "factsteer/eval/runner.hpp"

namespace factsteer::eval {

struct AblationPoint {
  double ratio = 0.0;
  ScoreReport report;
  std::size_t context_tokens = 0;  // summed over all with-history prompts
};

// RAG prompts keeping ceil(r * K) retrieved segments, scored per ratio.
inline std::vector<AblationPoint> history_length_ablation(
    const std::vector<double>& ratios, const std::vector<QAInstance>& qas,
    const std::vector<UserRecord>& users, BaselineBuilder& rag, const model::Backend& backend,
    const steer::SteeringArtifact* artifact, clients::ChatClient& judge_client, const EvalOptions& opts = {},
    Truncation mode = Truncation::by_score) {
  if (rag.method() != Method::rag) throw InvalidArgument("history-length ablation runs on RAG prompts");
  std::vector<AblationPoint> out;
  for (double r : ratios) {
    PromptFn fn = [&rag, r, mode](const QAInstance& qa, const UserRecord& u) {
      return PromptPair{rag.rag_at_ratio(qa, u, r, mode), prompts::without_history(qa.question)};
    };
    auto run = run_eval(qas, users, fn, backend, artifact, judge_client, opts);
    AblationPoint pt{r, std::move(run.report), 0};
    for (const auto& it : run.items) pt.context_tokens += backend.encode(it.prompt_with).ids.size();
    out.push_back(std::move(pt));
  }
  return out;
}

inline std::string to_csv(const std::vector<AblationPoint>& pts) {
  std::ostringstream os;
  os.precision(10);
  auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
  os << "ratio,p_score,f_score,overall,context_tokens,unjudged\n";
  for (const auto& p : pts)
    os << p.ratio << ',' << opt(p.report.p_score) << ',' << opt(p.report.f_score) << ','
       << opt(p.report.overall) << ',' << p.context_tokens << ',' << p.report.unjudged << '\n';
  return os.str();
}

}  // namespace factsteer::eval
