#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factsteer/common/parallel.hpp"
#include "factsteer/eval/baselines.hpp"
#include "factsteer/eval/judge.hpp"
#include "factsteer/eval/score.hpp"
#include "factsteer/steer/steering.hpp"

namespace factsteer::eval {

using PromptFn = std::function<PromptPair(const QAInstance&, const UserRecord&)>;

struct EvalOptions {
  int max_new_tokens = 500;
  std::size_t parallel = 1;
  clients::RetryPolicy retry{};
  steer::SteerOptions steer{};  // max_new_tokens is taken from above
};

struct EvalItem {
  QAInstance qa;
  std::string prompt_with;
  std::string prompt_without;
  std::string response;
  std::vector<int> response_ids;
  std::optional<double> risk;  // only for steered runs
  bool hard_branch = false;
  JudgeVerdict verdict;
};

struct EvalRun {
  std::vector<EvalItem> items;  // input order
  ScoreReport report;
};

inline void to_json(nlohmann::json& j, const EvalItem& it) {
  j = {{"qa_id", it.qa.qa_id},
       {"kind", it.qa.kind},
       {"response", it.response},
       {"correct", it.verdict.correct ? nlohmann::json(*it.verdict.correct) : nlohmann::json(nullptr)},
       {"raw_reply", it.verdict.raw_reply}};
  if (it.risk) {
    j["risk"] = *it.risk;
    j["hard_branch"] = it.hard_branch;
  }
}

// Personalized generation for every qa (steered when an artifact is given),
// judged and scored.
inline EvalRun run_eval(const std::vector<QAInstance>& qas, const std::vector<UserRecord>& users,
                        const PromptFn& prompts, const model::Backend& backend,
                        const steer::SteeringArtifact* artifact, clients::ChatClient& judge_client,
                        const EvalOptions& opts = {}) {
  std::map<std::string, const UserRecord*> by_user;
  for (const auto& u : users) by_user[u.user_id] = &u;
  for (const auto& q : qas)
    if (!by_user.count(q.user_id))
      throw InvalidArgument("qa " + q.qa_id + " references unknown user '" + q.user_id + "'");
  if (artifact) steer::check_compatible(*artifact, backend);

  EvalRun run;
  run.items.resize(qas.size());
  parallel_for(qas.size(), opts.parallel, [&](std::size_t i) {
    EvalItem it;
    it.qa = qas[i];
    const auto p = prompts(it.qa, *by_user.at(it.qa.user_id));
    it.prompt_with = p.with;
    it.prompt_without = p.without;
    if (artifact) {
      auto so = opts.steer;
      so.max_new_tokens = opts.max_new_tokens;
      auto out = steer::steered_generate(backend.encode(p.with), backend.encode(p.without), *artifact,
                                         backend, so);
      it.response_ids = out.tokens.ids;
      it.response = *out.tokens.text;
      it.risk = out.risk;
      it.hard_branch = out.hard_branch;
    } else {
      auto out = backend.generate(backend.encode(p.with), std::nullopt, opts.max_new_tokens);
      it.response_ids = out.ids;
      it.response = *out.text;
    }
    it.verdict = judge(it.qa.qa_id, it.qa.question, it.qa.gold_answer, it.response, judge_client, opts.retry);
    run.items[i] = std::move(it);
  });
  std::vector<JudgeVerdict> verdicts;
  for (const auto& it : run.items) verdicts.push_back(it.verdict);
  run.report = score(verdicts, qas);
  return run;
}

inline PromptFn baseline_prompts(BaselineBuilder& b) {
  return [&b](const QAInstance& qa, const UserRecord& u) { return b.build(qa, u); };
}

}  // namespace factsteer::eval
