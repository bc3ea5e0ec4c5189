#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "factsteer/clients/chat_client.hpp"
#include "factsteer/common/parallel.hpp"
#include "factsteer/data/records.hpp"
#include "factsteer/eval/baselines.hpp"
#include "factsteer/eval/judge.hpp"
#include "factsteer/model/backend.hpp"

namespace factsteer::contrast {

// Pure truth table over (verdict_with, verdict_without, kind).
inline EntanglementLabel label_example(bool verdict_with, bool verdict_without, QaKind kind) {
  if (kind == QaKind::factual && verdict_without && !verdict_with)
    return EntanglementLabel::factual_degraded;
  if (kind == QaKind::personalized && verdict_with && !verdict_without)
    return EntanglementLabel::personalized_beneficial;
  return EntanglementLabel::neutral;
}

// Hall(x, u) = 1: correct without history, wrong with it.
inline bool hallucination_indicator(bool verdict_with, bool verdict_without) {
  return verdict_without && !verdict_with;
}

// Judged members of one label group.
inline std::vector<const ContrastiveExample*> group(const std::vector<ContrastiveExample>& corpus,
                                                    EntanglementLabel label) {
  std::vector<const ContrastiveExample*> out;
  for (const auto& e : corpus)
    if (e.judged() && e.label == label) out.push_back(&e);
  return out;
}

inline std::vector<const ContrastiveExample*> require_group(const std::vector<ContrastiveExample>& corpus,
                                                            EntanglementLabel label) {
  auto g = group(corpus, label);
  if (g.empty())
    throw EmptyGroupError(to_string(label),
                          "contrast corpus has no judged " + to_string(label) + " examples");
  return g;
}

struct CorpusOptions {
  int max_new_tokens = 500;
  std::size_t parallel = 1;
  double max_unjudged_fraction = 0.10;
  clients::RetryPolicy retry{};
};

struct CorpusResult {
  std::vector<ContrastiveExample> examples;  // ordered by qa_id
  std::map<std::string, std::size_t> label_counts;
  std::size_t unjudged = 0;
};

inline std::string generate_text(const model::Backend& backend, const std::string& prompt,
                                 int max_new_tokens, std::vector<int>* ids = nullptr) {
  auto out = backend.generate(backend.encode(prompt), std::nullopt, max_new_tokens);
  if (ids) *ids = out.ids;
  return out.text.value_or(backend.decode(out.ids));
}

// One example per qa: both prompts, both greedy generations, both verdicts,
// label. Judge failures leave the example unjudged (label neutral); more
// than max_unjudged_fraction unjudged aborts the build.
inline CorpusResult build_contrast_corpus(const std::vector<UserRecord>& users,
                                          const std::vector<QAInstance>& qas,
                                          eval::BaselineBuilder& builder, const model::Backend& backend,
                                          clients::ChatClient& judge, const CorpusOptions& opts = {}) {
  std::map<std::string, const UserRecord*> by_user;
  for (const auto& u : users) by_user[u.user_id] = &u;
  for (const auto& q : qas) {
    validate(q);
    if (!by_user.count(q.user_id))
      throw InvalidArgument("qa " + q.qa_id + " references unknown user '" + q.user_id + "'");
  }

  std::vector<ContrastiveExample> out(qas.size());
  parallel_for(qas.size(), opts.parallel, [&](std::size_t i) {
    const QAInstance& qa = qas[i];
    ContrastiveExample e;
    e.qa = qa;
    e.method = eval::to_string(builder.method());
    const auto prompts = builder.build(qa, *by_user.at(qa.user_id));
    e.prompt_with = prompts.with;
    e.prompt_without = prompts.without;
    e.answer_with = generate_text(backend, e.prompt_with, opts.max_new_tokens, &e.answer_with_ids);
    e.answer_without = generate_text(backend, e.prompt_without, opts.max_new_tokens, &e.answer_without_ids);
    e.verdict_with = eval::judge(qa.qa_id, qa.question, qa.gold_answer, e.answer_with, judge, opts.retry).correct;
    e.verdict_without =
        eval::judge(qa.qa_id, qa.question, qa.gold_answer, e.answer_without, judge, opts.retry).correct;
    e.label = e.judged() ? label_example(*e.verdict_with, *e.verdict_without, qa.kind)
                         : EntanglementLabel::neutral;
    out[i] = std::move(e);
  });

  std::sort(out.begin(), out.end(), [](const ContrastiveExample& a, const ContrastiveExample& b) {
    return a.qa.qa_id < b.qa.qa_id;
  });
  CorpusResult r;
  for (auto l : {EntanglementLabel::factual_degraded, EntanglementLabel::personalized_beneficial,
                 EntanglementLabel::neutral})
    r.label_counts[to_string(l)] = 0;
  for (const auto& e : out) {
    if (!e.judged()) {
      ++r.unjudged;
      continue;
    }
    ++r.label_counts[to_string(e.label)];
  }
  if (!out.empty() &&
      static_cast<double>(r.unjudged) > opts.max_unjudged_fraction * static_cast<double>(out.size()))
    throw Error(std::to_string(r.unjudged) + " of " + std::to_string(out.size()) +
                " contrast examples are unjudged (limit " +
                std::to_string(static_cast<int>(opts.max_unjudged_fraction * 100)) + "%)");
  r.examples = std::move(out);
  return r;
}

}  // namespace factsteer::contrast
