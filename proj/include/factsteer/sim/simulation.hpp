#pragma once

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factsteer/clients/chat_client.hpp"
#include "factsteer/eval/baselines.hpp"
#include "factsteer/eval/judge.hpp"
#include "factsteer/eval/stats.hpp"
#include "factsteer/steer/steering.hpp"

namespace factsteer::sim {

enum class Arm { control, personalized, personalized_fpps };

NLOHMANN_JSON_SERIALIZE_ENUM(Arm, {{Arm::control, "control"},
                                   {Arm::personalized, "personalized"},
                                   {Arm::personalized_fpps, "personalized+FPPS"}})

inline std::string to_string(Arm a) { return nlohmann::json(a).get<std::string>(); }

inline Arm parse_arm(const std::string& s) {
  if (s == "control") return Arm::control;
  if (s == "personalized") return Arm::personalized;
  if (s == "personalized+FPPS" || s == "fpps") return Arm::personalized_fpps;
  throw InvalidArgument("unknown arm '" + s + "'");
}

struct Entry {
  std::string speaker;  // "student" | "teacher"
  std::string text;
};

enum class Termination { sentinel, max_turns, aborted };

NLOHMANN_JSON_SERIALIZE_ENUM(Termination, {{Termination::sentinel, "sentinel"},
                                           {Termination::max_turns, "max_turns"},
                                           {Termination::aborted, "aborted"}})

struct TutoringTranscript {
  std::string qa_id;
  Arm arm = Arm::control;
  std::vector<Entry> turns;  // student question first, then teacher/student alternating
  Termination terminated_by = Termination::max_turns;
  std::string final_answer;
  std::optional<bool> exam_verdict;  // nullopt: unjudged
  std::string error;

  std::vector<std::string> teacher_turns() const {
    std::vector<std::string> out;
    for (const auto& e : turns)
      if (e.speaker == "teacher") out.push_back(e.text);
    return out;
  }
};

inline void to_json(nlohmann::json& j, const TutoringTranscript& t) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& e : t.turns) turns.push_back({{"speaker", e.speaker}, {"text", e.text}});
  j = {{"qa_id", t.qa_id},
       {"arm", t.arm},
       {"turns", turns},
       {"terminated_by", t.terminated_by},
       {"final_answer", t.final_answer},
       {"exam_verdict", t.exam_verdict ? nlohmann::json(*t.exam_verdict ? "Correct" : "Incorrect")
                                       : nlohmann::json("unjudged")}};
  if (!t.error.empty()) j["error"] = t.error;
}

inline void from_json(const nlohmann::json& j, TutoringTranscript& t) {
  j.at("qa_id").get_to(t.qa_id);
  j.at("arm").get_to(t.arm);
  t.turns.clear();
  for (const auto& e : j.at("turns")) t.turns.push_back({e.at("speaker"), e.at("text")});
  j.at("terminated_by").get_to(t.terminated_by);
  t.final_answer = j.value("final_answer", std::string());
  const std::string v = j.value("exam_verdict", std::string("unjudged"));
  t.exam_verdict = v == "Correct" ? std::optional<bool>(true)
                   : v == "Incorrect" ? std::optional<bool>(false)
                                      : std::nullopt;
  t.error = j.value("error", std::string());
}

// True when the last non-empty line is exactly the sentinel.
inline bool ends_with_sentinel(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && eval::trim(lines.back()).empty()) lines.pop_back();
  return !lines.empty() && eval::trim(lines.back()) == eval::prompts::kSentinel;
}

inline std::string render_log(const std::vector<Entry>& turns) {
  std::string out;
  for (const auto& e : turns)
    out += (out.empty() ? "" : "\n") + std::string(e.speaker == "student" ? "Student: " : "Teacher: ") + e.text;
  return out;
}

struct TutoringOptions {
  int max_turns = 8;  // teacher turns
  int max_new_tokens = 500;
  steer::SteerOptions steer{};
};

// Teacher prompt for one arm: instruction, then the dialogue so far.
inline std::string teacher_prompt(Arm arm, const std::string& history, const std::vector<Entry>& turns) {
  const std::string head = arm == Arm::control ? eval::prompts::teacher_control()
                                               : eval::prompts::teacher_personalized(history);
  return head + "\n\n" + render_log(turns) + "\nTeacher:";
}

inline std::string student_prompt(const std::vector<Entry>& turns) {
  return eval::prompts::student() + "\n\n" + render_log(turns) + "\nStudent:";
}

// Student asks, teacher answers, student evaluates; stops on the sentinel or
// after max_turns teacher turns, then the final exam prompt.
inline TutoringTranscript run_tutoring(const QAInstance& qa, Arm arm, const std::string& history,
                                       const model::Backend& teacher, clients::ChatClient& student,
                                       const steer::SteeringArtifact* artifact,
                                       const TutoringOptions& opts = {}) {
  if (opts.max_turns < 1) throw InvalidArgument("max_turns must be >= 1");
  if (arm == Arm::personalized_fpps && !artifact)
    throw InvalidArgument("the personalized+FPPS arm needs a steering artifact");
  TutoringTranscript t;
  t.qa_id = qa.qa_id;
  t.arm = arm;
  t.turns.push_back({"student", qa.question});
  try {
    t.terminated_by = Termination::max_turns;
    for (int turn = 0; turn < opts.max_turns; ++turn) {
      std::string reply;
      if (arm == Arm::personalized_fpps) {
        auto so = opts.steer;
        so.max_new_tokens = opts.max_new_tokens;
        const auto pw = teacher.encode(teacher_prompt(Arm::personalized, history, t.turns));
        const auto pwo = teacher.encode(teacher_prompt(Arm::control, history, t.turns));
        reply = *steer::steered_generate(pw, pwo, *artifact, teacher, so).tokens.text;
      } else {
        reply = *teacher.generate(teacher.encode(teacher_prompt(arm, history, t.turns)), std::nullopt,
                                  opts.max_new_tokens).text;
      }
      t.turns.push_back({"teacher", reply});
      std::string s = student.complete(student_prompt(t.turns));
      t.turns.push_back({"student", s});
      if (ends_with_sentinel(s)) {
        t.terminated_by = Termination::sentinel;
        break;
      }
    }
    t.final_answer = eval::trim(student.complete(eval::prompts::final_exam(qa.question, render_log(t.turns))));
  } catch (const Error& e) {
    t.terminated_by = Termination::aborted;
    t.error = e.what();
  }
  return t;
}

struct PrefilterResult {
  std::vector<QAInstance> unknown;
  std::vector<std::string> excluded;  // client failure or unjudged
};

// Keeps questions the student gets wrong unaided.
inline PrefilterResult prefilter_known(const std::vector<QAInstance>& questions, clients::ChatClient& student,
                                       clients::ChatClient& judge, const clients::RetryPolicy& retry = {}) {
  PrefilterResult r;
  for (const auto& q : questions) {
    std::string answer;
    try {
      answer = clients::with_retries(retry, [&] { return student.complete(eval::prompts::without_history(q.question)); });
    } catch (const ClientError&) {
      r.excluded.push_back(q.qa_id);
      continue;
    }
    const auto v = eval::judge_prompt(q.qa_id, eval::prompts::sim_judge(q.question, q.gold_answer, answer), judge,
                                      eval::parse_correct_incorrect, retry);
    if (!v.judged()) r.excluded.push_back(q.qa_id);
    else if (!*v.correct) r.unknown.push_back(q);
  }
  return r;
}

struct ArmAccuracy {
  Arm arm = Arm::control;
  std::size_t n = 0;
  std::size_t correct = 0;
  std::size_t unjudged = 0;
  double accuracy = 0.0;
};

struct PairedComparison {
  Arm a = Arm::control;
  Arm b = Arm::personalized;
  double mean_difference = 0.0;  // accuracy(a) - accuracy(b) as a fraction
  double t = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

struct ArmReport {
  std::vector<ArmAccuracy> arms;
  std::vector<PairedComparison> comparisons;
};

// Judges every transcript (unjudged counts as incorrect) and compares arms
// pairwise over per-question 0/1 outcomes.
inline ArmReport exam_and_score(std::vector<TutoringTranscript>& transcripts, clients::ChatClient& judge,
                                const std::map<std::string, QAInstance>& qas,
                                const clients::RetryPolicy& retry = {}) {
  std::map<Arm, std::map<std::string, double>> outcome;
  for (auto& t : transcripts) {
    auto it = qas.find(t.qa_id);
    if (it == qas.end()) throw InvalidArgument("transcript for unknown qa_id " + t.qa_id);
    if (t.terminated_by != Termination::aborted) {
      const auto v = eval::judge_prompt(t.qa_id,
                                        eval::prompts::sim_judge(it->second.question, it->second.gold_answer,
                                                                 t.final_answer),
                                        judge, eval::parse_correct_incorrect, retry);
      t.exam_verdict = v.correct;
    } else {
      t.exam_verdict.reset();
    }
    if (!outcome[t.arm].emplace(t.qa_id, t.exam_verdict.value_or(false) ? 1.0 : 0.0).second)
      throw InvalidArgument("duplicate transcript for " + t.qa_id + " in arm " + to_string(t.arm));
  }
  ArmReport r;
  std::optional<std::set<std::string>> ids;
  for (const auto& [arm, per_q] : outcome) {
    std::set<std::string> s;
    for (const auto& [q, v] : per_q) s.insert(q);
    if (ids && *ids != s) throw InvalidArgument("arms cover different question sets");
    ids = s;
  }
  for (const auto& [arm, per_q] : outcome) {
    ArmAccuracy a;
    a.arm = arm;
    a.n = per_q.size();
    for (const auto& [q, v] : per_q) a.correct += static_cast<std::size_t>(v);
    for (const auto& t : transcripts)
      if (t.arm == arm && !t.exam_verdict) ++a.unjudged;
    a.accuracy = a.n ? static_cast<double>(a.correct) / static_cast<double>(a.n) : 0.0;
    r.arms.push_back(a);
  }
  for (auto i = outcome.begin(); i != outcome.end(); ++i) {
    for (auto j = std::next(i); j != outcome.end(); ++j) {
      std::vector<double> xa, xb;
      for (const auto& [q, v] : i->second) {
        xa.push_back(v);
        xb.push_back(j->second.at(q));
      }
      PairedComparison c{i->first, j->first, 0.0, 0.0, 0.0, 1.0};
      c.mean_difference = stats::mean(xa) - stats::mean(xb);
      if (xa.size() >= 2) {
        const auto t = stats::paired(xa, xb);
        c.t = t.t;
        c.dof = t.dof;
        c.p_value = t.p_value;
      }
      r.comparisons.push_back(c);
    }
  }
  return r;
}

inline nlohmann::json to_json_value(const ArmReport& r) {
  nlohmann::json arms = nlohmann::json::array(), cmp = nlohmann::json::array();
  for (const auto& a : r.arms)
    arms.push_back({{"arm", a.arm}, {"n", a.n}, {"correct", a.correct}, {"unjudged", a.unjudged},
                    {"accuracy", a.accuracy}});
  for (const auto& c : r.comparisons)
    cmp.push_back({{"arm_a", c.a}, {"arm_b", c.b}, {"mean_difference", c.mean_difference},
                   {"t", c.t}, {"dof", c.dof}, {"p_value", c.p_value}});
  return {{"arms", arms}, {"comparisons", cmp}};
}

inline std::string to_csv(const ArmReport& r) {
  std::ostringstream os;
  os << "arm,n,correct,unjudged,accuracy\n";
  for (const auto& a : r.arms)
    os << to_string(a.arm) << ',' << a.n << ',' << a.correct << ',' << a.unjudged << ',' << a.accuracy << '\n';
  return os.str();
}

}  // namespace factsteer::sim
