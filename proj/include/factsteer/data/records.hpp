#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factsteer/common/error.hpp"

namespace factsteer {

enum class QaKind { personalized, factual };

NLOHMANN_JSON_SERIALIZE_ENUM(QaKind, {{QaKind::personalized, "personalized"},
                                      {QaKind::factual, "factual"}})

inline std::string to_string(QaKind k) {
  return k == QaKind::personalized ? "personalized" : "factual";
}

struct Turn {
  std::string speaker;
  std::string utterance;
};

struct ChatSession {
  std::string session_id;
  std::string timestamp;  // ISO-8601 (lexicographic order == time order)
  std::vector<Turn> turns;
};

struct QAInstance {
  std::string qa_id;
  std::string user_id;
  QaKind kind = QaKind::factual;
  std::string question;
  std::string gold_answer;

  bool operator==(const QAInstance&) const = default;
};

struct UserRecord {
  std::string user_id;
  std::vector<ChatSession> sessions;
  QAInstance personalized_qa;
  std::string question_date;  // empty: date of the last session

  std::string current_date() const {
    if (!question_date.empty()) return question_date;
    return sessions.empty() ? std::string() : sessions.back().timestamp;
  }
};

enum class EntanglementLabel { factual_degraded, personalized_beneficial, neutral };

NLOHMANN_JSON_SERIALIZE_ENUM(EntanglementLabel,
                             {{EntanglementLabel::factual_degraded, "factual_degraded"},
                              {EntanglementLabel::personalized_beneficial, "personalized_beneficial"},
                              {EntanglementLabel::neutral, "neutral"}})

inline std::string to_string(EntanglementLabel l) { return nlohmann::json(l).get<std::string>(); }

struct ContrastiveExample {
  QAInstance qa;
  std::string method;
  std::string prompt_with;
  std::string prompt_without;
  std::string answer_with;
  std::string answer_without;
  std::vector<int> answer_with_ids;
  std::vector<int> answer_without_ids;
  std::optional<bool> verdict_with;  // nullopt: the judge gave no usable verdict
  std::optional<bool> verdict_without;
  EntanglementLabel label = EntanglementLabel::neutral;

  bool judged() const { return verdict_with.has_value() && verdict_without.has_value(); }
};

struct BenchmarkRecord {
  std::string user_id;
  QAInstance personalized_qa;
  QAInstance factual_qa;
  double hybrid_score = 0.0;
  std::vector<std::string> session_ids;  // sessions whose top-k held the fact
  std::string split;                     // "train" | "test"
};

// ---- validation -----------------------------------------------------------

inline void validate(const QAInstance& qa) {
  if (qa.qa_id.empty()) throw InvalidArgument("QAInstance without qa_id");
  if (qa.gold_answer.empty()) throw InvalidArgument("QAInstance " + qa.qa_id + " has an empty gold answer");
}

inline void validate(const UserRecord& u) {
  if (u.sessions.empty()) throw InvalidArgument("user " + u.user_id + " has no sessions");
  for (std::size_t i = 1; i < u.sessions.size(); ++i)
    if (u.sessions[i].timestamp < u.sessions[i - 1].timestamp)
      throw InvalidArgument("user " + u.user_id + ": session timestamps decrease at " +
                            u.sessions[i].session_id);
  validate(u.personalized_qa);
  if (u.personalized_qa.kind != QaKind::personalized)
    throw InvalidArgument("user " + u.user_id + ": personalized_qa must have kind personalized");
}

// ---- JSON -----------------------------------------------------------------

inline void to_json(nlohmann::json& j, const Turn& t) {
  j = {{"speaker", t.speaker}, {"utterance", t.utterance}};
}
inline void from_json(const nlohmann::json& j, Turn& t) {
  // Chat-format aliases are accepted.
  t.speaker = j.contains("speaker") ? j["speaker"].get<std::string>() : j.at("role").get<std::string>();
  t.utterance = j.contains("utterance") ? j["utterance"].get<std::string>()
                                        : j.at("content").get<std::string>();
}

inline void to_json(nlohmann::json& j, const ChatSession& s) {
  j = {{"session_id", s.session_id}, {"timestamp", s.timestamp}, {"turns", s.turns}};
}
inline void from_json(const nlohmann::json& j, ChatSession& s) {
  j.at("session_id").get_to(s.session_id);
  s.timestamp = j.value("timestamp", std::string());
  j.at("turns").get_to(s.turns);
}

inline void to_json(nlohmann::json& j, const QAInstance& q) {
  j = {{"qa_id", q.qa_id}, {"user_id", q.user_id}, {"kind", q.kind},
       {"question", q.question}, {"gold_answer", q.gold_answer}};
}
inline void from_json(const nlohmann::json& j, QAInstance& q) {
  j.at("qa_id").get_to(q.qa_id);
  q.user_id = j.value("user_id", std::string());
  j.at("kind").get_to(q.kind);
  j.at("question").get_to(q.question);
  j.at("gold_answer").get_to(q.gold_answer);
}

inline void to_json(nlohmann::json& j, const UserRecord& u) {
  j = {{"user_id", u.user_id}, {"sessions", u.sessions}, {"personalized_qa", u.personalized_qa}};
  if (!u.question_date.empty()) j["question_date"] = u.question_date;
}
inline void from_json(const nlohmann::json& j, UserRecord& u) {
  j.at("user_id").get_to(u.user_id);
  j.at("sessions").get_to(u.sessions);
  j.at("personalized_qa").get_to(u.personalized_qa);
  if (u.personalized_qa.user_id.empty()) u.personalized_qa.user_id = u.user_id;
  u.question_date = j.value("question_date", std::string());
}

inline nlohmann::json optional_bool(const std::optional<bool>& b) {
  return b ? nlohmann::json(*b) : nlohmann::json(nullptr);
}
inline std::optional<bool> optional_bool(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<bool>();
}

inline void to_json(nlohmann::json& j, const ContrastiveExample& e) {
  j = {{"qa", e.qa},
       {"method", e.method},
       {"prompt_with", e.prompt_with},
       {"prompt_without", e.prompt_without},
       {"answer_with", e.answer_with},
       {"answer_without", e.answer_without},
       {"answer_with_ids", e.answer_with_ids},
       {"answer_without_ids", e.answer_without_ids},
       {"verdict_with", optional_bool(e.verdict_with)},
       {"verdict_without", optional_bool(e.verdict_without)},
       {"unjudged", !e.judged()},
       {"label", e.label}};
}
inline void from_json(const nlohmann::json& j, ContrastiveExample& e) {
  j.at("qa").get_to(e.qa);
  e.method = j.value("method", std::string());
  j.at("prompt_with").get_to(e.prompt_with);
  j.at("prompt_without").get_to(e.prompt_without);
  e.answer_with = j.value("answer_with", std::string());
  e.answer_without = j.value("answer_without", std::string());
  e.answer_with_ids = j.value("answer_with_ids", std::vector<int>{});
  e.answer_without_ids = j.value("answer_without_ids", std::vector<int>{});
  e.verdict_with = optional_bool(j.value("verdict_with", nlohmann::json(nullptr)));
  e.verdict_without = optional_bool(j.value("verdict_without", nlohmann::json(nullptr)));
  j.at("label").get_to(e.label);
}

inline void to_json(nlohmann::json& j, const BenchmarkRecord& r) {
  j = {{"user_id", r.user_id},
       {"personalized_qa", r.personalized_qa},
       {"factual_qa", r.factual_qa},
       {"provenance", {{"hybrid_score", r.hybrid_score}, {"session_ids", r.session_ids}}},
       {"split", r.split}};
}
inline void from_json(const nlohmann::json& j, BenchmarkRecord& r) {
  j.at("user_id").get_to(r.user_id);
  j.at("personalized_qa").get_to(r.personalized_qa);
  j.at("factual_qa").get_to(r.factual_qa);
  const auto& p = j.at("provenance");
  p.at("hybrid_score").get_to(r.hybrid_score);
  p.at("session_ids").get_to(r.session_ids);
  r.split = j.value("split", std::string());
}

// Session rendered as plain text for prompts and embedding.
inline std::string render_session(const ChatSession& s) {
  std::string out = "[Session " + s.session_id;
  if (!s.timestamp.empty()) out += " | " + s.timestamp;
  out += "]";
  for (const auto& t : s.turns) out += "\n" + t.speaker + ": " + t.utterance;
  return out;
}

}  // namespace factsteer
