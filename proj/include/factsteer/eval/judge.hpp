#pragma once

#include <cctype>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "factsteer/clients/chat_client.hpp"
#include "factsteer/eval/prompts.hpp"

namespace factsteer::eval {

struct JudgeVerdict {
  std::string qa_id;
  std::optional<bool> correct;  // nullopt: unjudged
  std::string raw_reply;
  std::string failure;  // transport error text when unjudged by failure

  bool judged() const { return correct.has_value(); }
};

inline void to_json(nlohmann::json& j, const JudgeVerdict& v) {
  j = {{"qa_id", v.qa_id},
       {"correct", v.correct ? nlohmann::json(*v.correct) : nlohmann::json(nullptr)},
       {"raw_reply", v.raw_reply},
       {"unjudged", !v.judged()}};
  if (!v.failure.empty()) j["failure"] = v.failure;
}

// First whitespace-delimited token, lowercased, trailing punctuation removed.
inline std::string first_word(const std::string& reply) {
  std::size_t i = 0;
  while (i < reply.size() && std::isspace(static_cast<unsigned char>(reply[i]))) ++i;
  std::string w;
  while (i < reply.size() && !std::isspace(static_cast<unsigned char>(reply[i])))
    w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(reply[i++]))));
  while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.back()))) w.pop_back();
  while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.front()))) w.erase(w.begin());
  return w;
}

inline std::optional<bool> parse_yes_no(const std::string& reply) {
  const auto w = first_word(reply);
  if (w == "yes") return true;
  if (w == "no") return false;
  return std::nullopt;
}

inline std::optional<bool> parse_correct_incorrect(const std::string& reply) {
  const auto w = first_word(reply);
  if (w == "correct") return true;
  if (w == "incorrect") return false;
  return std::nullopt;
}

// Sends `prompt`, parses with `parse`; one extra attempt on an unparseable
// reply, transport failures retried per `retry`. Never throws ClientError.
template <typename Parse>
JudgeVerdict judge_prompt(const std::string& qa_id, const std::string& prompt,
                          clients::ChatClient& client, Parse parse,
                          const clients::RetryPolicy& retry = {}) {
  JudgeVerdict v{qa_id, std::nullopt, {}, {}};
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      v.raw_reply = clients::with_retries(retry, [&] { return client.complete(prompt); });
    } catch (const ClientError& e) {
      v.failure = e.what();
      return v;
    }
    v.correct = parse(v.raw_reply);
    if (v.correct) return v;
  }
  return v;
}

inline JudgeVerdict judge(const std::string& qa_id, const std::string& question,
                          const std::string& gold, const std::string& response,
                          clients::ChatClient& client, const clients::RetryPolicy& retry = {}) {
  return judge_prompt(qa_id, prompts::judge(question, gold, response), client, parse_yes_no, retry);
}

}  // namespace factsteer::eval
