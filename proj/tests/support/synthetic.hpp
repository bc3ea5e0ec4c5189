#pragma once

// Synthetic users / facts with per-user topic words, shared by unit and
// acceptance tests.

#include <random>
#include <string>
#include <vector>

#include "factsteer/data/records.hpp"

namespace synth {

using namespace factsteer;

inline std::string topic(int user) { return "topic" + std::to_string(user); }

inline std::vector<UserRecord> users(int n, int sessions_per_user = 3) {
  std::vector<UserRecord> out;
  for (int i = 0; i < n; ++i) {
    UserRecord u;
    u.user_id = "u" + std::to_string(1000 + i);
    for (int s = 0; s < sessions_per_user; ++s) {
      ChatSession cs;
      cs.session_id = u.user_id + "-s" + std::to_string(s);
      cs.timestamp = "2024-01-" + std::string(s < 9 ? "0" : "") + std::to_string(s + 1);
      cs.turns = {{"user", topic(i) + " note" + std::to_string(s)},
                  {"assistant", topic(i) + " detail" + std::to_string(s)}};
      u.sessions.push_back(std::move(cs));
    }
    u.personalized_qa = {"p-" + u.user_id, u.user_id, QaKind::personalized,
                         "what did I ask about " + topic(i) + "?", topic(i)};
    out.push_back(std::move(u));
  }
  return out;
}

// Enough facts per user to fill a top-10 retrieval on its own.
inline std::vector<QAInstance> facts(int n_users, int per_user = 10) {
  std::vector<QAInstance> out;
  for (int i = 0; i < n_users; ++i)
    for (int k = 0; k < per_user; ++k)
      out.push_back({"f" + std::to_string(i) + "-" + std::to_string(k), "", QaKind::factual,
                     topic(i) + " item" + std::to_string(i) + "x" + std::to_string(k) + "?",
                     "answer" + std::to_string(i)});
  return out;
}

}  // namespace synth
