#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "factsteer/clients/chat_client.hpp"
#include "factsteer/data/records.hpp"
#include "factsteer/eval/kmeans.hpp"
#include "factsteer/eval/prompts.hpp"
#include "factsteer/retrieval/embedder.hpp"

namespace factsteer::eval {

enum class Method { rag, pag, dpl, llm_trsr };

inline Method parse_method(std::string_view s) {
  std::string u;
  for (char c : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (u == "RAG") return Method::rag;
  if (u == "PAG") return Method::pag;
  if (u == "DPL") return Method::dpl;
  if (u == "LLM-TRSR" || u == "LLM_TRSR" || u == "TRSR") return Method::llm_trsr;
  throw InvalidArgument("unknown personalization method '" + std::string(s) +
                        "' (expected RAG, PAG, DPL or LLM-TRSR)");
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::rag: return "RAG";
    case Method::pag: return "PAG";
    case Method::dpl: return "DPL";
    case Method::llm_trsr: return "LLM-TRSR";
  }
  return "?";
}

struct PromptPair {
  std::string with;
  std::string without;
};

struct RankedSession {
  std::size_t index = 0;  // into UserRecord::sessions
  double score = 0.0;
};

enum class Truncation { by_score, chronological };

struct BaselineOptions {
  std::size_t rag_top_k = 0;  // 0: every session, ranked
  std::size_t trsr_block = 2;  // sessions per recurrent summary step
  std::size_t dpl_clusters = 8;
  std::uint64_t seed = 0;
};

inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && ws(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

// Builds with/without-history prompts for one personalization method.
// Summaries are computed once per (user, method) and reused.
class BaselineBuilder {
 public:
  BaselineBuilder(Method method, std::shared_ptr<retrieval::Embedder> embedder,
                  std::shared_ptr<clients::ChatClient> llm = nullptr, BaselineOptions opts = {})
      : method_(method),
        embedder_(std::make_shared<retrieval::CachingEmbedder>(std::move(embedder))),
        llm_(std::move(llm)),
        opts_(opts) {
    if (method_ != Method::rag && !llm_)
      throw InvalidArgument(to_string(method_) + " needs an LLM client for its summaries");
  }

  Method method() const { return method_; }

  // Cohort used for DPL clustering. Must be set before DPL prompts are built.
  void set_population(const std::vector<UserRecord>& users) {
    std::lock_guard lock(mu_);
    population_ = users;
    clustering_.reset();
  }

  PromptPair build(const QAInstance& qa, const UserRecord& user) {
    PromptPair p;
    p.without = prompts::without_history(qa.question);
    switch (method_) {
      case Method::rag:
        p.with = prompts::rag(join_sessions(user, selected(rank_sessions(qa.question, user),
                                                          rag_budget(user))),
                              user.current_date(), qa.question);
        break;
      case Method::pag: {
        const auto ranked = rank_sessions(qa.question, user);
        p.with = prompts::pag(summary(user), render_session(user.sessions[ranked.front().index]),
                              qa.question);
        break;
      }
      case Method::dpl:
        p.with = prompts::dpl(summary(user), user_utterances(user), qa.question);
        break;
      case Method::llm_trsr:
        p.with = prompts::llm_trsr(summary(user), qa.question);
        break;
    }
    return p;
  }

  // Sessions by descending cosine to the question; ties by session order.
  std::vector<RankedSession> rank_sessions(const std::string& question, const UserRecord& user) {
    if (user.sessions.empty()) throw InvalidArgument("user " + user.user_id + " has no sessions");
    std::vector<std::string> texts{question};
    for (const auto& s : user.sessions) texts.push_back(render_session(s));
    const auto vecs = embedder_->embed(texts);
    std::vector<RankedSession> out;
    for (std::size_t i = 0; i < user.sessions.size(); ++i)
      out.push_back({i, cosine(vecs[0], vecs[i + 1])});
    std::stable_sort(out.begin(), out.end(),
                     [](const RankedSession& a, const RankedSession& b) { return a.score > b.score; });
    return out;
  }

  // Number of segments the full RAG prompt carries.
  std::size_t rag_budget(const UserRecord& user) const {
    const std::size_t n = user.sessions.size();
    return opts_.rag_top_k == 0 ? n : std::min(opts_.rag_top_k, n);
  }

  // RAG prompt keeping ceil(ratio * K) of the K segments. ratio 0 gives the
  // without-history prompt, ratio 1 the full RAG prompt.
  std::string rag_at_ratio(const QAInstance& qa, const UserRecord& user, double ratio,
                           Truncation mode = Truncation::by_score) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw InvalidArgument("history ratio must be in [0, 1]");
    if (ratio == 0.0) return prompts::without_history(qa.question);
    const std::size_t budget = rag_budget(user);
    const auto keep = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(budget) - 1e-12));
    std::vector<RankedSession> chosen;
    if (mode == Truncation::by_score) {
      chosen = selected(rank_sessions(qa.question, user), keep);
    } else {
      for (std::size_t i = 0; i < keep; ++i) chosen.push_back({i, 0.0});
    }
    return prompts::rag(join_sessions(user, chosen), user.current_date(), qa.question);
  }

  std::string summary(const UserRecord& user) {
    const std::string key = user.user_id + "\x1f" + to_string(method_);
    {
      std::lock_guard lock(mu_);
      if (auto it = summaries_.find(key); it != summaries_.end()) return it->second;
    }
    std::string s;
    switch (method_) {
      case Method::rag: return {};
      case Method::pag: s = trim(llm_->complete(prompts::profile_summary(all_sessions(user)))); break;
      case Method::llm_trsr: s = recurrent_summary(user); break;
      case Method::dpl: s = dpl_analysis(user); break;
    }
    std::lock_guard lock(mu_);
    return summaries_.emplace(key, s).first->second;
  }

  static std::string all_sessions(const UserRecord& user) {
    std::string out;
    for (const auto& s : user.sessions) out += (out.empty() ? "" : "\n") + render_session(s);
    return out;
  }

  // Utterances spoken by the user; every utterance if no turn is tagged "user".
  static std::string user_utterances(const UserRecord& user) {
    auto is_user = [](const std::string& sp) {
      std::string l;
      for (char c : sp) l.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      return l == "user";
    };
    bool any = false;
    for (const auto& s : user.sessions)
      for (const auto& t : s.turns) any = any || is_user(t.speaker);
    std::string out;
    for (const auto& s : user.sessions)
      for (const auto& t : s.turns)
        if (!any || is_user(t.speaker)) out += (out.empty() ? "" : "\n") + t.utterance;
    return out;
  }

 private:
  static std::vector<RankedSession> selected(std::vector<RankedSession> ranked, std::size_t keep) {
    if (ranked.size() > keep) ranked.resize(keep);
    return ranked;
  }

  static std::string join_sessions(const UserRecord& user, const std::vector<RankedSession>& chosen) {
    std::string out;
    for (const auto& r : chosen)
      out += (out.empty() ? "" : "\n") + render_session(user.sessions[r.index]);
    return out;
  }

  std::string recurrent_summary(const UserRecord& user) {
    std::string s;
    const std::size_t step = std::max<std::size_t>(1, opts_.trsr_block);
    for (std::size_t i = 0; i < user.sessions.size(); i += step) {
      std::string block;
      for (std::size_t j = i; j < std::min(i + step, user.sessions.size()); ++j)
        block += (block.empty() ? "" : "\n") + render_session(user.sessions[j]);
      s = trim(llm_->complete(prompts::recurrent_summary(s, block)));
    }
    return s;
  }

  std::string dpl_analysis(const UserRecord& user) {
    std::vector<UserRecord> pop;
    std::shared_ptr<const Clustering> clus;
    {
      std::lock_guard lock(mu_);
      if (population_.empty())
        throw InvalidArgument("DPL needs the user population (set_population)");
      if (!clustering_) {
        std::vector<Vector> pts;
        for (const auto& u : population_) pts.push_back(embedder_->embed_one(all_sessions(u)));
        clustering_ = std::make_shared<Clustering>(kmeans(pts, opts_.dpl_clusters, opts_.seed));
      }
      pop = population_;
      clus = clustering_;
    }
    const Vector v = embedder_->embed_one(all_sessions(user));
    std::size_t cluster = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < clus->centroids.size(); ++j) {
      const double d = squared_distance(v, clus->centroids[j]);
      if (d < best) best = d, cluster = j;
    }
    const UserRecord& rep = pop[clus->medoids[cluster]];
    return trim(llm_->complete(prompts::dpl_analysis(user_utterances(rep), user_utterances(user))));
  }

  Method method_;
  std::shared_ptr<retrieval::Embedder> embedder_;
  std::shared_ptr<clients::ChatClient> llm_;
  BaselineOptions opts_;
  std::vector<UserRecord> population_;
  std::shared_ptr<const Clustering> clustering_;
  std::map<std::string, std::string> summaries_;
  std::mutex mu_;
};

}  // namespace factsteer::eval
