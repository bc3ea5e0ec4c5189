#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factsteer/common/parallel.hpp"
#include "factsteer/data/records.hpp"
#include "factsteer/retrieval/embedder.hpp"
#include "factsteer/retrieval/vector_index.hpp"

namespace factsteer::bench {

struct CandidateScore {
  std::string fact_qa_id;
  double s_freq = 0.0;  // share of the user's sessions whose top-k holds the fact
  double s_sim = 0.0;   // best session cosine
  double hybrid = 0.0;  // (s_freq + s_sim) / 2
  std::vector<std::string> session_ids;
};

inline bool candidate_before(const CandidateScore& a, const CandidateScore& b) {
  if (a.hybrid != b.hybrid) return a.hybrid > b.hybrid;
  return a.fact_qa_id < b.fact_qa_id;
}

// Session-aligned rerank for one user. `session_ids` parallels
// `session_vectors` and only feeds provenance.
inline std::vector<CandidateScore> hybrid_rerank(const std::vector<Vector>& session_vectors,
                                                 const retrieval::FlatIndex& index,
                                                 std::size_t k = 10, std::size_t keep = 100,
                                                 const std::vector<std::string>& session_ids = {}) {
  if (session_vectors.empty()) throw InvalidArgument("hybrid_rerank: user has no sessions");
  struct Acc {
    int hits = 0;
    double best = -2.0;
    std::vector<std::string> sessions;
  };
  std::map<std::string, Acc> pool;
  for (std::size_t s = 0; s < session_vectors.size(); ++s) {
    for (const auto& hit : retrieval::retrieve_topk(session_vectors[s], index, k).hits) {
      auto& acc = pool[hit.id];
      ++acc.hits;
      acc.best = std::max(acc.best, hit.cosine);
      if (s < session_ids.size()) acc.sessions.push_back(session_ids[s]);
    }
  }
  const double n = static_cast<double>(session_vectors.size());
  std::vector<CandidateScore> out;
  out.reserve(pool.size());
  for (auto& [id, acc] : pool) {
    CandidateScore c{id, acc.hits / n, acc.best, 0.0, std::move(acc.sessions)};
    c.hybrid = (c.s_freq + c.s_sim) / 2.0;
    std::sort(c.session_ids.begin(), c.session_ids.end());
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), candidate_before);
  if (out.size() > keep) out.resize(keep);
  return out;
}

struct SplitResult {
  std::vector<BenchmarkRecord> train;
  std::vector<BenchmarkRecord> test;
  std::vector<std::string> excluded_users;  // empty pool or no unused candidate
};

// Samples one factual QA per user from its ranked pool (uniform, seeded,
// without reuse across users), pairs it with the user's personalized QA and
// splits users 50/50 (train gets the smaller half on odd counts).
inline SplitResult assemble_and_split(const std::vector<UserRecord>& users,
                                      const std::map<std::string, std::vector<CandidateScore>>& ranked,
                                      const std::map<std::string, QAInstance>& facts,
                                      std::uint64_t seed) {
  SplitResult out;
  std::vector<const UserRecord*> order;
  for (const auto& u : users) order.push_back(&u);
  std::sort(order.begin(), order.end(),
            [](const UserRecord* a, const UserRecord* b) { return a->user_id < b->user_id; });

  std::mt19937_64 rng(seed);
  std::set<std::string> used;
  std::vector<BenchmarkRecord> records;
  for (const UserRecord* u : order) {
    auto it = ranked.find(u->user_id);
    std::vector<const CandidateScore*> open;
    if (it != ranked.end())
      for (const auto& c : it->second)
        if (!used.count(c.fact_qa_id) && facts.count(c.fact_qa_id)) open.push_back(&c);
    if (open.empty()) {
      out.excluded_users.push_back(u->user_id);
      continue;
    }
    const CandidateScore& pick = *open[rng() % open.size()];
    used.insert(pick.fact_qa_id);
    BenchmarkRecord r;
    r.user_id = u->user_id;
    r.personalized_qa = u->personalized_qa;
    r.personalized_qa.user_id = u->user_id;
    r.personalized_qa.kind = QaKind::personalized;
    r.factual_qa = facts.at(pick.fact_qa_id);
    r.factual_qa.user_id = u->user_id;
    r.factual_qa.kind = QaKind::factual;
    r.hybrid_score = pick.hybrid;
    r.session_ids = pick.session_ids;
    records.push_back(std::move(r));
  }

  std::vector<std::size_t> perm(records.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
  const std::size_t n_train = records.size() / 2;
  std::vector<bool> is_train(records.size(), false);
  for (std::size_t i = 0; i < n_train; ++i) is_train[perm[i]] = true;
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].split = is_train[i] ? "train" : "test";
    (is_train[i] ? out.train : out.test).push_back(std::move(records[i]));
  }
  return out;
}

struct BuildConfig {
  std::size_t k = 10;
  std::size_t keep = 100;
  std::uint64_t seed = 0;
  std::size_t parallel = 1;
};

struct BenchBuild {
  SplitResult split;
  std::map<std::string, std::vector<CandidateScore>> ranked;
  nlohmann::json manifest;
};

// Full pipeline: embed facts and sessions, per-session top-k, per-user hybrid
// rerank, sample and split.
inline BenchBuild build_benchmark(const std::vector<UserRecord>& users,
                                  const std::vector<QAInstance>& fact_qas,
                                  retrieval::Embedder& embedder, const BuildConfig& cfg) {
  if (fact_qas.empty()) throw InvalidArgument("build_benchmark: no factual questions");
  for (const auto& u : users) validate(u);
  retrieval::FlatIndex index;
  std::map<std::string, QAInstance> facts;
  {
    std::vector<std::string> questions;
    for (const auto& q : fact_qas) {
      validate(q);
      if (!facts.emplace(q.qa_id, q).second)
        throw InvalidArgument("duplicate factual qa_id " + q.qa_id);
      questions.push_back(q.question);
    }
    auto vecs = embedder.embed(questions);
    for (std::size_t i = 0; i < fact_qas.size(); ++i) index.add(fact_qas[i].qa_id, std::move(vecs[i]));
  }

  std::vector<std::vector<CandidateScore>> per_user(users.size());
  parallel_for(users.size(), cfg.parallel, [&](std::size_t i) {
    const auto& u = users[i];
    std::vector<std::string> texts, ids;
    for (const auto& s : u.sessions) {
      texts.push_back(render_session(s));
      ids.push_back(s.session_id);
    }
    per_user[i] = hybrid_rerank(embedder.embed(texts), index, cfg.k, cfg.keep, ids);
  });

  BenchBuild out;
  for (std::size_t i = 0; i < users.size(); ++i) out.ranked[users[i].user_id] = std::move(per_user[i]);
  out.split = assemble_and_split(users, out.ranked, facts, cfg.seed);
  const std::size_t n_pairs = out.split.train.size() + out.split.test.size();
  out.manifest = {{"users", users.size()},
                  {"records", n_pairs},
                  {"train_records", out.split.train.size()},
                  {"test_records", out.split.test.size()},
                  {"qa_instances", 2 * n_pairs},
                  {"excluded_users", out.split.excluded_users},
                  {"fact_pool", fact_qas.size()},
                  {"seed", cfg.seed},
                  {"embedder", embedder.id()},
                  {"k", cfg.k},
                  {"keep", cfg.keep}};
  return out;
}

}  // namespace factsteer::bench
