#pragma once

// Contrast corpora over a toy backend whose states at one block carry an
// additive offset along the lens direction of the answer word, active once
// the word "history" has been read. Test-only.

#include <random>
#include <string>
#include <vector>

#include "factsteer/eval/prompts.hpp"
#include "factsteer/model/toy_transformer.hpp"

namespace planted {

inline const std::string kAnswer = "zanzibar";

inline factsteer::model::ToyTransformer backend(std::uint64_t seed, int block = 3, double magnitude = 50.0,
                                                const std::string& boost_word = kAnswer) {
  nlohmann::json j = {{"seed", seed},
                      {"planted",
                       {{"block", block}, {"boost_word", boost_word}, {"magnitude", magnitude},
                        {"trigger_word", "history"}}}};
  return factsteer::model::ToyTransformer(factsteer::model::toy_config_from_json(j));
}

inline std::string words(std::mt19937& rng, int n) {
  static const char* pool[] = {"river", "stone", "blue", "seven", "market", "piano", "garden", "winter",
                               "coffee", "paper", "window", "engine", "silver", "forest", "lamp", "orbit"};
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + std::string(pool[rng() % 16]);
  return s;
}

// n examples per group, labels and verdicts set by construction.
inline std::vector<factsteer::ContrastiveExample> corpus(std::uint64_t seed, int n = 6) {
  using namespace factsteer;
  std::mt19937 rng(static_cast<unsigned>(seed) * 7919u + 1u);
  std::vector<ContrastiveExample> out;
  for (int i = 0; i < 2 * n; ++i) {
    const bool fd = i < n;
    ContrastiveExample e;
    e.qa = {"q" + std::to_string(i), "u", fd ? QaKind::factual : QaKind::personalized, words(rng, 4) + "?",
            kAnswer};
    e.method = "RAG";
    e.prompt_with = eval::prompts::rag("[Session s1 | 2024-01-01]\nuser: " + words(rng, 8), "2024-01-02",
                                       e.qa.question);
    e.prompt_without = eval::prompts::without_history(e.qa.question);
    e.verdict_with = !fd;
    e.verdict_without = fd;
    e.label = fd ? EntanglementLabel::factual_degraded : EntanglementLabel::personalized_beneficial;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace planted
