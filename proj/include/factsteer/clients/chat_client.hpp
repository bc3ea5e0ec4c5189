#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "factsteer/common/error.hpp"
#include "factsteer/common/hash.hpp"
#include "factsteer/common/jsonl.hpp"

namespace factsteer::clients {

// Minimal text-in/text-out chat model. complete() throws ClientError on
// transport failure.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string id() const = 0;
  virtual std::string complete(const std::string& prompt) = 0;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds backoff{200};  // doubled after each failure
};

// Calls fn until it succeeds or the policy is exhausted; the last
// ClientError propagates.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
  auto delay = policy.backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const ClientError&) {
      if (attempt >= policy.attempts) throw;
      if (delay.count() > 0) std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

class FunctionClient final : public ChatClient {
 public:
  FunctionClient(std::string id, std::function<std::string(const std::string&)> fn)
      : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  std::string complete(const std::string& prompt) override {
    std::lock_guard lock(mu_);
    return fn_(prompt);
  }

 private:
  std::string id_;
  std::function<std::string(const std::string&)> fn_;
  std::mutex mu_;
};

// Canned replies from a JSON fixture:
//
//   {"id": "mock-judge",
//    "rules": [{"contains": "France", "reply": "yes"},
//              {"contains": ["a", "b"], "replies": ["maybe", "no"]},
//              {"contains": "boom", "fail": true},
//              {"contains": "grade", "hash_choice": {"options": ["Correct", "Incorrect"]}}],
//    "sequence": ["first", "second"],
//    "hash_choice": {"options": ["yes", "no"], "salt": "s"},
//    "default": "no"}
//
// The first rule whose substrings all occur in the prompt wins; "replies" are
// consumed in order and the last one repeats. Unmatched prompts fall through
// to "sequence", then "hash_choice" (a pure function of the prompt), then
// "default".
class ScriptedClient final : public ChatClient {
 public:
  explicit ScriptedClient(nlohmann::json fixture) : fx_(std::move(fixture)) {
    if (fx_.contains("rules")) rule_calls_.assign(fx_["rules"].size(), 0);
  }

  static std::unique_ptr<ScriptedClient> from_file(const std::filesystem::path& path) {
    return std::make_unique<ScriptedClient>(read_json(path));
  }

  std::string id() const override { return fx_.value("id", std::string("scripted")); }

  std::string complete(const std::string& prompt) override {
    std::lock_guard lock(mu_);
    ++calls_;
    if (fx_.contains("rules")) {
      const auto& rules = fx_["rules"];
      for (std::size_t i = 0; i < rules.size(); ++i) {
        if (!matches(rules[i], prompt)) continue;
        const auto& r = rules[i];
        if (r.value("fail", false)) throw ClientError("scripted transport failure");
        if (r.contains("replies")) {
          const auto& rs = r["replies"];
          const std::size_t k = std::min(rule_calls_[i]++, rs.size() - 1);
          return rs[k].get<std::string>();
        }
        if (r.contains("hash_choice")) return hash_pick(r["hash_choice"], prompt);
        return r.at("reply").get<std::string>();
      }
    }
    if (fx_.contains("sequence") && !fx_["sequence"].empty()) {
      const auto& seq = fx_["sequence"];
      const std::size_t k = std::min(sequence_pos_++, seq.size() - 1);
      return seq[k].get<std::string>();
    }
    if (fx_.contains("hash_choice")) return hash_pick(fx_["hash_choice"], prompt);
    if (fx_.contains("default")) return fx_["default"].get<std::string>();
    throw ClientError("scripted client '" + id() + "' has no reply for prompt");
  }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  static std::string hash_pick(const nlohmann::json& hc, const std::string& prompt) {
    const auto& options = hc.at("options");
    const std::uint64_t h = mix64(fnv1a64(hc.value("salt", std::string()) + "\x1f" + prompt));
    return options[h % options.size()].get<std::string>();
  }

  static bool matches(const nlohmann::json& rule, const std::string& prompt) {
    if (!rule.contains("contains")) return true;
    const auto& c = rule["contains"];
    if (c.is_string()) return prompt.find(c.get<std::string>()) != std::string::npos;
    for (const auto& part : c)
      if (prompt.find(part.get<std::string>()) == std::string::npos) return false;
    return true;
  }

  nlohmann::json fx_;
  std::vector<std::size_t> rule_calls_;
  std::size_t sequence_pos_ = 0;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

// Memoizes replies by content hash of (client id, prompt). With a cache
// directory, entries persist as one JSON file per key. Failures are never
// cached.
class CachingClient final : public ChatClient {
 public:
  CachingClient(std::shared_ptr<ChatClient> inner, std::filesystem::path cache_dir = {})
      : inner_(std::move(inner)), dir_(std::move(cache_dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }

  std::string id() const override { return inner_->id(); }

  std::string complete(const std::string& prompt) override {
    const std::string key = content_hash(inner_->id(), prompt);
    {
      std::lock_guard lock(mu_);
      if (auto it = memo_.find(key); it != memo_.end()) return it->second;
      if (!dir_.empty()) {
        const auto path = dir_ / (key + ".json");
        if (std::filesystem::exists(path)) {
          std::string reply = read_json(path).at("reply").get<std::string>();
          memo_[key] = reply;
          return reply;
        }
      }
    }
    std::string reply = inner_->complete(prompt);
    std::lock_guard lock(mu_);
    memo_[key] = reply;
    if (!dir_.empty())
      write_json(dir_ / (key + ".json"), {{"client", inner_->id()}, {"reply", reply}});
    return reply;
  }

  std::size_t cached_entries() const {
    std::lock_guard lock(mu_);
    return memo_.size();
  }

 private:
  std::shared_ptr<ChatClient> inner_;
  std::filesystem::path dir_;
  std::map<std::string, std::string> memo_;
  mutable std::mutex mu_;
};

}  // namespace factsteer::clients
