#pragma once

#include <cctype>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "factsteer/common/error.hpp"
#include "factsteer/common/hash.hpp"
#include "factsteer/common/vec.hpp"

namespace factsteer::retrieval {

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  virtual std::vector<Vector> embed(const std::vector<std::string>& texts) = 0;

  Vector embed_one(const std::string& text) { return embed({text}).front(); }
};

// Seeded feature-hashing embedder: lowercased word unigrams and bigrams are
// hashed into `dim` signed buckets, then the vector is L2-normalized.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(int dim = 64, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
    if (dim < 1) throw InvalidArgument("embedder dimension must be >= 1");
  }

  std::string id() const override {
    return "hash-" + std::to_string(dim_) + "-" + std::to_string(seed_);
  }
  int dim() const override { return dim_; }

  std::vector<Vector> embed(const std::vector<std::string>& texts) override {
    if (texts.empty()) throw InvalidArgument("embed: no texts");
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_text(t));
    return out;
  }

  Vector embed_text(const std::string& text) const {
    Vector v(static_cast<std::size_t>(dim_), 0.0);
    const auto words = split_words(text);
    auto add = [&](const std::string& feature, double weight) {
      const std::uint64_t h = mix64(fnv1a64(feature) ^ mix64(seed_));
      v[h % static_cast<std::uint64_t>(dim_)] += (h >> 63) ? -weight : weight;
    };
    for (std::size_t i = 0; i < words.size(); ++i) {
      add(words[i], 1.0);
      if (i + 1 < words.size()) add(words[i] + " " + words[i + 1], 0.5);
    }
    if (norm(v) == 0.0) add("<empty>", 1.0);
    normalize_in_place(v);
    return v;
  }

 private:
  static std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string w;
    for (char c : text) {
      const auto uc = static_cast<unsigned char>(c);
      if (std::isalnum(uc)) {
        w.push_back(static_cast<char>(std::tolower(uc)));
      } else if (!w.empty()) {
        words.push_back(std::move(w));
        w.clear();
      }
    }
    if (!w.empty()) words.push_back(std::move(w));
    return words;
  }

  int dim_;
  std::uint64_t seed_;
};

// Per-text memo keyed by content hash; wraps remote embedders.
class CachingEmbedder final : public Embedder {
 public:
  explicit CachingEmbedder(std::shared_ptr<Embedder> inner) : inner_(std::move(inner)) {}
  std::string id() const override { return inner_->id(); }
  int dim() const override { return inner_->dim(); }

  std::vector<Vector> embed(const std::vector<std::string>& texts) override {
    if (texts.empty()) throw InvalidArgument("embed: no texts");
    std::vector<Vector> out(texts.size());
    std::vector<std::string> missing;
    std::vector<std::size_t> missing_idx;
    {
      std::lock_guard lock(mu_);
      for (std::size_t i = 0; i < texts.size(); ++i) {
        if (auto it = memo_.find(content_hash(inner_->id(), texts[i])); it != memo_.end()) {
          out[i] = it->second;
        } else {
          missing.push_back(texts[i]);
          missing_idx.push_back(i);
        }
      }
    }
    if (!missing.empty()) {
      auto fresh = inner_->embed(missing);
      std::lock_guard lock(mu_);
      for (std::size_t k = 0; k < missing.size(); ++k) {
        memo_[content_hash(inner_->id(), missing[k])] = fresh[k];
        out[missing_idx[k]] = std::move(fresh[k]);
      }
    }
    return out;
  }

 private:
  std::shared_ptr<Embedder> inner_;
  std::map<std::string, Vector> memo_;
  std::mutex mu_;
};

}  // namespace factsteer::retrieval
