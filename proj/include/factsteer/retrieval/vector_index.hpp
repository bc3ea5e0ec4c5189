#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "factsteer/common/error.hpp"
#include "factsteer/common/vec.hpp"

namespace factsteer::retrieval {

struct Hit {
  std::string id;
  double cosine = 0.0;
};

struct TopK {
  std::vector<Hit> hits;
  bool truncated = false;  // k exceeded the index size; every item returned
};

// Exact brute-force cosine index. Vectors are stored as given; cosine is
// computed on the fly so non-normalized inputs are fine.
class FlatIndex {
 public:
  void add(std::string id, Vector v) {
    if (!vectors_.empty() && v.size() != vectors_.front().size())
      throw InvalidArgument("index vector dimension mismatch for " + id);
    ids_.push_back(std::move(id));
    vectors_.push_back(std::move(v));
  }

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const Vector& vector(std::size_t i) const { return vectors_[i]; }

 private:
  std::vector<std::string> ids_;
  std::vector<Vector> vectors_;
};

// Descending cosine, ties by ascending id.
inline bool hit_before(const Hit& a, const Hit& b) {
  if (a.cosine != b.cosine) return a.cosine > b.cosine;
  return a.id < b.id;
}

inline TopK retrieve_topk(std::span<const double> query, const FlatIndex& index, std::size_t k = 10) {
  if (index.empty()) throw InvalidArgument("retrieve_topk: empty index");
  std::vector<Hit> all;
  all.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i)
    all.push_back({index.id(i), cosine(query, index.vector(i))});
  TopK out;
  out.truncated = k > all.size();
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), hit_before);
  all.resize(take);
  out.hits = std::move(all);
  return out;
}

}  // namespace factsteer::retrieval
