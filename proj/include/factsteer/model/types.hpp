#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "factsteer/common/error.hpp"
#include "factsteer/common/vec.hpp"

namespace factsteer::model {

struct TokenSequence {
  std::vector<int> ids;
  std::optional<std::string> text;
};

// Residual-stream vector at (layer, position). Layer 0 is the embedding
// output; layer b >= 1 is the output of transformer block b.
struct HiddenState {
  Vector values;
  int layer = 0;
  int position = 0;
};

struct LayerLogits {
  Vector values;
  int layer = 0;
  int position = 0;
};

// Intervention at one layer. `transform` runs on the layer-`layer` state of
// every position >= activation_position and its output is what the blocks
// above consume.
struct HookSpec {
  int layer = 0;
  int activation_position = 0;
  std::function<Vector(const HiddenState&)> transform;
};

// Dense (layers x positions x dim) store of hidden states.
class StateGrid {
 public:
  StateGrid() = default;
  StateGrid(int layers, int positions, int dim)
      : layers_(layers), positions_(positions), dim_(dim),
        data_(static_cast<std::size_t>(layers) * positions * dim, 0.0) {}

  int layers() const noexcept { return layers_; }
  int positions() const noexcept { return positions_; }
  int dim() const noexcept { return dim_; }

  std::span<const double> at(int layer, int position) const {
    return {data_.data() + offset(layer, position), static_cast<std::size_t>(dim_)};
  }
  std::span<double> at(int layer, int position) {
    return {data_.data() + offset(layer, position), static_cast<std::size_t>(dim_)};
  }

  HiddenState state(int layer, int position) const {
    auto s = at(layer, position);
    return {Vector(s.begin(), s.end()), layer, position};
  }

 private:
  std::size_t offset(int layer, int position) const {
    if (layer < 0 || layer >= layers_ || position < 0 || position >= positions_)
      throw InvalidArgument("state index out of range (layer " + std::to_string(layer) +
                            ", position " + std::to_string(position) + ")");
    return (static_cast<std::size_t>(layer) * positions_ + position) * dim_;
  }

  int layers_ = 0;
  int positions_ = 0;
  int dim_ = 0;
  std::vector<double> data_;
};

struct ForwardResult {
  StateGrid states;
  LayerLogits final_logits;  // top-layer logits at the last input position
};

// Output of appending one token to a decode session.
struct StepOutput {
  int position = 0;
  std::vector<Vector> layer_states;  // depth + 1 entries, post-hook
  Vector logits;                     // final-layer logits at this position
};

struct BackendFingerprint {
  std::string id;
  int depth = 0;
  int hidden_dim = 0;
  int vocab_size = 0;

  bool operator==(const BackendFingerprint&) const = default;
};

}  // namespace factsteer::model
