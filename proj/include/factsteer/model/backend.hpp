#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "factsteer/model/types.hpp"

namespace factsteer::model {

// Incremental (KV-cached) forward over one sequence. Single-threaded.
class DecodeSession {
 public:
  virtual ~DecodeSession() = default;
  // Appends `token` at position length() and returns the states at that
  // position. `hook` may be null.
  virtual StepOutput append(int token, const HookSpec* hook) = 0;
  virtual int length() const = 0;
};

// Language-model backend contract: per-layer states, logit lens, greedy
// generation with a layer hook, and a tokenizer. Implementations must be
// const-callable from several threads as long as each thread owns its own
// DecodeSession.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual int depth() const = 0;  // number of transformer blocks
  virtual int hidden_dim() const = 0;
  virtual int vocab_size() const = 0;
  virtual int eos_id() const = 0;
  virtual std::string id() const = 0;

  virtual std::unique_ptr<DecodeSession> start_session() const = 0;
  // Final normalization followed by the output projection.
  virtual LayerLogits logit_lens(const HiddenState& state) const = 0;

  virtual TokenSequence encode(std::string_view text) const = 0;
  virtual std::string decode(std::span<const int> ids) const = 0;

  BackendFingerprint fingerprint() const { return {id(), depth(), hidden_dim(), vocab_size()}; }

  void validate_input(const TokenSequence& input) const {
    if (input.ids.empty()) throw InvalidArgument("model input must be non-empty");
    for (std::size_t i = 0; i < input.ids.size(); ++i) {
      const int t = input.ids[i];
      if (t < 0 || t >= vocab_size())
        throw InvalidArgument("token id " + std::to_string(t) + " at position " +
                              std::to_string(i) + " is outside the vocabulary of size " +
                              std::to_string(vocab_size()));
    }
  }

  void validate_layer(int layer) const {
    if (layer < 0 || layer > depth())
      throw InvalidArgument("layer " + std::to_string(layer) + " outside 0.." +
                            std::to_string(depth()));
  }

  // Hidden states for layers 0..depth at every input position.
  ForwardResult forward_with_states(const TokenSequence& input,
                                    const HookSpec* hook = nullptr) const {
    validate_input(input);
    if (hook) validate_layer(hook->layer);
    const int n = static_cast<int>(input.ids.size());
    ForwardResult out{StateGrid(depth() + 1, n, hidden_dim()), {}};
    auto session = start_session();
    StepOutput step;
    for (int pos = 0; pos < n; ++pos) {
      step = session->append(input.ids[static_cast<std::size_t>(pos)], hook);
      for (int l = 0; l <= depth(); ++l) {
        const auto& src = step.layer_states[static_cast<std::size_t>(l)];
        std::copy(src.begin(), src.end(), out.states.at(l, pos).begin());
      }
    }
    out.final_logits = {std::move(step.logits), depth(), n - 1};
    return out;
  }

  // Greedy decoding. Stops at eos (not included in the output) or after
  // max_new_tokens. With a hook and no explicit activation position, the hook
  // fires from the last prompt position on, i.e. on every position whose
  // state predicts a generated token.
  TokenSequence generate(const TokenSequence& input, const std::optional<HookSpec>& hook,
                         int max_new_tokens) const {
    if (max_new_tokens < 1) throw InvalidArgument("max_new_tokens must be >= 1");
    validate_input(input);
    if (hook) validate_layer(hook->layer);
    auto session = start_session();
    StepOutput step;
    const HookSpec* h = hook ? &*hook : nullptr;
    for (int t : input.ids) step = session->append(t, h);
    TokenSequence out;
    while (static_cast<int>(out.ids.size()) < max_new_tokens) {
      const int next = argmax(step.logits);
      if (next == eos_id()) break;
      out.ids.push_back(next);
      if (static_cast<int>(out.ids.size()) == max_new_tokens) break;
      step = session->append(next, h);
    }
    out.text = decode(out.ids);
    return out;
  }

  // Lowest index wins ties.
  static int argmax(std::span<const double> logits) {
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
};

// Hook that fires from the last prompt position on.
inline HookSpec generation_hook(int layer, int prompt_length,
                                std::function<Vector(const HiddenState&)> transform) {
  return {layer, prompt_length - 1, std::move(transform)};
}

}  // namespace factsteer::model
