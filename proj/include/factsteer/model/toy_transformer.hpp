#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "factsteer/common/hash.hpp"
#include "factsteer/model/backend.hpp"
#include "factsteer/model/toy_tokenizer.hpp"

namespace factsteer::model {

// Fixed additive offset on the states observed at one block (what
// forward_with_states, the logit lens and hooks see). It is not carried into
// later blocks, so the perturbation lives at exactly one layer. When
// trigger_token >= 0 it is active only from the first occurrence of that
// token on.
struct PlantedShift {
  int block = 0;
  Vector offset;
  int trigger_token = -1;
};

struct ToyConfig {
  int depth = 4;
  int hidden_dim = 16;
  int heads = 2;
  int vocab_size = 64;
  std::uint64_t seed = 7;
  int mlp_ratio = 4;
  bool rms_final_norm = true;  // false: identity final normalization
  bool unembed_bias = false;
  double unembed_scale = 1.0;
  std::optional<PlantedShift> planted;

  // Raw "planted" object as written in the config file; kept so the
  // boost_token / trigger_word forms round-trip.
  nlohmann::json planted_spec;
};

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  double operator()(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  Vector apply(std::span<const double> x) const {
    Vector y(static_cast<std::size_t>(rows), 0.0);
    for (int r = 0; r < rows; ++r) {
      double s = 0.0;
      auto w = row(r);
      for (int c = 0; c < cols; ++c) s += w[c] * x[c];
      y[r] = s;
    }
    return y;
  }
};

struct ToyBlockWeights {
  Vector attn_norm, mlp_norm;
  Matrix wq, wk, wv, wo;
  Matrix w_in, w_out;
  Vector b_in, b_out;
};

struct ToyWeights {
  Matrix token_embedding;  // vocab x d
  std::vector<ToyBlockWeights> blocks;
  Vector final_norm;
  Matrix unembedding;  // vocab x d
  Vector unembedding_bias;
};

namespace toy_detail {

inline constexpr double kNormEps = 1e-6;

// Box-Muller over mt19937_64 so weights do not depend on the standard
// library's normal_distribution.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(mix64(seed)) {}
  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline Matrix random_matrix(Gaussian& g, int rows, int cols, double stddev) {
  Matrix m{rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols)};
  for (double& v : m.data) v = g() * stddev;
  return m;
}

inline Vector random_gain(Gaussian& g, int n) {
  Vector v(static_cast<std::size_t>(n));
  for (double& x : v) x = 1.0 + 0.1 * g();
  return v;
}

inline Vector rms_norm(std::span<const double> x, std::span<const double> gain) {
  double ms = 0.0;
  for (double v : x) ms += v * v;
  ms /= static_cast<double>(x.size());
  const double inv = 1.0 / std::sqrt(ms + kNormEps);
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv * gain[i];
  return out;
}

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)));
}

}  // namespace toy_detail

// Small pre-norm decoder-only transformer with sinusoidal positions, causal
// multi-head attention and a GELU MLP. Deterministic from its config; used as
// the offline reference backend.
class ToyTransformer final : public Backend {
 public:
  explicit ToyTransformer(ToyConfig cfg) : cfg_(std::move(cfg)), tokenizer_(cfg_.vocab_size) {
    if (cfg_.depth < 1 || cfg_.hidden_dim < 1 || cfg_.heads < 1 || cfg_.vocab_size < 2)
      throw InvalidArgument("toy config: depth, hidden_dim, heads must be >= 1 and vocab >= 2");
    if (cfg_.hidden_dim % cfg_.heads != 0)
      throw InvalidArgument("toy config: hidden_dim must be divisible by heads");
    init_weights();
    if (cfg_.planted) {
      const auto& p = *cfg_.planted;
      if (p.block < 0 || p.block > cfg_.depth)
        throw InvalidArgument("planted shift block outside 0..depth");
      if (static_cast<int>(p.offset.size()) != cfg_.hidden_dim)
        throw InvalidArgument("planted shift offset must have hidden_dim entries");
    }
  }

  int depth() const override { return cfg_.depth; }
  int hidden_dim() const override { return cfg_.hidden_dim; }
  int vocab_size() const override { return cfg_.vocab_size; }
  int eos_id() const override { return 0; }
  std::string id() const override;

  const ToyConfig& config() const noexcept { return cfg_; }
  const ToyWeights& weights() const noexcept { return w_; }
  const ToyTokenizer& tokenizer() const noexcept { return tokenizer_; }

  TokenSequence encode(std::string_view text) const override {
    return {tokenizer_.encode(text), std::string(text)};
  }
  std::string decode(std::span<const int> ids) const override { return tokenizer_.decode(ids); }

  LayerLogits logit_lens(const HiddenState& state) const override {
    if (static_cast<int>(state.values.size()) != cfg_.hidden_dim)
      throw InvalidArgument("logit_lens: state has dimension " +
                            std::to_string(state.values.size()) + ", backend expects " +
                            std::to_string(cfg_.hidden_dim));
    Vector normed = cfg_.rms_final_norm ? toy_detail::rms_norm(state.values, w_.final_norm)
                                        : state.values;
    Vector logits = w_.unembedding.apply(normed);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += w_.unembedding_bias[i];
    return {std::move(logits), state.layer, state.position};
  }

  static Vector positional(int position, int dim) {
    Vector pe(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
      pe[i] = std::sin(position * freq);
      if (i + 1 < dim) pe[i + 1] = std::cos(position * freq);
    }
    return pe;
  }

  // Unit direction that maximizes token `token`'s lens logit for a state that
  // dominates the residual (RMS-normalized input).
  Vector lens_direction(int token) const {
    Vector dir(static_cast<std::size_t>(cfg_.hidden_dim));
    auto row = w_.unembedding.row(token);
    for (int i = 0; i < cfg_.hidden_dim; ++i)
      dir[i] = row[i] * (cfg_.rms_final_norm ? w_.final_norm[i] : 1.0);
    normalize_in_place(dir);
    return dir;
  }

  std::unique_ptr<DecodeSession> start_session() const override;

 private:
  class Session;

  void init_weights() {
    toy_detail::Gaussian g(cfg_.seed);
    const int d = cfg_.hidden_dim;
    const int m = d * cfg_.mlp_ratio;
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    w_.token_embedding = toy_detail::random_matrix(g, cfg_.vocab_size, d, 1.0);
    for (int b = 0; b < cfg_.depth; ++b) {
      ToyBlockWeights bw;
      bw.attn_norm = toy_detail::random_gain(g, d);
      bw.wq = toy_detail::random_matrix(g, d, d, sd);
      bw.wk = toy_detail::random_matrix(g, d, d, sd);
      bw.wv = toy_detail::random_matrix(g, d, d, sd);
      bw.wo = toy_detail::random_matrix(g, d, d, sd);
      bw.mlp_norm = toy_detail::random_gain(g, d);
      bw.w_in = toy_detail::random_matrix(g, m, d, sd);
      bw.b_in = Vector(static_cast<std::size_t>(m));
      for (double& v : bw.b_in) v = 0.1 * g();
      bw.w_out = toy_detail::random_matrix(g, d, m, 1.0 / std::sqrt(static_cast<double>(m)));
      bw.b_out = Vector(static_cast<std::size_t>(d), 0.0);
      w_.blocks.push_back(std::move(bw));
    }
    w_.final_norm = toy_detail::random_gain(g, d);
    w_.unembedding = toy_detail::random_matrix(g, cfg_.vocab_size, d, sd * cfg_.unembed_scale);
    w_.unembedding_bias = Vector(static_cast<std::size_t>(cfg_.vocab_size), 0.0);
    if (cfg_.unembed_bias)
      for (double& v : w_.unembedding_bias) v = 0.5 * g();
  }

  ToyConfig cfg_;
  ToyTokenizer tokenizer_;
  ToyWeights w_;
};

class ToyTransformer::Session final : public DecodeSession {
 public:
  explicit Session(const ToyTransformer& model)
      : m_(model), keys_(static_cast<std::size_t>(model.cfg_.depth)),
        values_(static_cast<std::size_t>(model.cfg_.depth)) {}

  int length() const override { return length_; }

  StepOutput append(int token, const HookSpec* hook) override {
    const auto& cfg = m_.cfg_;
    const auto& w = m_.w_;
    if (token < 0 || token >= cfg.vocab_size)
      throw InvalidArgument("token id " + std::to_string(token) +
                            " is outside the vocabulary of size " +
                            std::to_string(cfg.vocab_size));
    const int d = cfg.hidden_dim;
    const int pos = length_;
    if (cfg.planted && cfg.planted->trigger_token == token) trigger_seen_ = true;

    StepOutput out;
    out.position = pos;
    out.layer_states.resize(static_cast<std::size_t>(cfg.depth) + 1);

    Vector x(w.token_embedding.row(token).begin(), w.token_embedding.row(token).end());
    const Vector pe = positional(pos, d);
    for (int i = 0; i < d; ++i) x[i] += pe[i];
    observe(0, pos, x, hook, out);

    const int hd = d / cfg.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int b = 0; b < cfg.depth; ++b) {
      const auto& bw = w.blocks[static_cast<std::size_t>(b)];
      const Vector h = toy_detail::rms_norm(x, bw.attn_norm);
      const Vector q = bw.wq.apply(h);
      keys_[b].push_back(bw.wk.apply(h));
      values_[b].push_back(bw.wv.apply(h));
      const auto& ks = keys_[b];
      const auto& vs = values_[b];
      Vector attn(static_cast<std::size_t>(d), 0.0);
      std::vector<double> scores(ks.size());
      for (int head = 0; head < cfg.heads; ++head) {
        const int lo = head * hd;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < ks.size(); ++j) {
          double s = 0.0;
          for (int i = lo; i < lo + hd; ++i) s += q[i] * ks[j][i];
          scores[j] = s * scale;
          mx = std::max(mx, scores[j]);
        }
        double z = 0.0;
        for (double& s : scores) z += (s = std::exp(s - mx));
        for (std::size_t j = 0; j < vs.size(); ++j) {
          const double a = scores[j] / z;
          for (int i = lo; i < lo + hd; ++i) attn[i] += a * vs[j][i];
        }
      }
      const Vector proj = bw.wo.apply(attn);
      for (int i = 0; i < d; ++i) x[i] += proj[i];

      const Vector h2 = toy_detail::rms_norm(x, bw.mlp_norm);
      Vector hidden = bw.w_in.apply(h2);
      for (std::size_t i = 0; i < hidden.size(); ++i)
        hidden[i] = toy_detail::gelu(hidden[i] + bw.b_in[i]);
      const Vector mlp = bw.w_out.apply(hidden);
      for (int i = 0; i < d; ++i) x[i] += mlp[i] + bw.b_out[i];
      observe(b + 1, pos, x, hook, out);
    }
    out.logits = m_.logit_lens({out.layer_states.back(), cfg.depth, pos}).values;
    ++length_;
    return out;
  }

 private:
  // Records the observed state at `layer` (plant, then hook) and leaves in
  // `residual` what the next block reads.
  void observe(int layer, int pos, Vector& residual, const HookSpec* hook, StepOutput& out) {
    const auto& cfg = m_.cfg_;
    const bool plant = cfg.planted && cfg.planted->block == layer &&
                       (cfg.planted->trigger_token < 0 || trigger_seen_);
    Vector observed = residual;
    if (plant)
      for (std::size_t i = 0; i < observed.size(); ++i) observed[i] += cfg.planted->offset[i];
    if (hook && hook->layer == layer && pos >= hook->activation_position) {
      Vector t = hook->transform(HiddenState{observed, layer, pos});
      if (t.size() != observed.size())
        throw InvalidArgument("hook transform changed the state dimension");
      observed = std::move(t);
    }
    residual = observed;
    if (plant)
      for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= cfg.planted->offset[i];
    out.layer_states[static_cast<std::size_t>(layer)] = std::move(observed);
  }

  const ToyTransformer& m_;
  std::vector<std::vector<Vector>> keys_;
  std::vector<std::vector<Vector>> values_;
  int length_ = 0;
  bool trigger_seen_ = false;
};

inline std::unique_ptr<DecodeSession> ToyTransformer::start_session() const {
  return std::make_unique<Session>(*this);
}

// ---- config serialization -------------------------------------------------

inline nlohmann::json to_json_value(const ToyConfig& c) {
  nlohmann::json j = {{"depth", c.depth},
                      {"hidden_dim", c.hidden_dim},
                      {"heads", c.heads},
                      {"vocab_size", c.vocab_size},
                      {"seed", c.seed},
                      {"mlp_ratio", c.mlp_ratio},
                      {"final_norm", c.rms_final_norm ? "rms" : "identity"},
                      {"unembed_bias", c.unembed_bias},
                      {"unembed_scale", c.unembed_scale}};
  if (!c.planted_spec.is_null()) {
    j["planted"] = c.planted_spec;
  } else if (c.planted) {
    j["planted"] = {{"block", c.planted->block},
                    {"offset", c.planted->offset},
                    {"trigger_token", c.planted->trigger_token}};
  }
  return j;
}

inline std::string ToyTransformer::id() const {
  return "toy-" + content_hash(to_json_value(cfg_).dump());
}

// Parses a toy config document. The "planted" object takes either an explicit
// "offset" array or {"boost_token", "magnitude"} (offset along the lens
// direction of that token); the trigger is "trigger_token" or "trigger_word".
inline ToyConfig toy_config_from_json(const nlohmann::json& j) {
  ToyConfig c;
  c.depth = j.value("depth", c.depth);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.heads = j.value("heads", c.heads);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.seed = j.value("seed", c.seed);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  const std::string norm = j.value("final_norm", std::string("rms"));
  if (norm != "rms" && norm != "identity")
    throw InvalidArgument("toy config: final_norm must be \"rms\" or \"identity\"");
  c.rms_final_norm = norm == "rms";
  c.unembed_bias = j.value("unembed_bias", c.unembed_bias);
  c.unembed_scale = j.value("unembed_scale", c.unembed_scale);
  if (j.contains("planted") && !j["planted"].is_null()) {
    const auto& p = j["planted"];
    c.planted_spec = p;
    PlantedShift shift;
    shift.block = p.at("block").get<int>();
    if (p.contains("trigger_token")) {
      shift.trigger_token = p["trigger_token"].get<int>();
    } else if (p.contains("trigger_word")) {
      shift.trigger_token = ToyTokenizer(c.vocab_size).word_id(p["trigger_word"].get<std::string>());
    }
    if (p.contains("offset")) {
      shift.offset = p["offset"].get<Vector>();
    } else {
      // Needs the weights: build the unplanted model first.
      ToyConfig plain = c;
      plain.planted.reset();
      plain.planted_spec = nullptr;
      const ToyTransformer base(plain);
      const int token = p.contains("boost_word")
                            ? base.tokenizer().word_id(p["boost_word"].get<std::string>())
                            : p.at("boost_token").get<int>();
      if (token < 0 || token >= c.vocab_size)
        throw InvalidArgument("planted boost_token outside the vocabulary");
      shift.offset = base.lens_direction(token);
      const double magnitude = p.value("magnitude", 50.0);
      for (double& v : shift.offset) v *= magnitude;
    }
    c.planted = std::move(shift);
  }
  return c;
}

}  // namespace factsteer::model
