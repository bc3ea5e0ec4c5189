#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factsteer/contrast/corpus.hpp"
#include "factsteer/model/backend.hpp"
#include "factsteer/probe/prober.hpp"

namespace factsteer::steer {

enum class Variant { H, S, M };

NLOHMANN_JSON_SERIALIZE_ENUM(Variant, {{Variant::H, "H"}, {Variant::S, "S"}, {Variant::M, "M"}})

inline Variant parse_variant(const std::string& s) {
  if (s == "H" || s == "h") return Variant::H;
  if (s == "S" || s == "s") return Variant::S;
  if (s == "M" || s == "m") return Variant::M;
  throw InvalidArgument("unknown steering variant '" + s + "' (expected H, S or M)");
}

inline std::string to_string(Variant v) { return nlohmann::json(v).get<std::string>(); }

struct SteeringVector {
  Vector s_f;
  Vector m_fact;
  Vector m_pers;
  int layer = 0;
  std::size_t n_fact = 0;  // contributing token states
  std::size_t n_pers = 0;
};

struct SteeringConfig {
  Variant variant = Variant::M;
  double tau = 0.5;
  double gamma = 3.0;
  int layer = 0;

  void validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie strictly inside (0, 1)");
    if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be >= 0");
  }
};

inline double soft_strength(double risk, double gamma) { return gamma * (risk - 0.5); }

// H: h - v_u when p >= tau. S: h + beta(p) s_f. M: S below tau, H at or above.
inline Vector apply(const SteeringConfig& cfg, std::span<const double> h, double risk,
                    const Vector* v_u, const Vector* s_f) {
  auto hard = [&] {
    if (!v_u) throw InvalidArgument("steering: hard branch fired without v_u");
    return subtract(h, *v_u);
  };
  auto soft = [&] {
    if (!s_f) throw InvalidArgument("steering: soft branch fired without s_f");
    return add_scaled(h, soft_strength(risk, cfg.gamma), *s_f);
  };
  switch (cfg.variant) {
    case Variant::H: return risk >= cfg.tau ? hard() : Vector(h.begin(), h.end());
    case Variant::S: return soft();
    case Variant::M: return risk >= cfg.tau ? hard() : soft();
  }
  return Vector(h.begin(), h.end());
}

inline model::TokenSequence concat(const model::TokenSequence& a, std::span<const int> b) {
  model::TokenSequence out{a.ids, std::nullopt};
  out.ids.insert(out.ids.end(), b.begin(), b.end());
  return out;
}

// v_u = h_L(with ++ prefix) - h_L(without ++ prefix) at the last position.
// `backend_without` may differ from `backend_with` (e.g. an unplanted twin).
inline Vector compute_v_u(const model::TokenSequence& prompt_with, const model::TokenSequence& prompt_without,
                          std::span<const int> generated_prefix, const model::Backend& backend_with,
                          const model::Backend& backend_without, int layer) {
  backend_with.validate_layer(layer);
  const auto a = concat(prompt_with, generated_prefix);
  const auto b = concat(prompt_without, generated_prefix);
  const auto fa = backend_with.forward_with_states(a);
  const auto fb = backend_without.forward_with_states(b);
  return subtract(fa.states.at(layer, static_cast<int>(a.ids.size()) - 1),
                  fb.states.at(layer, static_cast<int>(b.ids.size()) - 1));
}

inline Vector compute_v_u(const model::TokenSequence& prompt_with, const model::TokenSequence& prompt_without,
                          std::span<const int> generated_prefix, const model::Backend& backend, int layer) {
  return compute_v_u(prompt_with, prompt_without, generated_prefix, backend, backend, layer);
}

// Layer-`layer` states at the positions holding the response tokens of
// prompt ++ response.
inline void accumulate_response_states(const model::TokenSequence& prompt, std::span<const int> response,
                                       const model::Backend& backend, int layer, Vector& sum,
                                       std::size_t& count) {
  if (response.empty()) return;
  const auto input = concat(prompt, response);
  const auto fwd = backend.forward_with_states(input);
  const int np = static_cast<int>(prompt.ids.size());
  for (int pos = np; pos < static_cast<int>(input.ids.size()); ++pos) {
    const auto s = fwd.states.at(layer, pos);
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += s[k];
    ++count;
  }
}

// m_fact: response states of factual examples judged correct without
// history (generated without history). m_pers: personalized_beneficial
// response states (generated with history). s_f = m_fact - m_pers.
inline SteeringVector build_steering_vector(const std::vector<ContrastiveExample>& corpus,
                                            const model::Backend& backend, int layer) {
  backend.validate_layer(layer);
  const auto d = static_cast<std::size_t>(backend.hidden_dim());
  SteeringVector sv;
  sv.layer = layer;
  Vector fact(d, 0.0), pers(d, 0.0);
  for (const auto& e : corpus) {
    if (e.qa.kind == QaKind::factual && e.verdict_without.value_or(false))
      accumulate_response_states(backend.encode(e.prompt_without), e.answer_without_ids, backend, layer,
                                 fact, sv.n_fact);
    if (e.judged() && e.label == EntanglementLabel::personalized_beneficial)
      accumulate_response_states(backend.encode(e.prompt_with), e.answer_with_ids, backend, layer, pers,
                                 sv.n_pers);
  }
  if (sv.n_fact == 0)
    throw EmptyGroupError("m_fact", "cannot build m_fact: no response tokens from factual questions "
                                    "answered correctly without history");
  if (sv.n_pers == 0)
    throw EmptyGroupError("m_pers", "cannot build m_pers: no response tokens from "
                                    "personalized_beneficial examples");
  for (auto& v : fact) v /= static_cast<double>(sv.n_fact);
  for (auto& v : pers) v /= static_cast<double>(sv.n_pers);
  sv.s_f = subtract(fact, pers);
  sv.m_fact = std::move(fact);
  sv.m_pers = std::move(pers);
  return sv;
}

struct SteeringArtifact {
  static constexpr int kVersion = 1;
  SteeringConfig config;
  probe::ProberModel prober;
  SteeringVector steering;
  model::BackendFingerprint backend;
};

inline void to_json(nlohmann::json& j, const SteeringArtifact& a) {
  j = {{"version", SteeringArtifact::kVersion},
       {"layer", a.config.layer},
       {"variant", a.config.variant},
       {"tau", a.config.tau},
       {"gamma", a.config.gamma},
       {"prober", a.prober},
       {"steering",
        {{"s_f", a.steering.s_f},
         {"m_fact", a.steering.m_fact},
         {"m_pers", a.steering.m_pers},
         {"n_fact", a.steering.n_fact},
         {"n_pers", a.steering.n_pers}}},
       {"backend_fingerprint",
        {{"id", a.backend.id},
         {"depth", a.backend.depth},
         {"hidden_dim", a.backend.hidden_dim},
         {"vocab_size", a.backend.vocab_size}}}};
}

inline void from_json(const nlohmann::json& j, SteeringArtifact& a) {
  const int version = j.value("version", 0);
  if (version != SteeringArtifact::kVersion)
    throw ArtifactMismatch("steering artifact version " + std::to_string(version) + " is not supported");
  j.at("layer").get_to(a.config.layer);
  j.at("variant").get_to(a.config.variant);
  j.at("tau").get_to(a.config.tau);
  j.at("gamma").get_to(a.config.gamma);
  j.at("prober").get_to(a.prober);
  const auto& s = j.at("steering");
  s.at("s_f").get_to(a.steering.s_f);
  s.at("m_fact").get_to(a.steering.m_fact);
  s.at("m_pers").get_to(a.steering.m_pers);
  s.at("n_fact").get_to(a.steering.n_fact);
  s.at("n_pers").get_to(a.steering.n_pers);
  a.steering.layer = a.config.layer;
  const auto& f = j.at("backend_fingerprint");
  f.at("id").get_to(a.backend.id);
  f.at("depth").get_to(a.backend.depth);
  f.at("hidden_dim").get_to(a.backend.hidden_dim);
  f.at("vocab_size").get_to(a.backend.vocab_size);
}

// Refuses an artifact written for a different backend.
inline void check_compatible(const SteeringArtifact& a, const model::Backend& backend) {
  const auto fp = backend.fingerprint();
  auto fail = [&](const std::string& what) {
    throw ArtifactMismatch("steering artifact was built for backend " + a.backend.id + " (" + what +
                           "); current backend is " + fp.id);
  };
  if (a.backend.depth != fp.depth) fail("depth " + std::to_string(a.backend.depth));
  if (a.backend.hidden_dim != fp.hidden_dim) fail("hidden_dim " + std::to_string(a.backend.hidden_dim));
  if (a.backend.vocab_size != fp.vocab_size) fail("vocab_size " + std::to_string(a.backend.vocab_size));
  if (a.backend.id != fp.id) fail("different fingerprint id");
  if (static_cast<int>(a.steering.s_f.size()) != fp.hidden_dim || a.prober.dim() != fp.hidden_dim)
    fail("vector dimensions do not match hidden_dim");
  backend.validate_layer(a.config.layer);
}

struct SteerOptions {
  int max_new_tokens = 500;
  bool freeze_v_u = false;               // reuse the prompt-position v_u for every step
  std::optional<double> risk_override;  // bypass the prober
};

struct SteeredOutput {
  model::TokenSequence tokens;
  double risk = 0.0;
  bool hard_branch = false;  // gate fired the v_u removal
};

// Gate once on the final with-history prompt token, then decode greedily
// with a layer-L hook. v_u per position comes from a without-history session
// teacher-forced on the emitted tokens.
inline SteeredOutput steered_generate(const model::TokenSequence& prompt_with,
                                      const model::TokenSequence& prompt_without,
                                      const SteeringArtifact& artifact, const model::Backend& backend_with,
                                      const model::Backend& backend_without, const SteerOptions& opts = {}) {
  if (opts.max_new_tokens < 1) throw InvalidArgument("max_new_tokens must be >= 1");
  backend_with.validate_input(prompt_with);
  backend_without.validate_input(prompt_without);
  const auto& cfg = artifact.config;
  const int L = cfg.layer;
  backend_with.validate_layer(L);

  SteeredOutput out;
  const int np = static_cast<int>(prompt_with.ids.size());
  bool gated = false;
  const bool need_without = cfg.variant != Variant::S;
  std::unique_ptr<model::DecodeSession> without;
  Vector without_state, frozen_v_u;
  bool have_frozen = false;
  auto advance_without = [&](int token) {
    auto step = without->append(token, nullptr);
    without_state = std::move(step.layer_states[static_cast<std::size_t>(L)]);
  };
  if (need_without) {
    without = backend_without.start_session();
    for (int t : prompt_without.ids) advance_without(t);
  }

  model::HookSpec hook = model::generation_hook(L, np, [&](const model::HiddenState& h) -> Vector {
    if (!gated) {
      // First call is the unmodified final prompt-token state at layer L.
      out.risk = opts.risk_override ? *opts.risk_override : probe::predict(artifact.prober, h.values);
      out.hard_branch = cfg.variant != Variant::S && out.risk >= cfg.tau;
      gated = true;
    }
    std::optional<Vector> v_u;
    if (out.hard_branch) {
      if (opts.freeze_v_u && have_frozen) {
        v_u = frozen_v_u;
      } else {
        v_u = subtract(h.values, without_state);
        if (!have_frozen) frozen_v_u = *v_u, have_frozen = true;
      }
    }
    return apply(cfg, h.values, out.risk, v_u ? &*v_u : nullptr, &artifact.steering.s_f);
  });

  auto session = backend_with.start_session();
  model::StepOutput step;
  for (int t : prompt_with.ids) step = session->append(t, &hook);
  while (static_cast<int>(out.tokens.ids.size()) < opts.max_new_tokens) {
    const int next = model::Backend::argmax(step.logits);
    if (next == backend_with.eos_id()) break;
    out.tokens.ids.push_back(next);
    if (static_cast<int>(out.tokens.ids.size()) == opts.max_new_tokens) break;
    if (need_without) advance_without(next);
    step = session->append(next, &hook);
  }
  out.tokens.text = backend_with.decode(out.tokens.ids);
  return out;
}

inline SteeredOutput steered_generate(const model::TokenSequence& prompt_with,
                                      const model::TokenSequence& prompt_without,
                                      const SteeringArtifact& artifact, const model::Backend& backend,
                                      const SteerOptions& opts = {}) {
  return steered_generate(prompt_with, prompt_without, artifact, backend, backend, opts);
}

}  // namespace factsteer::steer
