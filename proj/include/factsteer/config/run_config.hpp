#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factsteer/common/jsonl.hpp"
#include "factsteer/eval/baselines.hpp"
#include "factsteer/steer/steering.hpp"

namespace factsteer::config {

#ifdef FACTSTEER_DEFAULT_PRESETS
inline constexpr const char* kDefaultPresetsPath = FACTSTEER_DEFAULT_PRESETS;
#else
inline constexpr const char* kDefaultPresetsPath = "config/presets.json";
#endif

struct PresetValues {
  std::optional<int> layer;
  double gamma = 0.0;
  double tau = 0.5;
};

// Resolves (preset, method, variant) against a presets table. The S variant
// has no threshold of its own; it reports the M threshold.
inline PresetValues lookup_preset(const nlohmann::json& table, const std::string& preset,
                                  eval::Method method, steer::Variant variant) {
  if (!table.contains(preset)) throw InvalidArgument("unknown preset '" + preset + "'");
  const auto& p = table[preset];
  const auto& methods = p.at("methods");
  const std::string m = eval::to_string(method);
  if (!methods.contains(m)) throw InvalidArgument("preset '" + preset + "' has no entry for " + m);
  const auto& e = methods[m];
  PresetValues v;
  if (p.contains("layer")) v.layer = p["layer"].get<int>();
  v.gamma = e.at("gamma").get<double>();
  v.tau = e.at(variant == steer::Variant::H ? "tau_H" : "tau_M").get<double>();
  return v;
}

struct RunConfig {
  std::string backend = "toy";
  std::string method = "RAG";
  std::string variant = "M";
  double tau = 0.5;
  double gamma = 3.0;
  std::optional<int> layer;
  std::uint64_t seed = 0;
  int max_new_tokens = 500;
  std::vector<double> ratio_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::size_t parallel = 1;
  std::string cache_dir;
  std::string preset;
  std::string judge;     // scripted fixture path or "http"
  std::string llm;       // summarizer client
  std::string student;   // simulated learner
  std::string embedder = "hash";
  nlohmann::json paths = nlohmann::json::object();

  void validate() const {
    eval::parse_method(method);
    steer::parse_variant(variant);
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie strictly inside (0, 1)");
    if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be >= 0");
    if (max_new_tokens < 1) throw InvalidArgument("max-new-tokens must be >= 1");
    for (double r : ratio_grid)
      if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgument("ratio grid values must be in [0, 1]");
  }
};

// Overlays the keys present in `j` onto `c`.
inline void overlay(RunConfig& c, const nlohmann::json& j) {
  if (j.is_null()) return;
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key) && !j[key].is_null()) j[key].get_to(field);
  };
  take("backend", c.backend);
  take("method", c.method);
  take("variant", c.variant);
  take("tau", c.tau);
  take("gamma", c.gamma);
  if (j.contains("layer") && !j["layer"].is_null()) c.layer = j["layer"].get<int>();
  take("seed", c.seed);
  take("max_new_tokens", c.max_new_tokens);
  take("ratio_grid", c.ratio_grid);
  take("parallel", c.parallel);
  take("cache_dir", c.cache_dir);
  take("preset", c.preset);
  take("judge", c.judge);
  take("llm", c.llm);
  take("student", c.student);
  take("embedder", c.embedder);
  if (j.contains("paths")) c.paths.update(j["paths"]);
}

// flags > config file > preset > defaults.
inline RunConfig resolve(const nlohmann::json& file_cfg, const nlohmann::json& flags,
                         const nlohmann::json& presets) {
  RunConfig c;
  // Preset name, method and variant decide which preset row applies, so
  // read them from the higher layers first.
  RunConfig probe;
  overlay(probe, file_cfg);
  overlay(probe, flags);
  if (!probe.preset.empty()) {
    const auto v = lookup_preset(presets, probe.preset, eval::parse_method(probe.method),
                                 steer::parse_variant(probe.variant));
    c.gamma = v.gamma;
    c.tau = v.tau;
    c.layer = v.layer;
  }
  overlay(c, file_cfg);
  overlay(c, flags);
  c.validate();
  return c;
}

inline nlohmann::json load_presets(const std::filesystem::path& path = kDefaultPresetsPath) {
  return read_json(path);
}

// lo, lo + step, ... up to hi (inclusive within 1e-9), each rounded to 1e-9
// so decimal steps compare exactly.
inline std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0)) throw InvalidArgument("grid step must be positive");
  if (hi < lo) throw InvalidArgument("grid upper bound below lower bound");
  std::vector<double> g;
  for (long i = 0;; ++i) {
    const double v = std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9;
    if (v > hi + 1e-9) break;
    g.push_back(v);
  }
  return g;
}

struct GridCell {
  double gamma = 0.0;
  double tau = 0.0;
  double overall = 0.0;
};

struct GridResult {
  std::vector<GridCell> cells;
  GridCell best;
};

// Evaluates every (gamma, tau) cell; the first maximal cell in (gamma, tau)
// ascending order wins.
inline GridResult grid_search(const std::vector<double>& gammas, const std::vector<double>& taus,
                              const std::function<double(double gamma, double tau)>& evaluate) {
  if (gammas.empty() || taus.empty()) throw InvalidArgument("grid search over an empty grid");
  GridResult r;
  bool first = true;
  for (double g : gammas)
    for (double t : taus) {
      GridCell c{g, t, evaluate(g, t)};
      r.cells.push_back(c);
      if (first || c.overall > r.best.overall) r.best = c, first = false;
    }
  return r;
}

// Default sweep: gamma in [0, 3] step 0.2; tau in [0.05, 1) step 0.01 (tau
// = 1 is outside the open interval a threshold may take).
inline std::vector<double> default_gamma_grid() { return make_grid(0.0, 3.0, 0.2); }
inline std::vector<double> default_tau_grid() {
  auto g = make_grid(0.05, 1.0, 0.01);
  while (!g.empty() && g.back() >= 1.0) g.pop_back();
  return g;
}

}  // namespace factsteer::config
