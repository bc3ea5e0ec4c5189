#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "factsteer/clients/http.hpp"
#include "factsteer/common/jsonl.hpp"
#include "factsteer/factsteer.hpp"

namespace fs = std::filesystem;
using namespace factsteer;
using nlohmann::json;

namespace {

constexpr int kExitMissing = 2;
constexpr int kExitFailure = 1;

class MissingInput : public Error {
 public:
  MissingInput(const std::string& artifact, const fs::path& path, const std::string& hint)
      : Error("missing input " + artifact + " (" + path.string() + ")" + (hint.empty() ? "" : "; " + hint)) {}
};

struct Options {
  std::string config_path;
  std::string presets_path = config::kDefaultPresetsPath;
  std::string work_dir = "run";
  std::string data_dir = ".";
  json flags = json::object();
  bool no_steer = false;
  std::optional<double> force_risk;
  std::string gamma_grid = "0:3:0.2";
  std::string tau_grid = "0.05:0.99:0.01";
  std::string split;
  std::string answer_source = "gold";
  std::string truncation = "score";
  int max_turns = 8;
  std::size_t limit = 0;
  bool prefilter = true;
};

// Values of `key` that are relative paths are taken relative to `dir`.
void rebase_paths(json& cfg, const fs::path& dir) {
  auto rebase = [&](json& v) {
    if (!v.is_string()) return;
    const std::string s = v.get<std::string>();
    if (s.empty() || s == "http" || s == "hash" || s.rfind("hash:", 0) == 0 || s.rfind("toy", 0) == 0) return;
    if (fs::path(s).is_relative()) v = (dir / s).lexically_normal().string();
  };
  for (const char* key : {"backend", "judge", "llm", "student", "cache_dir"})
    if (cfg.contains(key)) rebase(cfg[key]);
  if (cfg.contains("paths"))
    for (auto& [k, v] : cfg["paths"].items()) rebase(v);
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(std::stod(item));
  if (parts.size() != 3) throw InvalidArgument("grid '" + spec + "' must be lo:hi:step");
  return config::make_grid(parts[0], parts[1], parts[2]);
}

class Pipeline {
 public:
  Pipeline(const Options& opt, std::string command) : opt_(opt), command_(std::move(command)) {
    json file_cfg;
    if (!opt.config_path.empty()) {
      if (!fs::exists(opt.config_path)) throw MissingInput("config", opt.config_path, "");
      file_cfg = read_json(opt.config_path);
      rebase_paths(file_cfg, fs::absolute(opt.config_path).parent_path());
    }
    json presets = fs::exists(opt.presets_path) ? read_json(opt.presets_path) : json::object();
    cfg_ = config::resolve(file_cfg, opt.flags, presets);
    work_ = opt.work_dir;
  }

  const config::RunConfig& cfg() const { return cfg_; }

  fs::path output(const std::string& name) const {
    fs::create_directories(work_);
    return work_ / name;
  }

  // Input artifact: explicit paths.<key>, else <work>/<name> (or <data>/<name>
  // for corpora).
  fs::path input(const std::string& key, const std::string& name, const std::string& producer,
                 bool corpus = false) const {
    fs::path p = cfg_.paths.contains(key) ? fs::path(cfg_.paths[key].get<std::string>())
                                          : (corpus ? fs::path(opt_.data_dir) : work_) / name;
    if (!fs::exists(p)) throw MissingInput(name, p, producer.empty() ? "" : "run " + producer + " first");
    return p;
  }

  const model::Backend& backend() {
    if (backend_) return *backend_;
    const std::string& spec = cfg_.backend;
    model::ToyConfig tc;
    if (spec == "toy") {
    } else if (spec.rfind("toy:", 0) == 0) {
      tc.seed = std::stoull(spec.substr(4));
    } else if (fs::path(spec).extension() == ".json") {
      if (!fs::exists(spec)) throw MissingInput("backend config", spec, "");
      tc = model::toy_config_from_json(read_json(spec));
    } else {
      throw InvalidArgument("backend '" + spec + "' is not available (toy, toy:<seed> or a toy config .json)");
    }
    backend_ = std::make_unique<model::ToyTransformer>(tc);
    return *backend_;
  }

  std::shared_ptr<clients::ChatClient> client(const std::string& spec, const std::string& role) {
    if (spec.empty()) throw InvalidArgument("no " + role + " client configured (set \"" + role + "\" or --" + role + ")");
    std::shared_ptr<clients::ChatClient> inner;
    if (spec == "http") {
      std::string prefix = "FACTSTEER_" + role;
      for (auto& c : prefix) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      inner = std::make_shared<clients::HttpChatClient>(clients::EndpointConfig::from_env(prefix));
    } else {
      if (!fs::exists(spec)) throw MissingInput(role + " fixture", spec, "");
      inner = clients::ScriptedClient::from_file(spec);
    }
    return std::make_shared<clients::CachingClient>(
        inner, cfg_.cache_dir.empty() ? fs::path() : fs::path(cfg_.cache_dir) / "chat");
  }

  std::shared_ptr<retrieval::Embedder> embedder() {
    const std::string& spec = cfg_.embedder;
    std::shared_ptr<retrieval::Embedder> inner;
    if (spec == "hash") {
      inner = std::make_shared<retrieval::HashingEmbedder>(256, 0);
    } else if (spec.rfind("hash:", 0) == 0) {
      inner = std::make_shared<retrieval::HashingEmbedder>(std::stoi(spec.substr(5)), 0);
    } else if (spec == "http") {
      const char* dim = std::getenv("FACTSTEER_EMBED_DIM");
      if (!dim) throw InvalidArgument("FACTSTEER_EMBED_DIM is not set");
      inner = std::make_shared<clients::HttpEmbedder>(clients::EndpointConfig::from_env("FACTSTEER_EMBED"),
                                                      std::stoi(dim));
    } else {
      throw InvalidArgument("embedder '" + spec + "' is not available (hash, hash:<dim> or http)");
    }
    return inner;
  }

  std::vector<UserRecord> users() {
    auto u = read_jsonl_as<UserRecord>(input("users", "users.jsonl", "", true));
    for (const auto& r : u) validate(r);
    return u;
  }

  std::vector<BenchmarkRecord> bench() {
    return read_jsonl_as<BenchmarkRecord>(input("bench", "bench.jsonl", "build-bench"));
  }

  static std::vector<QAInstance> split_qas(const std::vector<BenchmarkRecord>& recs, const std::string& split) {
    std::vector<QAInstance> out;
    for (const auto& r : recs)
      if (r.split == split) {
        out.push_back(r.personalized_qa);
        out.push_back(r.factual_qa);
      }
    if (out.empty()) throw InvalidArgument("benchmark has no records in split '" + split + "'");
    return out;
  }

  std::vector<ContrastiveExample> contrast() {
    return read_jsonl_as<ContrastiveExample>(input("contrast", "contrast.jsonl", "build-contrast"));
  }

  std::unique_ptr<eval::BaselineBuilder> builder(eval::Method method, const std::vector<UserRecord>& users) {
    std::shared_ptr<clients::ChatClient> llm;
    if (method != eval::Method::rag) llm = client(cfg_.llm, "llm");
    eval::BaselineOptions bo;
    bo.seed = cfg_.seed;
    auto b = std::make_unique<eval::BaselineBuilder>(method, embedder(), llm, bo);
    if (method == eval::Method::dpl) b->set_population(users);
    return b;
  }

  int selected_layer() {
    if (cfg_.layer) return *cfg_.layer;
    const auto scan = read_json(input("scan", "layer_scan.json", "scan-layers"));
    return scan.at("selected_layer").get<int>();
  }

  std::optional<steer::SteeringArtifact> artifact(bool required) {
    if (opt_.no_steer) return std::nullopt;
    const fs::path p = cfg_.paths.contains("steering") ? fs::path(cfg_.paths["steering"].get<std::string>())
                                                       : work_ / "steering.json";
    if (!fs::exists(p)) {
      if (required) throw MissingInput("steering.json", p, "run build-steer first or pass --no-steer");
      return std::nullopt;
    }
    auto a = read_json(p).get<steer::SteeringArtifact>();
    steer::check_compatible(a, backend());
    if (opt_.flags.contains("variant")) a.config.variant = steer::parse_variant(cfg_.variant);
    if (opt_.flags.contains("tau")) a.config.tau = cfg_.tau;
    if (opt_.flags.contains("gamma")) a.config.gamma = cfg_.gamma;
    a.config.validate();
    return a;
  }

  eval::EvalOptions eval_options() const {
    eval::EvalOptions o;
    o.max_new_tokens = cfg_.max_new_tokens;
    o.parallel = cfg_.parallel;
    o.steer.risk_override = opt_.force_risk;
    return o;
  }

  void summary(json fields) const {
    fields["command"] = command_;
    std::cout << "SUMMARY " << fields.dump() << std::endl;
  }

  const Options& opt() const { return opt_; }

 private:
  const Options& opt_;
  std::string command_;
  config::RunConfig cfg_;
  fs::path work_;
  std::unique_ptr<model::ToyTransformer> backend_;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

json score_json(const eval::ScoreReport& r) { return eval::to_json_value(r, false); }

std::string score_csv(const eval::ScoreReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
  return "p_score,f_score,overall,n_personalized,n_factual,unjudged\n" + opt(r.p_score) + "," + opt(r.f_score) +
         "," + opt(r.overall) + "," + std::to_string(r.n_personalized) + "," + std::to_string(r.n_factual) + "," +
         std::to_string(r.unjudged) + "\n";
}

// ---- commands -------------------------------------------------------------

void cmd_build_bench(Pipeline& p) {
  const auto users = p.users();
  const auto facts = read_jsonl_as<QAInstance>(p.input("facts", "facts.jsonl", "", true));
  bench::BuildConfig bc;
  bc.seed = p.cfg().seed;
  bc.parallel = p.cfg().parallel;
  auto emb = p.embedder();
  retrieval::CachingEmbedder cached(emb);
  const auto build = bench::build_benchmark(users, facts, cached, bc);
  std::vector<BenchmarkRecord> all = build.split.train;
  all.insert(all.end(), build.split.test.begin(), build.split.test.end());
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.user_id < b.user_id; });
  write_jsonl(p.output("bench.jsonl"), all);
  write_json(p.output("bench_manifest.json"), build.manifest);
  p.summary({{"bench", p.output("bench.jsonl").string()},
             {"train", build.split.train.size()},
             {"test", build.split.test.size()},
             {"qa_instances", build.manifest["qa_instances"]},
             {"excluded_users", build.split.excluded_users.size()}});
}

void cmd_build_contrast(Pipeline& p) {
  const auto users = p.users();
  const auto qas = Pipeline::split_qas(p.bench(), p.opt().split);
  auto judge = p.client(p.cfg().judge, "judge");
  const auto method = eval::parse_method(p.cfg().method);
  auto builder = p.builder(method, users);
  contrast::CorpusOptions co;
  co.max_new_tokens = p.cfg().max_new_tokens;
  co.parallel = p.cfg().parallel;
  const auto r = contrast::build_contrast_corpus(users, qas, *builder, p.backend(), *judge, co);
  write_jsonl(p.output("contrast.jsonl"), r.examples);
  const json manifest = {{"method", eval::to_string(method)}, {"split", p.opt().split},
                         {"examples", r.examples.size()},      {"label_counts", r.label_counts},
                         {"unjudged", r.unjudged},             {"backend", p.backend().id()},
                         {"judge", judge->id()}};
  write_json(p.output("contrast_manifest.json"), manifest);
  p.summary({{"examples", r.examples.size()}, {"label_counts", r.label_counts}, {"unjudged", r.unjudged}});
}

void cmd_scan_layers(Pipeline& p) {
  const auto corpus = p.contrast();
  const auto source = p.opt().answer_source == "generated" ? locator::AnswerSource::generated
                                                           : locator::AnswerSource::gold;
  const auto r = locator::scan_layers(corpus, p.backend(), source, p.cfg().parallel);
  write_json(p.output("layer_scan.json"), locator::to_json_value(r));
  write_text(p.output("layer_scan.csv"), locator::to_csv(r));
  p.summary({{"selected_layer", r.selected_layer},
             {"fused_ranking", r.factual_degraded.fused_ranking},
             {"n_factual_degraded", r.factual_degraded.n_examples},
             {"n_personalized_beneficial", r.personalized_beneficial.n_examples}});
}

void cmd_train_prober(Pipeline& p) {
  const auto corpus = p.contrast();
  const int layer = p.selected_layer();
  const auto fd = contrast::require_group(corpus, EntanglementLabel::factual_degraded);
  const auto pb = contrast::require_group(corpus, EntanglementLabel::personalized_beneficial);
  std::vector<const ContrastiveExample*> rows(fd);
  rows.insert(rows.end(), pb.begin(), pb.end());
  std::vector<Vector> x(rows.size());
  std::vector<int> y(rows.size());
  parallel_for(rows.size(), p.cfg().parallel, [&](std::size_t i) {
    x[i] = probe::extract_feature(*rows[i], p.backend(), layer);
    y[i] = rows[i]->label == EntanglementLabel::factual_degraded ? 1 : 0;
  });
  probe::TrainOptions to;
  to.seed = p.cfg().seed;
  const auto m = probe::train(x, y, to, layer);
  write_json(p.output("prober.json"), m);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) correct += (probe::predict(m, x[i]) >= 0.5) == (y[i] == 1);
  p.summary({{"layer", layer},
             {"n_pos", m.meta.n_pos},
             {"n_neg", m.meta.n_neg},
             {"iterations", m.meta.iterations},
             {"converged", m.meta.converged},
             {"train_accuracy", static_cast<double>(correct) / static_cast<double>(x.size())}});
}

void cmd_build_steer(Pipeline& p) {
  const auto corpus = p.contrast();
  auto prober = read_json(p.input("prober", "prober.json", "train-prober")).get<probe::ProberModel>();
  const int layer = p.cfg().layer ? *p.cfg().layer : prober.layer;
  if (prober.layer != layer)
    throw InvalidArgument("prober was trained at layer " + std::to_string(prober.layer) + ", steering requested at " +
                          std::to_string(layer));
  steer::SteeringArtifact a;
  a.config = {steer::parse_variant(p.cfg().variant), p.cfg().tau, p.cfg().gamma, layer};
  a.config.validate();
  a.prober = std::move(prober);
  a.steering = steer::build_steering_vector(corpus, p.backend(), layer);
  a.backend = p.backend().fingerprint();
  write_json(p.output("steering.json"), a);
  p.summary({{"layer", layer},
             {"variant", a.config.variant},
             {"tau", a.config.tau},
             {"gamma", a.config.gamma},
             {"n_fact", a.steering.n_fact},
             {"n_pers", a.steering.n_pers},
             {"s_f_norm", norm(a.steering.s_f)}});
}

void cmd_run_eval(Pipeline& p) {
  const auto users = p.users();
  const auto qas = Pipeline::split_qas(p.bench(), p.opt().split);
  auto judge = p.client(p.cfg().judge, "judge");
  auto builder = p.builder(eval::parse_method(p.cfg().method), users);
  const auto art = p.artifact(true);
  const auto run = eval::run_eval(qas, users, eval::baseline_prompts(*builder), p.backend(), art ? &*art : nullptr,
                                  *judge, p.eval_options());
  write_jsonl(p.output("eval_items.jsonl"), run.items);
  json report = score_json(run.report);
  report["method"] = p.cfg().method;
  report["split"] = p.opt().split;
  report["steered"] = art.has_value();
  if (art) report["steering"] = {{"variant", art->config.variant}, {"tau", art->config.tau},
                                 {"gamma", art->config.gamma}, {"layer", art->config.layer}};
  write_json(p.output("eval_report.json"), report);
  write_text(p.output("eval_report.csv"), score_csv(run.report));
  p.summary({{"p_score", report["p_score"]}, {"f_score", report["f_score"]}, {"overall", report["overall"]},
             {"unjudged", run.report.unjudged}, {"steered", art.has_value()}});
}

void cmd_ablate_history(Pipeline& p) {
  const auto users = p.users();
  const auto qas = Pipeline::split_qas(p.bench(), p.opt().split);
  auto judge = p.client(p.cfg().judge, "judge");
  auto rag = p.builder(eval::Method::rag, users);
  const auto art = p.artifact(false);
  const auto mode = p.opt().truncation == "chronological" ? eval::Truncation::chronological
                                                          : eval::Truncation::by_score;
  const auto pts = eval::history_length_ablation(p.cfg().ratio_grid, qas, users, *rag, p.backend(),
                                                 art ? &*art : nullptr, *judge, p.eval_options(), mode);
  json rows = json::array();
  for (const auto& pt : pts)
    rows.push_back({{"ratio", pt.ratio}, {"context_tokens", pt.context_tokens}, {"report", score_json(pt.report)}});
  write_json(p.output("ablation.json"), {{"steered", art.has_value()}, {"points", rows}});
  write_text(p.output("ablation.csv"), eval::to_csv(pts));
  p.summary({{"ratios", p.cfg().ratio_grid.size()}, {"steered", art.has_value()}});
}

void cmd_analyze_entanglement(Pipeline& p) {
  const auto s = eval::entanglement_analysis(p.contrast(), p.backend());
  write_json(p.output("entanglement.json"), eval::to_json_value(s));
  p.summary({{"mean_cos_truthful", s.mean_cos_truthful},
             {"mean_cos_hallucinated", s.mean_cos_hallucinated},
             {"t", s.t_statistic},
             {"p_value", s.p_value}});
}

void cmd_simulate(Pipeline& p) {
  const auto users = p.users();
  std::map<std::string, const UserRecord*> by_user;
  for (const auto& u : users) by_user[u.user_id] = &u;
  std::vector<QAInstance> questions;
  for (const auto& q : Pipeline::split_qas(p.bench(), p.opt().split))
    if (q.kind == QaKind::factual) questions.push_back(q);
  auto judge = p.client(p.cfg().judge, "judge");
  auto student = p.client(p.cfg().student, "student");
  std::size_t excluded = 0, known = 0;
  if (p.opt().prefilter) {
    const auto pf = sim::prefilter_known(questions, *student, *judge);
    excluded = pf.excluded.size();
    known = questions.size() - pf.unknown.size() - excluded;
    questions = pf.unknown;
  }
  if (p.opt().limit && questions.size() > p.opt().limit) questions.resize(p.opt().limit);
  const auto art = p.artifact(false);
  std::vector<sim::Arm> arms{sim::Arm::control, sim::Arm::personalized};
  if (art) arms.push_back(sim::Arm::personalized_fpps);
  sim::TutoringOptions to;
  to.max_turns = p.opt().max_turns;
  to.max_new_tokens = p.cfg().max_new_tokens;
  to.steer.risk_override = p.opt().force_risk;
  std::vector<sim::TutoringTranscript> ts(questions.size() * arms.size());
  parallel_for(ts.size(), p.cfg().parallel, [&](std::size_t i) {
    const auto& q = questions[i / arms.size()];
    const auto arm = arms[i % arms.size()];
    ts[i] = sim::run_tutoring(q, arm, eval::BaselineBuilder::all_sessions(*by_user.at(q.user_id)), p.backend(),
                              *student, art ? &*art : nullptr, to);
  });
  std::map<std::string, QAInstance> qa_map;
  for (const auto& q : questions) qa_map[q.qa_id] = q;
  sim::ArmReport report;
  if (!ts.empty()) report = sim::exam_and_score(ts, *judge, qa_map);
  write_jsonl(p.output("transcripts.jsonl"), ts);
  auto rj = sim::to_json_value(report);
  rj["questions"] = questions.size();
  rj["prefilter_known"] = known;
  rj["prefilter_excluded"] = excluded;
  write_json(p.output("sim_report.json"), rj);
  write_text(p.output("sim_report.csv"), sim::to_csv(report));
  p.summary({{"questions", questions.size()}, {"arms", arms.size()}, {"report", rj["arms"]}});
}

void cmd_grid_search(Pipeline& p) {
  const auto users = p.users();
  const auto qas = Pipeline::split_qas(p.bench(), p.opt().split);
  auto judge = p.client(p.cfg().judge, "judge");
  auto builder = p.builder(eval::parse_method(p.cfg().method), users);
  auto base = p.artifact(true);
  const auto gammas = parse_grid(p.opt().gamma_grid);
  const auto taus = parse_grid(p.opt().tau_grid);
  for (double t : taus)
    if (!(t > 0.0 && t < 1.0)) throw InvalidArgument("tau grid values must lie strictly inside (0, 1)");
  const auto prompts = eval::baseline_prompts(*builder);
  const auto result = config::grid_search(gammas, taus, [&](double g, double t) {
    auto a = *base;
    a.config.gamma = g;
    a.config.tau = t;
    const auto run = eval::run_eval(qas, users, prompts, p.backend(), &a, *judge, p.eval_options());
    return run.report.overall.value_or(0.0);
  });
  std::ostringstream csv;
  csv.precision(10);
  csv << "gamma,tau,overall\n";
  json cells = json::array();
  for (const auto& c : result.cells) {
    csv << c.gamma << ',' << c.tau << ',' << c.overall << '\n';
    cells.push_back({{"gamma", c.gamma}, {"tau", c.tau}, {"overall", c.overall}});
  }
  write_text(p.output("grid.csv"), csv.str());
  write_json(p.output("grid.json"), {{"variant", base->config.variant},
                                     {"split", p.opt().split},
                                     {"best", {{"gamma", result.best.gamma}, {"tau", result.best.tau},
                                               {"overall", result.best.overall}}},
                                     {"cells", cells}});
  p.summary({{"best_gamma", result.best.gamma}, {"best_tau", result.best.tau}, {"best_overall", result.best.overall},
             {"cells", result.cells.size()}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalization/factuality steering toolkit"};
  app.require_subcommand(1);
  Options opt;

  // Shared flags, recorded only when given so config files and presets
  // keep their precedence.
  std::string backend, method, variant, cache_dir, preset, judge, llm, student, embedder, ratio_grid;
  double tau = 0, gamma = 0, force = 0;
  int layer = 0, max_new = 0;
  std::uint64_t seed = 0;
  std::size_t parallel = 1;

  auto add_common = [&](CLI::App* sc) {
    sc->add_option("--config", opt.config_path, "JSON run configuration");
    sc->add_option("--presets", opt.presets_path, "hyperparameter preset table");
    sc->add_option("--work-dir", opt.work_dir, "directory for artifacts")->capture_default_str();
    sc->add_option("--data", opt.data_dir, "directory holding users.jsonl / facts.jsonl")->capture_default_str();
    sc->add_option("--backend", backend, "toy, toy:<seed> or a toy backend .json");
    sc->add_option("--method", method, "RAG, PAG, DPL or LLM-TRSR");
    sc->add_option("--variant", variant, "H, S or M");
    sc->add_option("--tau", tau, "gate threshold in (0, 1)");
    sc->add_option("--gamma", gamma, "soft steering strength >= 0");
    sc->add_option("--layer", layer, "intervention layer (default: scan result)");
    sc->add_option("--seed", seed, "sampling seed");
    sc->add_option("--max-new-tokens", max_new, "generation cap (default 500)");
    sc->add_option("--ratio-grid", ratio_grid, "comma-separated history ratios");
    sc->add_option("--parallel", parallel, "worker bound");
    sc->add_option("--cache-dir", cache_dir, "persistent client cache");
    sc->add_option("--preset", preset, "preset name (llama-3.1-8b, qwen2.5-7b, qwen2.5-14b)");
    sc->add_option("--judge", judge, "judge: scripted fixture path or http");
    sc->add_option("--llm", llm, "summarizer: scripted fixture path or http");
    sc->add_option("--student", student, "simulated learner: scripted fixture path or http");
    sc->add_option("--embedder", embedder, "hash, hash:<dim> or http");
    sc->add_option("--split", opt.split, "benchmark split (default: train for build-contrast/grid-search, else test)");
  };

  struct Command {
    const char* name;
    const char* help;
    void (*run)(Pipeline&);
  };
  const std::vector<Command> commands{
      {"build-bench", "sample factual questions per user and split users", cmd_build_bench},
      {"build-contrast", "generate with and without history, judge and label", cmd_build_contrast},
      {"scan-layers", "layer-wise answer perplexity deviation and fused layer choice", cmd_scan_layers},
      {"train-prober", "logistic prober on final prompt-token states", cmd_train_prober},
      {"build-steer", "steering vector and artifact", cmd_build_steer},
      {"run-eval", "personalized generation, judged and scored", cmd_run_eval},
      {"ablate-history", "score against retained history ratio", cmd_ablate_history},
      {"analyze-entanglement", "response-embedding cosine comparison", cmd_analyze_entanglement},
      {"simulate", "multi-turn tutoring simulation", cmd_simulate},
      {"grid-search", "sweep gamma and tau on a validation split", cmd_grid_search},
  };
  std::map<CLI::App*, const Command*> by_app;
  for (const auto& c : commands) {
    auto* sc = app.add_subcommand(c.name, c.help);
    add_common(sc);
    by_app[sc] = &c;
    const std::string name = c.name;
    if (name == "run-eval" || name == "ablate-history" || name == "simulate" || name == "grid-search") {
      sc->add_flag("--no-steer", opt.no_steer, "ignore any steering artifact");
      sc->add_option("--force-risk", force, "bypass the prober with a fixed probability");
    }
    if (name == "scan-layers") sc->add_option("--answer-source", opt.answer_source, "gold or generated");
    if (name == "ablate-history") sc->add_option("--truncation", opt.truncation, "score or chronological");
    if (name == "simulate") {
      sc->add_option("--max-turns", opt.max_turns, "teacher turn cap")->capture_default_str();
      sc->add_option("--limit", opt.limit, "at most this many questions");
      sc->add_flag("!--no-prefilter", opt.prefilter, "keep questions the student already answers");
    }
    if (name == "grid-search") {
      sc->add_option("--gamma-grid", opt.gamma_grid, "lo:hi:step")->capture_default_str();
      sc->add_option("--tau-grid", opt.tau_grid, "lo:hi:step")->capture_default_str();
    }
  }

  CLI11_PARSE(app, argc, argv);

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--split") == 0) {
    const auto& n = chosen->get_name();
    opt.split = n == "build-contrast" || n == "grid-search" ? "train" : "test";
  }
  auto given = [&](const char* flag) { return chosen->count(flag) > 0; };
  auto& f = opt.flags;
  if (given("--backend")) f["backend"] = backend;
  if (given("--method")) f["method"] = method;
  if (given("--variant")) f["variant"] = variant;
  if (given("--tau")) f["tau"] = tau;
  if (given("--gamma")) f["gamma"] = gamma;
  if (given("--layer")) f["layer"] = layer;
  if (given("--seed")) f["seed"] = seed;
  if (given("--max-new-tokens")) f["max_new_tokens"] = max_new;
  if (given("--parallel")) f["parallel"] = parallel;
  if (given("--cache-dir")) f["cache_dir"] = cache_dir;
  if (given("--preset")) f["preset"] = preset;
  if (given("--judge")) f["judge"] = judge;
  if (given("--llm")) f["llm"] = llm;
  if (given("--student")) f["student"] = student;
  if (given("--embedder")) f["embedder"] = embedder;
  if (given("--ratio-grid")) {
    std::vector<double> r;
    std::stringstream ss(ratio_grid);
    for (std::string item; std::getline(ss, item, ',');) r.push_back(std::stod(item));
    f["ratio_grid"] = r;
  }
  if (chosen->get_option_no_throw("--force-risk") && given("--force-risk")) opt.force_risk = force;

  try {
    Pipeline p(opt, chosen->get_name());
    const auto t0 = std::chrono::steady_clock::now();
    by_app.at(chosen)->run(p);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << chosen->get_name() << " finished in " << secs << " s\n";
    return 0;
  } catch (const MissingInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
