#include "kgc/pipeline.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "kgc/error.hpp"
#include "kgc/evaluate.hpp"
#include "kgc/features.hpp"
#include "kgc/kg.hpp"
#include "kgc/rng.hpp"
#include "kgc/scoreset.hpp"

namespace kgc {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kMethods = {"global-average", "router", "weighted-average"};
const std::set<std::string> kReservedNames = {"global-average", "router", "weighted-average", "oracle-router"};

bool safe_name(const std::string& name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

std::pair<fs::path, std::string> split_stem(const fs::path& p) { return {p.parent_path(), p.filename().string()}; }

}  // namespace

fs::path RunConfig::resolve(const std::string& p) const {
  const fs::path path(p);
  return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
}

io::Json to_json(const RunConfig& c) {
  io::Json models = io::Json::array();
  for (const auto& m : c.models) {
    io::Json entry = {{"name", m.name}};
    const io::Json kge = to_json(m.config);
    for (const auto& [k, v] : kge.items()) {
      if (k != "seed") entry[k] = v;
    }
    models.push_back(entry);
  }
  io::Json external = io::Json::array();
  for (const auto& e : c.external) external.push_back({{"name", e.name}, {"valid", e.valid}, {"test", e.test}});
  io::Json j;
  j["schema"] = kRunConfigSchema;
  j["dataset"] = {{"triples", c.triples}, {"entities", c.entities}, {"vocab", c.vocab}};
  j["split"] = {{"mode", to_string(c.mode)}, {"valid_frac", c.valid_frac}, {"test_frac", c.test_frac}};
  j["negatives"] = {{"m_eval", c.m_eval}};
  j["models"] = models;
  j["external_scores"] = external;
  j["integration"] = {{"methods", c.methods},
                      {"router_kind", to_string(c.router_kind)},
                      {"router_grid", c.router_grid},
                      {"weighter_grid", c.weighter_grid},
                      {"grid_step", c.grid_step}};
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  return j;
}

RunConfig run_config_from_json(const io::Json& j, const fs::path& base_dir) {
  if (j.value("schema", std::string()) != kRunConfigSchema) {
    fail(ErrorCode::InvalidArgument, std::string("run config must declare \"schema\": \"") + kRunConfigSchema + "\"");
  }
  try {
    RunConfig c;
    c.base_dir = base_dir;
    const auto& d = j.at("dataset");
    c.triples = d.at("triples").get<std::string>();
    c.entities = d.at("entities").get<std::string>();
    c.vocab = d.value("vocab", std::string());
    if (j.contains("split")) {
      const auto& s = j.at("split");
      c.mode = parse_split_mode(s.value("mode", std::string("transductive")));
      c.valid_frac = s.value("valid_frac", c.valid_frac);
      c.test_frac = s.value("test_frac", c.test_frac);
    }
    if (j.contains("negatives")) c.m_eval = j.at("negatives").value("m_eval", c.m_eval);
    std::set<std::string> names;
    for (const auto& m : j.at("models")) {
      ModelSpec spec;
      spec.name = m.at("name").get<std::string>();
      spec.config = kge_config_from_json(m);
      spec.config.seed = 0;
      c.models.push_back(spec);
    }
    for (const auto& e : j.value("external_scores", io::Json::array())) {
      c.external.push_back({e.at("name").get<std::string>(), e.at("valid").get<std::string>(),
                            e.at("test").get<std::string>()});
    }
    if (j.contains("integration")) {
      const auto& in = j.at("integration");
      c.methods = in.value("methods", c.methods);
      c.router_kind = parse_router_kind(in.value("router_kind", std::string("gbdt")));
      c.router_grid = in.value("router_grid", io::Json::object());
      c.weighter_grid = in.value("weighter_grid", io::Json::object());
      c.grid_step = in.value("grid_step", c.grid_step);
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.seed = j.value("seed", c.seed);

    for (const auto& m : c.methods) {
      if (!kMethods.count(m)) fail(ErrorCode::InvalidArgument, "unknown integration method '" + m + "'");
    }
    auto add_name = [&](const std::string& n) {
      if (!safe_name(n) || kReservedNames.count(n) || !names.insert(n).second) {
        fail(ErrorCode::InvalidArgument, "model name '" + n + "' is empty, reserved, repeated or not file-safe");
      }
    };
    for (const auto& m : c.models) add_name(m.name);
    for (const auto& e : c.external) add_name(e.name);
    if (names.empty()) fail(ErrorCode::InvalidArgument, "run config lists no models");
    if (c.m_eval == 0) fail(ErrorCode::InvalidArgument, "m_eval must be positive");
    return c;
  } catch (const io::Json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed run config: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  RunConfig c = run_config_from_json(io::read_json(path), path.parent_path());
  std::vector<fs::path> inputs = {c.resolve(c.triples), c.resolve(c.entities)};
  if (!c.vocab.empty()) inputs.push_back(c.resolve(c.vocab));
  for (const auto& e : c.external) {
    for (const auto& stem : {e.valid, e.test}) {
      inputs.push_back(c.resolve(stem + ".tsv"));
      inputs.push_back(c.resolve(stem + ".manifest.json"));
    }
  }
  for (const auto& p : inputs) {
    if (!fs::exists(p)) fail(ErrorCode::Io, "run config references a missing file: " + p.string());
  }
  return c;
}

// ---------------------------------------------------------------------------

namespace {

class EventLog {
 public:
  explicit EventLog(const fs::path& path) : out_(path, std::ios::trunc) {
    if (!out_) fail(ErrorCode::Io, "cannot write " + path.string());
  }
  void write(const io::Json& event) {
    out_ << event.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

/// Content-hash keyed stage bookkeeping under `<root>/stages/`.
class StageCache {
 public:
  StageCache(fs::path root, EventLog& events) : root_(std::move(root)), events_(events) {}

  /// Runs `body` unless the stage's recorded key and output hashes match.
  /// Returns the hash of the stage outputs.
  std::string run(const std::string& stage, const io::Json& key_material, const std::vector<std::string>& outputs,
                  const std::function<void()>& body) {
    const std::string key = io::sha256_json(key_material);
    const fs::path record = root_ / "stages" / (stage + ".json");
    if (fs::exists(record)) {
      const io::Json j = io::read_json(record);
      bool reusable = j.value("key", std::string()) == key;
      for (const auto& rel : outputs) {
        if (!reusable) break;
        if (!j.at("outputs").contains(rel) || !fs::exists(root_ / rel)) {
          reusable = false;
          break;
        }
        if (io::sha256_file(root_ / rel) != j.at("outputs").at(rel).get<std::string>()) {
          fail(ErrorCode::HashMismatch, "stale artifact " + (root_ / rel).string() + " no longer matches stage '" +
                                            stage + "'; delete it or the stage record to rebuild");
        }
      }
      if (reusable) {
        ++cached_;
        events_.write({{"stage", stage}, {"status", "cached"}, {"key", key}});
        spdlog::info("{}: up to date", stage);
        return io::sha256_json(j.at("outputs"));
      }
    }
    spdlog::info("{}: running", stage);
    try {
      body();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::HashMismatch || e.code() == ErrorCode::StageFailure) throw;
      events_.write({{"stage", stage}, {"status", "failed"}, {"error", std::string(to_string(e.code()))}});
      fail(ErrorCode::StageFailure, "stage '" + stage + "' failed: [" + std::string(to_string(e.code())) + "] " +
                                        e.what());
    } catch (const std::exception& e) {
      events_.write({{"stage", stage}, {"status", "failed"}});
      fail(ErrorCode::StageFailure, "stage '" + stage + "' failed: " + e.what());
    }
    io::Json hashes = io::Json::object();
    for (const auto& rel : outputs) hashes[rel] = io::sha256_file(root_ / rel);
    io::write_json(record, {{"stage", stage}, {"key", key}, {"outputs", hashes}});
    ++run_;
    events_.write({{"stage", stage}, {"status", "run"}, {"key", key}});
    return io::sha256_json(hashes);
  }

  std::size_t stages_run() const { return run_; }
  std::size_t stages_cached() const { return cached_; }

 private:
  fs::path root_;
  EventLog& events_;
  std::size_t run_ = 0;
  std::size_t cached_ = 0;
};

std::vector<const ScoreSet*> pointers(const std::vector<ScoreSet>& sets) {
  std::vector<const ScoreSet*> out;
  for (const auto& s : sets) out.push_back(&s);
  return out;
}

std::string format_ranks(const std::vector<std::optional<std::size_t>>& ranks) {
  std::string body;
  for (std::size_t q = 0; q < ranks.size(); ++q) {
    body += std::to_string(q / 2);
    body += '\t';
    body += to_string(static_cast<Side>(q % 2));
    body += '\t';
    body += ranks[q] ? std::to_string(*ranks[q]) : std::string("NA");
    body += '\n';
  }
  return body;
}

io::Json breakdown_json(const std::map<std::string, Metrics>& cells) {
  io::Json j = io::Json::object();
  for (const auto& [k, m] : cells) j[k] = to_json(m);
  return j;
}

}  // namespace

RunResult run_pipeline(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  EventLog events(out / "events.jsonl");
  StageCache cache(out, events);

  // The resolved config lets `validate` find the dataset later.
  RunConfig resolved = cfg;
  resolved.triples = fs::absolute(cfg.resolve(cfg.triples)).string();
  resolved.entities = fs::absolute(cfg.resolve(cfg.entities)).string();
  if (!cfg.vocab.empty()) resolved.vocab = fs::absolute(cfg.resolve(cfg.vocab)).string();
  for (auto& e : resolved.external) {
    e.valid = fs::absolute(cfg.resolve(e.valid)).string();
    e.test = fs::absolute(cfg.resolve(e.test)).string();
  }
  resolved.base_dir.clear();
  io::write_json(out / "config.json", to_json(resolved));

  const KnowledgeGraph kg = load_graph(resolved.triples, resolved.entities);
  const std::string dataset_hash =
      io::sha256_json({{"triples", io::sha256_file(resolved.triples)}, {"entities", io::sha256_file(resolved.entities)}});
  const std::string vocab_hash = cfg.vocab.empty() ? "" : io::sha256_file(resolved.vocab);

  // split
  const std::string split_hash = cache.run(
      "split", {{"dataset", dataset_hash}, {"mode", to_string(cfg.mode)}, {"valid_frac", cfg.valid_frac},
                {"test_frac", cfg.test_frac}, {"seed", cfg.seed}},
      {"split/train.tsv", "split/valid.tsv", "split/test.tsv", "split/manifest.json"}, [&] {
        const Split s = cfg.mode == SplitMode::Transductive
                            ? make_transductive_split(kg, cfg.valid_frac, cfg.test_frac, cfg.seed)
                            : make_inductive_split(kg, cfg.valid_frac, cfg.test_frac, cfg.seed);
        save_split(out / "split", s, kg);
      });
  const Split split = load_split(out / "split", kg);
  const KnowledgeGraph train_kg = kg.with_triples(split.train);

  // negatives
  cache.run("negatives", {{"split", split_hash}, {"m_eval", cfg.m_eval}, {"seed", cfg.seed}},
            {"negatives/valid.tsv", "negatives/valid.manifest.json", "negatives/test.tsv",
             "negatives/test.manifest.json"},
            [&] {
              const auto negs = generate_negatives(kg, split, cfg.m_eval, derive_seed(cfg.seed, 0x6e6567));
              save_negatives(out / "negatives", "valid", negs.valid, kg);
              save_negatives(out / "negatives", "test", negs.test, kg);
            });
  std::map<std::string, NegativeSets> negs;
  std::map<std::string, std::string> neg_hash;
  negs["valid"] = load_negatives(out / "negatives", "valid", split.valid, kg);
  negs["test"] = load_negatives(out / "negatives", "test", split.test, kg);
  for (const char* part : {"valid", "test"}) neg_hash[part] = negatives_manifest_hash(out / "negatives", part);

  // train-kge and score
  std::vector<std::string> model_names;
  std::map<std::string, std::vector<ScoreSet>> scores;  // part -> per model
  std::map<std::string, std::vector<std::string>> score_hash;
  io::Json model_info = io::Json::object();
  for (std::size_t i = 0; i < cfg.models.size(); ++i) {
    const auto& spec = cfg.models[i];
    KgeConfig config = spec.config;
    config.seed = derive_seed(cfg.seed, 0x6b6765, i);
    const std::string stem = "models/" + spec.name;
    const std::string model_hash = cache.run(
        "train-kge." + spec.name,
        {{"split", split_hash}, {"valid_negatives", neg_hash["valid"]}, {"config", to_json(config)}},
        {stem + ".json", stem + ".entities.f32", stem + ".relations.f32"}, [&] {
          const KgeModel model = train_kge(train_kg, &negs["valid"], config, [&](const TrainingEvent& ev) {
            events.write({{"stage", "train-kge." + spec.name},
                          {"event", "eval"},
                          {"step", ev.step},
                          {"loss", ev.loss},
                          {"valid_mrr", ev.valid_mrr}});
          });
          save_model(out / "models", spec.name, model, kg);
        });
    const KgeModel model = load_model(out / "models", spec.name, kg);
    model_info[spec.name] = {{"config", to_json(config)},
                             {"best_step", model.best_step},
                             {"best_valid_mrr", model.best_valid_mrr}};
    model_names.push_back(spec.name);
    for (const char* part : {"valid", "test"}) {
      const std::string sstem = spec.name + "." + part;
      score_hash[part].push_back(cache.run(
          "score." + sstem, {{"model", model_hash}, {"negatives", neg_hash[part]}},
          {"scores/" + sstem + ".tsv", "scores/" + sstem + ".manifest.json"}, [&] {
            save_score_set(out / "scores", sstem, score_queries(model, negs[part], spec.name, neg_hash[part]));
          }));
      scores[part].push_back(load_score_set(out / "scores", sstem, neg_hash[part]));
    }
  }
  for (const auto& ext : resolved.external) {
    model_names.push_back(ext.name);
    for (const char* part : {"valid", "test"}) {
      const auto [dir, stem] = split_stem(part == std::string("valid") ? ext.valid : ext.test);
      ScoreSet s = load_score_set(dir, stem, neg_hash[part]);
      if (s.model_name != ext.name) {
        fail(ErrorCode::SchemaMismatch,
             "external score set names model '" + s.model_name + "' but the config calls it '" + ext.name + "'");
      }
      check_aligned(s, negs[part]);
      score_hash[part].push_back(io::sha256_file(dir / (stem + ".manifest.json")));
      scores[part].push_back(std::move(s));
    }
  }

  // features
  std::map<std::string, FeatureMatrix> features;
  std::map<std::string, std::string> feature_hash;
  for (const char* part : {"valid", "test"}) {
    feature_hash[part] = cache.run(
        std::string("features.") + part,
        {{"split", split_hash}, {"vocab", vocab_hash}, {"scores", score_hash[part]}, {"models", model_names}},
        {std::string("features/") + part + ".tsv", std::string("features/") + part + ".manifest.json"}, [&] {
          std::optional<Vocabulary> vocab;
          if (!cfg.vocab.empty()) vocab = Vocabulary::load(resolved.vocab);
          const FeatureContext ctx(train_kg, make_feature_schema(kg, model_names), vocab);
          save_features(out / "features", part, featurize_part(ctx, negs[part].triples, pointers(scores[part])));
        });
    features[part] = load_features(out / "features", part);
  }
  const auto feature_names = features["valid"].schema.column_names();
  const std::string schema_version = features["valid"].schema.version;
  const ml::Matrix valid_rows = rows_per_query(features["valid"].rows);
  const ml::Matrix test_rows = rows_per_query(features["test"].rows);
  const auto valid_ptrs = pointers(scores["valid"]);
  const auto test_ptrs = pointers(scores["test"]);

  // integrators, fitted on the validation part only
  io::Json integration = io::Json::object();
  std::vector<std::pair<std::string, ScoreSet>> integrated;
  for (const auto& method : cfg.methods) {
    std::string fit_hash;
    if (method == "global-average") {
      fit_hash = cache.run("fit.global-average", {{"scores", score_hash["valid"]}, {"step", cfg.grid_step}},
                           {"integrators/global.json"}, [&] {
                             save_global(out / "integrators", "global",
                                         fit_global_average(valid_ptrs, cfg.grid_step), model_names);
                           });
      const GlobalWeights w = load_global(out / "integrators", "global");
      integration[method] = {{"alpha", w.alpha}, {"valid_mrr", w.valid_mrr}};
    } else if (method == "router") {
      fit_hash = cache.run(
          "fit.router",
          {{"scores", score_hash["valid"]},
           {"features", feature_hash["valid"]},
           {"kind", to_string(cfg.router_kind)},
           {"grid", cfg.router_grid},
           {"seed", cfg.seed}},
          {"integrators/router.json", "integrators/router.f32", "integrators/router.cv.json"}, [&] {
            std::vector<std::vector<std::optional<std::size_t>>> ranks;
            RouterTrainingData data;
            for (const auto& s : scores["valid"]) {
              ranks.push_back(compute_ranks(s));
              data.model_mrr.push_back(metrics_from_ranks(ranks.back()).mrr);
            }
            data.features = valid_rows;
            data.labels = label_router_targets(ranks);
            data.model_names = model_names;
            data.feature_names = feature_names;
            data.schema_version = schema_version;
            std::vector<CvResult> cv;
            const RouterModel router =
                train_router(data, cfg.router_kind, router_grid_from_json(cfg.router_kind, cfg.router_grid),
                             derive_seed(cfg.seed, 0x726f75), &cv);
            save_router(out / "integrators", "router", router);
            io::Json log = io::Json::array();
            for (const auto& r : cv) log.push_back({{"hyper", r.hyper}, {"cv_accuracy", r.accuracy}});
            io::write_json(out / "integrators" / "router.cv.json", log);
          });
      const RouterModel router = load_router(out / "integrators", "router");
      io::Json info = {{"kind", to_string(router.kind)},
                       {"cv_accuracy", router.cv_accuracy},
                       {"hyper", router.hyper},
                       {"all_same_model", model_names[router.all_same_model]}};
      if (!router.warning.empty()) info["warning"] = router.warning;
      if (router.kind == RouterKind::Gbdt || router.kind == RouterKind::DecisionTree) {
        io::Json top = io::Json::array();
        const auto imp = feature_importance(router);
        for (std::size_t i = 0; i < std::min<std::size_t>(10, imp.size()); ++i) {
          top.push_back({{"feature", imp[i].first}, {"gain", imp[i].second}});
        }
        info["feature_importance"] = top;
      }
      integration[method] = info;
    } else {
      fit_hash = cache.run("fit.weighted-average",
                           {{"scores", score_hash["valid"]},
                            {"features", feature_hash["valid"]},
                            {"grid", cfg.weighter_grid},
                            {"seed", cfg.seed}},
                           {"integrators/weighter.json", "integrators/weighter.f32"}, [&] {
                             save_weighter(out / "integrators", "weighter",
                                           train_weighter(valid_rows, valid_ptrs, feature_names, schema_version,
                                                          weighter_grid_from_json(cfg.weighter_grid),
                                                          derive_seed(cfg.seed, 0x776569)));
                           });
      const WeightModel w = load_weighter(out / "integrators", "weighter");
      integration[method] = {{"hyper", w.hyper}, {"holdout_mrr", w.holdout_mrr}};
    }

    const std::string sstem = method + ".test";
    cache.run("integrate." + method,
              {{"integrator", fit_hash}, {"scores", score_hash["test"]}, {"features", feature_hash["test"]}},
              {"scores/" + sstem + ".tsv", "scores/" + sstem + ".manifest.json"}, [&] {
                ScoreSet s;
                if (method == "global-average") {
                  s = integrate_global(load_global(out / "integrators", "global"), test_ptrs);
                } else if (method == "router") {
                  s = integrate_router(load_router(out / "integrators", "router"), test_ptrs, test_rows,
                                       features["test"].schema.column_names());
                } else {
                  s = integrate_weighter(load_weighter(out / "integrators", "weighter"), test_ptrs, test_rows,
                                         features["test"].schema.column_names());
                }
                save_score_set(out / "scores", sstem, s);
              });
    integrated.emplace_back(method, load_score_set(out / "scores", sstem, neg_hash["test"]));
  }
  if (test_ptrs.size() > 1) {
    cache.run("integrate.oracle-router", {{"scores", score_hash["test"]}},
              {"scores/oracle-router.test.tsv", "scores/oracle-router.test.manifest.json"},
              [&] { save_score_set(out / "scores", "oracle-router.test", oracle_route(test_ptrs)); });
    integrated.emplace_back("oracle-router", load_score_set(out / "scores", "oracle-router.test", neg_hash["test"]));
  }

  // evaluate
  std::vector<std::string> eval_outputs = {"report.json", "report.txt"};
  std::vector<std::pair<std::string, const ScoreSet*>> evaluated;
  for (std::size_t i = 0; i < model_names.size(); ++i) evaluated.emplace_back(model_names[i], &scores["test"][i]);
  for (const auto& [name, s] : integrated) evaluated.emplace_back(name, &s);
  for (const auto& [name, s] : evaluated) eval_outputs.push_back("ranks/" + name + ".test.tsv");
  std::vector<std::string> all_hashes = score_hash["test"];
  for (const auto& [name, s] : integrated) {
    all_hashes.push_back(io::sha256_file(out / "scores" / (name + ".test.manifest.json")));
  }
  cache.run("evaluate", {{"scores", all_hashes}, {"valid_scores", score_hash["valid"]}, {"integration", integration},
                         {"models", model_info}},
            eval_outputs, [&] {
              io::Json report;
              report["schema"] = kReportSchema;
              io::Json cfg_json = to_json(cfg);
              cfg_json.erase("output_dir");
              report["config_sha256"] = io::sha256_json(cfg_json);
              report["seed"] = cfg.seed;
              report["dataset"] = {{"sha256", dataset_hash},
                                   {"entities", kg.num_entities()},
                                   {"relations", kg.num_relations()},
                                   {"triples", kg.triples().size()},
                                   {"duplicates_dropped", kg.duplicates_dropped()}};
              report["split"] = {{"mode", to_string(split.mode)},
                                 {"train", split.train.size()},
                                 {"valid", split.valid.size()},
                                 {"test", split.test.size()}};
              report["negatives"] = {{"m_eval", cfg.m_eval},
                                     {"valid", {{"queries", negs["valid"].num_queries()},
                                                {"empty", negs["valid"].num_empty()},
                                                {"short", negs["valid"].num_short()}}},
                                     {"test", {{"queries", negs["test"].num_queries()},
                                               {"empty", negs["test"].num_empty()},
                                               {"short", negs["test"].num_short()}}}};
              io::Json models = io::Json::object();
              std::vector<std::pair<std::string, Metrics>> table;
              for (std::size_t i = 0; i < model_names.size(); ++i) {
                io::Json m = model_info.contains(model_names[i]) ? model_info[model_names[i]] : io::Json::object();
                m["valid"] = to_json(compute_metrics(negs["valid"], scores["valid"][i]));
                m["test"] = to_json(compute_metrics(negs["test"], scores["test"][i]));
                models[model_names[i]] = m;
              }
              report["models"] = models;
              for (const auto& [name, s] : integrated) {
                if (!integration.contains(name)) integration[name] = io::Json::object();
                integration[name]["test"] = to_json(compute_metrics(negs["test"], s));
              }
              report["integration"] = integration;
              io::Json by_relation = io::Json::object(), by_description = io::Json::object();
              for (const auto& [name, s] : evaluated) {
                by_relation[name] = breakdown_json(per_relation_breakdown(negs["test"], *s, kg));
                by_description[name] = breakdown_json(description_breakdown(negs["test"], *s, kg));
                const auto ranks = compute_ranks(*s);
                table.emplace_back(name, metrics_from_ranks(ranks));
                io::write_text(out / "ranks" / (name + ".test.tsv"), format_ranks(ranks));
              }
              report["breakdown"] = {{"relation", by_relation}, {"description", by_description}};
              io::write_json(out / "report.json", report);
              std::string text = "test metrics (x100), split " + to_string(split.mode) + " " +
                                 std::to_string(split.train.size()) + "/" + std::to_string(split.valid.size()) +
                                 "/" + std::to_string(split.test.size()) + "\n\n";
              text += format_metrics_table(table);
              io::write_text(out / "report.txt", text);
            });

  RunResult result;
  result.output_dir = out;
  result.report = io::read_json(out / "report.json");
  result.stages_run = cache.stages_run();
  result.stages_cached = cache.stages_cached();
  spdlog::info("done: {} stages run, {} up to date; report at {}", result.stages_run, result.stages_cached,
               (out / "report.json").string());
  return result;
}

// ---------------------------------------------------------------------------

std::vector<ValidationCheck> validate_artifacts(const fs::path& dir, std::uint64_t seed) {
  std::vector<ValidationCheck> checks;
  auto add = [&](std::string name, bool ok, std::string detail) {
    checks.push_back({std::move(name), ok, std::move(detail)});
  };
  auto guarded = [&](const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      add(name, false, e.what());
    }
  };

  // Artifact hashes against every stage record.
  guarded("artifact-hashes", [&] {
    std::size_t files = 0;
    std::vector<std::string> bad;
    std::vector<fs::path> records;
    for (const auto& entry : fs::directory_iterator(dir / "stages")) records.push_back(entry.path());
    std::sort(records.begin(), records.end());
    for (const auto& record : records) {
      const io::Json j = io::read_json(record);
      for (const auto& [rel, hash] : j.at("outputs").items()) {
        ++files;
        if (!fs::exists(dir / rel) || io::sha256_file(dir / rel) != hash.get<std::string>()) bad.push_back(rel);
      }
    }
    add("artifact-hashes", bad.empty(),
        bad.empty() ? std::to_string(files) + " files match" : "changed: " + fmt::format("{}", fmt::join(bad, ", ")));
  });

  std::optional<RunConfig> cfg;
  std::optional<KnowledgeGraph> kg;
  guarded("config", [&] {
    cfg = run_config_from_json(io::read_json(dir / "config.json"));
    kg = load_graph(cfg->triples, cfg->entities);
  });
  if (!kg) return checks;

  // Split invariants, read without hash verification so they can be
  // reported even when the manifest no longer matches.
  std::optional<Split> split;
  guarded("split", [&] {
    Split s;
    s.train = read_triples(dir / "split/train.tsv", *kg);
    s.valid = read_triples(dir / "split/valid.tsv", *kg);
    s.test = read_triples(dir / "split/test.tsv", *kg);
    s.mode = parse_split_mode(io::read_json(dir / "split/manifest.json").at("mode").get<std::string>());
    split = s;
  });
  if (!split) return checks;
  {
    std::set<Triple> train(split->train.begin(), split->train.end()), seen;
    std::size_t overlaps = 0;
    for (const auto* part : {&split->valid, &split->test}) {
      for (const Triple& t : *part) overlaps += train.count(t) + !seen.insert(t).second;
    }
    add("split-disjoint", overlaps == 0, std::to_string(overlaps) + " shared triples");
    const auto deg = undirected_degrees(kg->num_entities(), split->train);
    std::size_t violations = 0;
    if (split->mode == SplitMode::Transductive) {
      for (const auto* part : {&split->valid, &split->test}) {
        for (const Triple& t : *part) violations += deg[t.head] == 0 || deg[t.tail] == 0;
      }
      add("split-transductive", violations == 0, std::to_string(violations) + " held-out triples touch unseen entities");
    } else {
      for (const Triple& t : split->test) violations += deg[t.head] > 0 && deg[t.tail] > 0;
      add("split-inductive", violations == 0, std::to_string(violations) + " test triples lack an unseen endpoint");
    }
  }

  // Negatives: type preservation and filtering, parsed leniently.
  const FilterIndex filter(*kg, *split);
  for (const char* part : {"valid", "test"}) {
    const auto& triples = std::string(part) == "valid" ? split->valid : split->test;
    std::size_t rows = 0, type_bad = 0, filter_bad = 0, dup = 0;
    std::set<std::tuple<std::size_t, int, EntityId>> seen;
    guarded(std::string("negatives-") + part, [&] {
      io::for_each_row(dir / "negatives" / (std::string(part) + ".tsv"), 3,
                       [&](std::span<const std::string_view> f, std::size_t) {
                         ++rows;
                         const auto q = static_cast<std::size_t>(io::parse_int(f[0]));
                         const Side side = parse_side(f[1]);
                         const auto e = kg->find_entity(f[2]);
                         if (q >= triples.size() || !e) {
                           ++type_bad;
                           return;
                         }
                         const Triple& t = triples[q];
                         const EntityId replaced = side == Side::Head ? t.head : t.tail;
                         if (kg->type_of(*e) != kg->type_of(replaced)) ++type_bad;
                         const Triple c = side == Side::Head ? Triple{*e, t.rel, t.tail} : Triple{t.head, t.rel, *e};
                         if (*e == replaced || filter.is_positive(c)) ++filter_bad;
                         if (!seen.insert({q, static_cast<int>(side), *e}).second) ++dup;
                       });
      add(std::string("negatives-type-preservation.") + part, type_bad == 0,
          std::to_string(type_bad) + " of " + std::to_string(rows) + " candidates change type");
      add(std::string("negatives-filtering.") + part, filter_bad == 0 && dup == 0,
          std::to_string(filter_bad) + " known positives, " + std::to_string(dup) + " duplicates");
    });
  }

  // Simplex sums.
  if (fs::exists(dir / "integrators/global.json")) {
    guarded("simplex-global", [&] {
      const auto w = load_global(dir / "integrators", "global");
      double sum = 0;
      bool nonneg = true;
      for (double a : w.alpha) {
        sum += a;
        nonneg = nonneg && a >= 0;
      }
      add("simplex-global", nonneg && std::abs(sum - 1) < 1e-9, fmt::format("alpha sums to {}", sum));
    });
  }
  if (fs::exists(dir / "integrators/weighter.json")) {
    guarded("simplex-weighter", [&] {
      const auto w = load_weighter(dir / "integrators", "weighter");
      const auto feats = load_features(dir / "features", "test");
      double worst = 0;
      for (const auto& row : feats.rows) {
        const auto a = w.weights(row);
        double sum = 0;
        for (double x : a) {
          sum += x;
          if (x < 0) worst = std::max(worst, 1.0);
        }
        worst = std::max(worst, std::abs(sum - 1));
      }
      add("simplex-weighter", worst < 1e-9, fmt::format("max |sum - 1| = {:.3g}", worst));
    });
  }

  // Ranks recomputed on a 1% sample and metrics against the report.
  guarded("rank-recomputation", [&] {
    const io::Json report = io::read_json(dir / "report.json");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir / "ranks")) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    Rng rng(derive_seed(seed, 0x76616c));
    for (const auto& path : files) {
      std::string name = path.filename().string();
      name = name.substr(0, name.size() - std::string(".test.tsv").size());
      std::vector<std::optional<std::size_t>> stored;
      io::for_each_row(path, 3, [&](std::span<const std::string_view> f, std::size_t) {
        stored.push_back(f[2] == "NA" ? std::nullopt
                                      : std::optional<std::size_t>(static_cast<std::size_t>(io::parse_int(f[2]))));
      });
      const ScoreSet s = load_score_set(dir / "scores", name + ".test");
      if (s.queries.size() != stored.size()) {
        add("rank-recomputation." + name, false, "rank file and score set disagree on the query count");
        continue;
      }
      std::vector<std::size_t> order(stored.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      const std::size_t sample = std::max<std::size_t>(1, (stored.size() + 99) / 100);
      for (std::size_t i = 0; i < sample && i < order.size(); ++i) {
        std::swap(order[i], order[i + rng.uniform_index(order.size() - i)]);
      }
      std::size_t mismatches = 0;
      for (std::size_t i = 0; i < sample && i < order.size(); ++i) {
        const auto& q = s.queries[order[i]];
        const std::optional<std::size_t> r =
            q.negatives.empty() ? std::nullopt : std::optional<std::size_t>(rank_of_positive(q.positive, q.negatives));
        mismatches += r != stored[order[i]];
      }
      const Metrics m = metrics_from_ranks(stored);
      const io::Json* reported = nullptr;
      if (report.at("models").contains(name)) reported = &report.at("models").at(name).at("test");
      if (report.at("integration").contains(name)) reported = &report.at("integration").at(name).at("test");
      const bool metrics_ok = reported && std::abs(reported->at("mrr").get<double>() - m.mrr) < 1e-12 &&
                              std::abs(reported->at("hits10").get<double>() - m.hits10) < 1e-12;
      add("rank-recomputation." + name, mismatches == 0 && metrics_ok,
          fmt::format("{} sampled queries, {} mismatches, report metrics {}", std::min(sample, order.size()),
                      mismatches, metrics_ok ? "match" : "differ"));
    }
  });
  return checks;
}

}  // namespace kgc
