// Command-line front end for the kgc toolkit.

#include <omp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "kgc/ensemble.hpp"
#include "kgc/error.hpp"
#include "kgc/evaluate.hpp"
#include "kgc/features.hpp"
#include "kgc/inductive.hpp"
#include "kgc/kge.hpp"
#include "kgc/pipeline.hpp"
#include "kgc/scoreset.hpp"
#include "kgc/splits.hpp"
#include "kgc/synthetic.hpp"

namespace fs = std::filesystem;
using namespace kgc;

namespace {

struct Common {
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string out;
};

struct GraphArgs {
  std::string triples;
  std::string entities;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--out", c.out, "Output directory (default $KGC_OUTPUT_ROOT/<command>)");
}

void add_graph(CLI::App* cmd, GraphArgs& g) {
  cmd->add_option("--triples", g.triples, "Triple TSV (head, relation, tail)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--entities", g.entities, "Entity metadata TSV (key, type, name, description)")
      ->required()
      ->check(CLI::ExistingFile);
}

fs::path output_dir(const Common& c, const std::string& command) {
  if (!c.out.empty()) return c.out;
  const char* root = std::getenv("KGC_OUTPUT_ROOT");
  return fs::path(root && *root ? root : "kgc-out") / command;
}

std::pair<fs::path, std::string> stem_of(const std::string& p) {
  const fs::path path(p);
  return {path.parent_path(), path.filename().string()};
}

EvalPart parse_part(const std::string& s) {
  if (s == "valid") return EvalPart::Valid;
  if (s == "test") return EvalPart::Test;
  fail(ErrorCode::InvalidArgument, "part must be valid or test");
}

const std::vector<Triple>& part_triples(const Split& split, const std::string& part) {
  return parse_part(part) == EvalPart::Valid ? split.valid : split.test;
}

std::vector<ScoreSet> load_scores(const std::vector<std::string>& stems, const std::string& neg_hash = {}) {
  std::vector<ScoreSet> out;
  for (const auto& s : stems) {
    const auto [dir, stem] = stem_of(s);
    out.push_back(load_score_set(dir, stem, neg_hash));
  }
  return out;
}

std::vector<const ScoreSet*> pointers(const std::vector<ScoreSet>& sets) {
  std::vector<const ScoreSet*> out;
  for (const auto& s : sets) out.push_back(&s);
  return out;
}

void print_json(const io::Json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgc: knowledge graph completion with KGE models and feature-based integration"};
  app.require_subcommand(1);
  bool deterministic = false;
  app.add_flag("--deterministic", deterministic, "Single-threaded execution everywhere");
  spdlog::set_default_logger(spdlog::stderr_color_mt("kgc"));
  spdlog::set_pattern("[%l] %v");

  Common common;
  GraphArgs graph;

  // make-synthetic
  SyntheticSpec spec;
  auto* synth = app.add_subcommand("make-synthetic", "Write a random typed KG (entities.tsv, triples.tsv)");
  add_common(synth, common);
  synth->add_option("--num-entities", spec.entities);
  synth->add_option("--num-types", spec.types);
  synth->add_option("--num-relations", spec.relations);
  synth->add_option("--num-triples", spec.triples);

  // split
  std::string mode = "transductive";
  double valid_frac = 0.1, test_frac = 0.1;
  auto* split_cmd = app.add_subcommand("split", "Build a train/valid/test split");
  add_common(split_cmd, common);
  add_graph(split_cmd, graph);
  split_cmd->add_option("--mode", mode)->check(CLI::IsMember({"transductive", "inductive"}));
  split_cmd->add_option("--valid-frac", valid_frac);
  split_cmd->add_option("--test-frac", test_frac);

  // negatives
  std::string split_dir, neg_dir;
  std::size_t m_eval = 500;
  auto* neg_cmd = app.add_subcommand("negatives", "Sample fixed filtered negatives for valid and test");
  add_common(neg_cmd, common);
  add_graph(neg_cmd, graph);
  neg_cmd->add_option("--split", split_dir, "Split directory")->required();
  neg_cmd->add_option("--m-eval", m_eval, "Negatives per query side");

  // train-kge
  KgeConfig kcfg;
  std::string kind = "complex", config_json, name;
  auto* train_cmd = app.add_subcommand("train-kge", "Train a KGE model, selecting the checkpoint by validation MRR");
  add_common(train_cmd, common);
  add_graph(train_cmd, graph);
  train_cmd->add_option("--split", split_dir)->required();
  train_cmd->add_option("--eval-negatives", neg_dir, "Negatives directory (its valid part drives checkpointing)")
      ->required();
  train_cmd->add_option("--model", kind)->check(CLI::IsMember({"transe", "distmult", "complex", "rotate"}));
  train_cmd->add_option("--dim", kcfg.dim);
  train_cmd->add_option("--margin", kcfg.margin);
  train_cmd->add_option("--lr", kcfg.lr);
  train_cmd->add_option("--negatives", kcfg.negatives, "Corruptions per positive");
  train_cmd->add_option("--l3", kcfg.l3);
  train_cmd->add_option("--batch-size", kcfg.batch_size);
  train_cmd->add_option("--steps,--max-steps", kcfg.max_steps);
  train_cmd->add_option("--eval-every", kcfg.eval_every);
  train_cmd->add_option("--config", config_json, "JSON file with KGE settings (overrides flags)");
  train_cmd->add_option("--name", name, "Model name (default: the model kind)");

  // score
  std::string part = "test", model_stem;
  auto* score_cmd = app.add_subcommand("score", "Score the fixed negatives of one part with a trained model");
  add_common(score_cmd, common);
  add_graph(score_cmd, graph);
  score_cmd->add_option("--split", split_dir)->required();
  score_cmd->add_option("--negatives", neg_dir)->required();
  score_cmd->add_option("--part", part)->check(CLI::IsMember({"valid", "test"}));
  score_cmd->add_option("--model", model_stem, "Model path without extension")->required();
  score_cmd->add_option("--name", name);

  // features
  std::vector<std::string> score_stems;
  std::string vocab_path;
  auto* feat_cmd = app.add_subcommand("features", "Featurize the evaluation triples of one part");
  add_common(feat_cmd, common);
  add_graph(feat_cmd, graph);
  feat_cmd->add_option("--split", split_dir)->required();
  feat_cmd->add_option("--negatives", neg_dir)->required();
  feat_cmd->add_option("--part", part)->check(CLI::IsMember({"valid", "test"}));
  feat_cmd->add_option("--scores", score_stems, "ScoreSet paths without extension, one per model")->required();
  feat_cmd->add_option("--vocab", vocab_path, "Word-piece vocabulary, one piece per line");

  // fit-average
  double step = 0.05;
  auto* avg_cmd = app.add_subcommand("fit-average", "Grid-search one global weight vector on validation scores");
  add_common(avg_cmd, common);
  avg_cmd->add_option("--scores", score_stems)->required();
  avg_cmd->add_option("--step", step);

  // train-router
  std::string router_kind = "gbdt", features_stem, grid_json;
  std::size_t folds = 5;
  auto* router_cmd = app.add_subcommand("train-router", "Train a per-query model router on validation queries");
  add_common(router_cmd, common);
  router_cmd->add_option("--kind", router_kind)
      ->check(CLI::IsMember({"logistic-regression", "decision-tree", "gbdt", "mlp"}));
  router_cmd->add_option("--features", features_stem, "Feature matrix path without extension")->required();
  router_cmd->add_option("--scores", score_stems)->required();
  router_cmd->add_option("--grid", grid_json, "JSON file: hyperparameter name -> list of values");
  router_cmd->add_option("--folds", folds);

  // train-weighter
  auto* weighter_cmd = app.add_subcommand("train-weighter", "Train the input-dependent weighted average");
  add_common(weighter_cmd, common);
  weighter_cmd->add_option("--features", features_stem)->required();
  weighter_cmd->add_option("--scores", score_stems)->required();
  weighter_cmd->add_option("--grid", grid_json);

  // integrate
  std::string method = "router", integrator_stem;
  auto* integrate_cmd = app.add_subcommand("integrate", "Combine test scores with a fitted integrator");
  add_common(integrate_cmd, common);
  integrate_cmd->add_option("--method", method)->check(CLI::IsMember({"global-average", "router", "weighted-average"}));
  integrate_cmd->add_option("--integrator", integrator_stem, "Integrator path without extension")->required();
  integrate_cmd->add_option("--scores", score_stems)->required();
  integrate_cmd->add_option("--features", features_stem, "Needed for router and weighted-average");
  integrate_cmd->add_option("--name", name);

  // evaluate
  std::vector<std::string> breakdowns;
  auto* eval_cmd = app.add_subcommand("evaluate", "MRR and Hits@k of ScoreSets against fixed negatives");
  add_common(eval_cmd, common);
  add_graph(eval_cmd, graph);
  eval_cmd->add_option("--split", split_dir)->required();
  eval_cmd->add_option("--negatives", neg_dir)->required();
  eval_cmd->add_option("--part", part)->check(CLI::IsMember({"valid", "test"}));
  eval_cmd->add_option("--scores", score_stems)->required();
  eval_cmd->add_option("--breakdown", breakdowns)->delimiter(',')->check(CLI::IsMember({"relation", "description"}));

  // impute
  std::string text_emb;
  bool with_baseline = false;
  auto* impute_cmd = app.add_subcommand("impute", "Fill unseen entities from their nearest same-type text neighbour");
  add_common(impute_cmd, common);
  add_graph(impute_cmd, graph);
  impute_cmd->add_option("--split", split_dir)->required();
  impute_cmd->add_option("--model", model_stem)->required();
  impute_cmd->add_option("--text-emb", text_emb, "Text embedding manifest (JSON)")->required()->check(CLI::ExistingFile);
  impute_cmd->add_option("--name", name);
  impute_cmd->add_flag("--baseline", with_baseline, "Also write the random-fill baseline");

  // run
  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "Run the whole pipeline from a config file");
  add_common(run_cmd, common);
  run_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  run_cmd->add_flag("--deterministic", deterministic, "Single-threaded execution everywhere");

  // validate
  std::string validate_dir;
  auto* validate_cmd = app.add_subcommand("validate", "Re-check the invariants of a pipeline output directory");
  add_common(validate_cmd, common);
  validate_cmd->add_option("--dir", validate_dir)->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  if (deterministic) omp_set_num_threads(1);

  try {
    if (*synth) {
      const auto out = output_dir(common, "synthetic");
      const KnowledgeGraph kg = make_synthetic_kg(spec, common.seed);
      write_kg_files(out, kg);
      spdlog::info("{} entities, {} triples written to {}", kg.num_entities(), kg.triples().size(), out.string());
      return 0;
    }
    if (*run_cmd) {
      RunConfig cfg = load_run_config(config_path);
      if (run_cmd->count("--seed")) cfg.seed = common.seed;
      fs::path out = common.out;
      if (out.empty()) {
        const char* root = std::getenv("KGC_OUTPUT_ROOT");
        out = root && *root ? fs::path(root) / cfg.output_dir : cfg.resolve(cfg.output_dir);
      }
      const RunResult r = run_pipeline(cfg, out);
      std::cout << io::read_text(out / "report.txt");
      return 0;
    }
    if (*validate_cmd) {
      const auto checks = validate_artifacts(validate_dir, common.seed);
      std::size_t failed = 0;
      for (const auto& c : checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
        failed += !c.passed;
      }
      std::cout << checks.size() - failed << "/" << checks.size() << " checks passed\n";
      return failed == 0 ? 0 : 1;
    }
    if (*avg_cmd) {
      const auto sets = load_scores(score_stems);
      const auto w = fit_global_average(pointers(sets), step);
      std::vector<std::string> names;
      for (const auto& s : sets) names.push_back(s.model_name);
      const auto out = output_dir(common, "fit-average");
      save_global(out, "global", w, names);
      print_json({{"alpha", w.alpha}, {"valid_mrr", w.valid_mrr}});
      return 0;
    }
    if (*router_cmd || *weighter_cmd) {
      const auto [fdir, fstem] = stem_of(features_stem);
      const FeatureMatrix fm = load_features(fdir, fstem);
      const auto sets = load_scores(score_stems);
      std::vector<std::string> names;
      for (const auto& s : sets) names.push_back(s.model_name);
      if (names != fm.schema.model_names) {
        fail(ErrorCode::SchemaMismatch, "score sets must be given in the feature schema's model order");
      }
      const io::Json grid = grid_json.empty() ? io::Json::object() : io::read_json(grid_json);
      const auto rows = rows_per_query(fm.rows);
      if (*router_cmd) {
        const RouterKind rk = parse_router_kind(router_kind);
        RouterTrainingData data;
        std::vector<std::vector<std::optional<std::size_t>>> ranks;
        for (const auto& s : sets) {
          ranks.push_back(compute_ranks(s));
          data.model_mrr.push_back(metrics_from_ranks(ranks.back()).mrr);
        }
        data.features = rows;
        data.labels = label_router_targets(ranks);
        data.model_names = names;
        data.feature_names = fm.schema.column_names();
        data.schema_version = fm.schema.version;
        std::vector<CvResult> cv;
        const RouterModel router = train_router(data, rk, router_grid_from_json(rk, grid), common.seed, &cv, folds);
        const auto out = output_dir(common, "train-router");
        save_router(out, "router", router);
        if (!router.warning.empty()) spdlog::warn("{}", router.warning);
        print_json({{"kind", to_string(router.kind)}, {"cv_accuracy", router.cv_accuracy}, {"hyper", router.hyper}});
      } else {
        const WeightModel w = train_weighter(rows, pointers(sets), fm.schema.column_names(), fm.schema.version,
                                             weighter_grid_from_json(grid), common.seed);
        const auto out = output_dir(common, "train-weighter");
        save_weighter(out, "weighter", w);
        print_json({{"hyper", w.hyper}, {"holdout_mrr", w.holdout_mrr}});
      }
      return 0;
    }
    if (*integrate_cmd) {
      const auto sets = load_scores(score_stems);
      const auto [idir, istem] = stem_of(integrator_stem);
      ScoreSet combined;
      if (method == "global-average") {
        combined = integrate_global(load_global(idir, istem), pointers(sets));
      } else {
        if (features_stem.empty()) fail(ErrorCode::InvalidArgument, "--features is required for " + method);
        const auto [fdir, fstem] = stem_of(features_stem);
        const FeatureMatrix fm = load_features(fdir, fstem);
        const auto rows = rows_per_query(fm.rows);
        combined = method == "router"
                       ? integrate_router(load_router(idir, istem), pointers(sets), rows, fm.schema.column_names())
                       : integrate_weighter(load_weighter(idir, istem), pointers(sets), rows, fm.schema.column_names());
      }
      if (!name.empty()) combined.model_name = name;
      const auto out = output_dir(common, "integrate");
      save_score_set(out, name.empty() ? method : name, combined);
      return 0;
    }

    // The remaining commands need the graph.
    const KnowledgeGraph kg = load_graph(graph.triples, graph.entities);
    if (*split_cmd) {
      const Split s = parse_split_mode(mode) == SplitMode::Transductive
                          ? make_transductive_split(kg, valid_frac, test_frac, common.seed)
                          : make_inductive_split(kg, valid_frac, test_frac, common.seed);
      const auto out = output_dir(common, "split");
      save_split(out, s, kg);
      spdlog::info("{} split: {}/{}/{} written to {}", mode, s.train.size(), s.valid.size(), s.test.size(),
                   out.string());
      return 0;
    }
    const Split split = load_split(split_dir, kg);
    if (*neg_cmd) {
      const auto negs = generate_negatives(kg, split, m_eval, common.seed);
      const auto out = output_dir(common, "negatives");
      save_negatives(out, "valid", negs.valid, kg);
      save_negatives(out, "test", negs.test, kg);
      spdlog::info("negatives written to {} ({} empty valid pools, {} empty test pools)", out.string(),
                   negs.valid.num_empty(), negs.test.num_empty());
      return 0;
    }
    if (*train_cmd) {
      KgeConfig c = kcfg;
      c.kind = parse_kge_kind(kind);
      if (!config_json.empty()) {
        io::Json j = to_json(c);
        j.update(io::read_json(config_json));
        c = kge_config_from_json(j);
      }
      c.seed = common.seed;
      const NegativeSets valid = load_negatives(neg_dir, "valid", split.valid, kg);
      const KgeModel model = train_kge(kg.with_triples(split.train), &valid, c, [](const TrainingEvent& ev) {
        spdlog::info("step {:>6}  loss {:.6f}  valid MRR {:.4f}", ev.step, ev.loss, ev.valid_mrr);
      });
      const auto out = output_dir(common, "train-kge");
      save_model(out, name.empty() ? to_string(c.kind) : name, model, kg);
      spdlog::info("best validation MRR {:.4f} at step {}", model.best_valid_mrr, model.best_step);
      return 0;
    }
    const auto& triples = part_triples(split, part);
    const NegativeSets negs = load_negatives(neg_dir, part, triples, kg);
    const std::string neg_hash = negatives_manifest_hash(neg_dir, part);
    if (*score_cmd) {
      const auto [mdir, mstem] = stem_of(model_stem);
      const KgeModel model = load_model(mdir, mstem, kg);
      const std::string model_name = name.empty() ? mstem : name;
      const auto out = output_dir(common, "score");
      save_score_set(out, model_name + "." + part, score_queries(model, negs, model_name, neg_hash));
      return 0;
    }
    if (*feat_cmd) {
      const auto sets = load_scores(score_stems, neg_hash);
      std::vector<std::string> names;
      for (const auto& s : sets) names.push_back(s.model_name);
      std::optional<Vocabulary> vocab;
      if (!vocab_path.empty()) vocab = Vocabulary::load(vocab_path);
      const KnowledgeGraph train_kg = kg.with_triples(split.train);
      const FeatureContext ctx(train_kg, make_feature_schema(kg, names), vocab);
      const auto out = output_dir(common, "features");
      save_features(out, part, featurize_part(ctx, triples, pointers(sets)));
      return 0;
    }
    if (*eval_cmd) {
      const auto sets = load_scores(score_stems, neg_hash);
      std::vector<std::pair<std::string, Metrics>> rows;
      io::Json report = io::Json::object();
      for (const auto& s : sets) {
        const Metrics m = compute_metrics(negs, s);
        rows.emplace_back(s.model_name, m);
        io::Json entry = to_json(m);
        for (const auto& b : breakdowns) {
          const auto cells =
              b == "relation" ? per_relation_breakdown(negs, s, kg) : description_breakdown(negs, s, kg);
          io::Json cj = io::Json::object();
          for (const auto& [k, v] : cells) cj[k] = to_json(v);
          entry[b] = cj;
        }
        report[s.model_name] = entry;
      }
      std::cout << format_metrics_table(rows);
      if (!common.out.empty()) io::write_json(fs::path(common.out) / "metrics.json", report);
      return 0;
    }
    if (*impute_cmd) {
      const auto [mdir, mstem] = stem_of(model_stem);
      const KgeModel model = load_model(mdir, mstem, kg);
      const TextEmbeddingFile text = load_text_embeddings(text_emb);
      std::vector<Triple> eval = split.valid;
      eval.insert(eval.end(), split.test.begin(), split.test.end());
      const auto seen = seen_entities(kg, split.train);
      const auto unseen = unseen_entities(kg, split.train, eval);
      auto [imputed, report] = impute_embeddings(model, kg, text, seen, unseen);
      const auto out = output_dir(common, "impute");
      const std::string stem = name.empty() ? mstem + "-nn" : name;
      save_model(out, stem, imputed, kg);
      io::write_json(out / (stem + ".imputation.json"), to_json(report, kg));
      if (with_baseline) save_model(out, mstem + "-random", random_baseline(model, unseen, common.seed), kg);
      spdlog::info("imputed {} unseen entities into {}", report.entries.size(), (out / stem).string());
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
