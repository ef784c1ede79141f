#include "kgc/kge.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kgc/error.hpp"
#include "kgc/evaluate.hpp"
#include "kgc/io.hpp"

namespace kgc {

std::string to_string(KgeKind kind) {
  switch (kind) {
    case KgeKind::TransE: return "transe";
    case KgeKind::DistMult: return "distmult";
    case KgeKind::ComplEx: return "complex";
    case KgeKind::RotatE: return "rotate";
  }
  return "unknown";
}

KgeKind parse_kge_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "transe") return KgeKind::TransE;
  if (lower == "distmult") return KgeKind::DistMult;
  if (lower == "complex") return KgeKind::ComplEx;
  if (lower == "rotate") return KgeKind::RotatE;
  fail(ErrorCode::InvalidArgument, "unknown KGE model '" + std::string(text) + "'");
}

io::Json to_json(const KgeConfig& c) {
  return {{"model", to_string(c.kind)}, {"dim", c.dim},
          {"margin", c.margin},         {"lr", c.lr},
          {"negatives", c.negatives},   {"l3", c.l3},
          {"batch_size", c.batch_size}, {"max_steps", c.max_steps},
          {"eval_every", c.eval_every}, {"seed", c.seed}};
}

KgeConfig kge_config_from_json(const io::Json& j) {
  KgeConfig c;
  c.kind = parse_kge_kind(j.at("model").get<std::string>());
  c.dim = j.value("dim", c.dim);
  c.margin = j.value("margin", c.margin);
  c.lr = j.value("lr", c.lr);
  c.negatives = j.value("negatives", c.negatives);
  c.l3 = j.value("l3", c.l3);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.seed = j.value("seed", c.seed);
  if (c.dim == 0 || c.negatives == 0 || c.batch_size == 0 || c.eval_every == 0 || !(c.margin > 0) || !(c.lr > 0) ||
      c.l3 < 0) {
    fail(ErrorCode::InvalidArgument, "invalid KGE configuration");
  }
  return c;
}

std::size_t entity_width(KgeKind kind, std::size_t dim) {
  return kind == KgeKind::ComplEx || kind == KgeKind::RotatE ? 2 * dim : dim;
}

std::size_t relation_width(KgeKind kind, std::size_t dim) { return kind == KgeKind::ComplEx ? 2 * dim : dim; }

double score_rows(KgeKind kind, std::size_t dim, std::span<const double> h, std::span<const double> r,
                  std::span<const double> t) {
  switch (kind) {
    case KgeKind::TransE: {
      double sq = 0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double d = h[i] + r[i] - t[i];
        sq += d * d;
      }
      return -std::sqrt(sq);
    }
    case KgeKind::DistMult: {
      double s = 0;
      for (std::size_t i = 0; i < dim; ++i) s += h[i] * r[i] * t[i];
      return s;
    }
    case KgeKind::ComplEx: {
      double s = 0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double a = h[i], b = h[dim + i], c = r[i], d = r[dim + i], e = t[i], f = t[dim + i];
        s += (a * c - b * d) * e + (a * d + b * c) * f;
      }
      return s;
    }
    case KgeKind::RotatE: {
      double sq = 0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double a = h[i], b = h[dim + i], cs = std::cos(r[i]), sn = std::sin(r[i]);
        const double re = a * cs - b * sn - t[i];
        const double im = a * sn + b * cs - t[dim + i];
        sq += re * re + im * im;
      }
      return -std::sqrt(sq);
    }
  }
  return 0;
}

void add_score_gradient(KgeKind kind, std::size_t dim, std::span<const double> h, std::span<const double> r,
                        std::span<const double> t, double coeff, std::span<double> gh, std::span<double> gr,
                        std::span<double> gt) {
  switch (kind) {
    case KgeKind::TransE: {
      double sq = 0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double d = h[i] + r[i] - t[i];
        sq += d * d;
      }
      const double norm = std::sqrt(sq);
      if (norm == 0) return;  // subgradient 0 at the apex
      for (std::size_t i = 0; i < dim; ++i) {
        const double g = -coeff * (h[i] + r[i] - t[i]) / norm;
        gh[i] += g;
        gr[i] += g;
        gt[i] -= g;
      }
      return;
    }
    case KgeKind::DistMult:
      for (std::size_t i = 0; i < dim; ++i) {
        gh[i] += coeff * r[i] * t[i];
        gr[i] += coeff * h[i] * t[i];
        gt[i] += coeff * h[i] * r[i];
      }
      return;
    case KgeKind::ComplEx:
      for (std::size_t i = 0; i < dim; ++i) {
        const double a = h[i], b = h[dim + i], c = r[i], d = r[dim + i], e = t[i], f = t[dim + i];
        gh[i] += coeff * (c * e + d * f);
        gh[dim + i] += coeff * (c * f - d * e);
        gr[i] += coeff * (a * e + b * f);
        gr[dim + i] += coeff * (a * f - b * e);
        gt[i] += coeff * (a * c - b * d);
        gt[dim + i] += coeff * (a * d + b * c);
      }
      return;
    case KgeKind::RotatE: {
      double sq = 0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double a = h[i], b = h[dim + i], cs = std::cos(r[i]), sn = std::sin(r[i]);
        const double re = a * cs - b * sn - t[i];
        const double im = a * sn + b * cs - t[dim + i];
        sq += re * re + im * im;
      }
      const double norm = std::sqrt(sq);
      if (norm == 0) return;
      const double k = -coeff / norm;
      for (std::size_t i = 0; i < dim; ++i) {
        const double a = h[i], b = h[dim + i], cs = std::cos(r[i]), sn = std::sin(r[i]);
        const double re = a * cs - b * sn - t[i];
        const double im = a * sn + b * cs - t[dim + i];
        gh[i] += k * (re * cs + im * sn);
        gh[dim + i] += k * (-re * sn + im * cs);
        gr[i] += k * (re * (-a * sn - b * cs) + im * (a * cs - b * sn));
        gt[i] -= k * re;
        gt[dim + i] -= k * im;
      }
      return;
    }
  }
}

KgeModel::KgeModel(KgeConfig config, std::size_t num_entities, std::size_t num_relations)
    : config_(config),
      num_entities_(num_entities),
      num_relations_(num_relations),
      entity_emb_(num_entities * kgc::entity_width(config.kind, config.dim), 0.0),
      relation_emb_(num_relations * kgc::relation_width(config.kind, config.dim), 0.0) {}

KgeModel KgeModel::initialize(const KgeConfig& config, std::size_t num_entities, std::size_t num_relations) {
  KgeModel model(config, num_entities, num_relations);
  Rng rng(derive_seed(config.seed, 0x1417));
  const double bound = 0.5 / static_cast<double>(config.dim);
  for (double& x : model.entity_emb_) x = rng.uniform(-bound, bound);
  for (double& x : model.relation_emb_) {
    x = config.kind == KgeKind::RotatE ? rng.uniform(0, 2 * std::numbers::pi) : rng.uniform(-bound, bound);
  }
  return model;
}

std::span<const double> KgeModel::entity(EntityId e) const {
  const std::size_t w = entity_width();
  return std::span<const double>(entity_emb_).subspan(e * w, w);
}

std::span<double> KgeModel::entity(EntityId e) {
  const std::size_t w = entity_width();
  return std::span<double>(entity_emb_).subspan(e * w, w);
}

std::span<const double> KgeModel::relation(RelationId r) const {
  const std::size_t w = relation_width();
  return std::span<const double>(relation_emb_).subspan(r * w, w);
}

std::span<double> KgeModel::relation(RelationId r) {
  const std::size_t w = relation_width();
  return std::span<double>(relation_emb_).subspan(r * w, w);
}

double KgeModel::score(const Triple& t) const {
  return score_rows(config_.kind, config_.dim, entity(t.head), relation(t.rel), entity(t.tail));
}

void KgeModel::round_to_float32() {
  for (double& x : entity_emb_) x = io::to_float32(x);
  for (double& x : relation_emb_) x = io::to_float32(x);
}

double rank_loss(double positive, std::span<const double> negatives, double margin) {
  if (negatives.empty()) fail(ErrorCode::InvalidArgument, "rank_loss needs at least one negative");
  double sum = 0;
  for (double s : negatives) sum += std::max(0.0, margin - positive + s);
  return sum / static_cast<double>(negatives.size());
}

CorruptionSampler::CorruptionSampler(const KnowledgeGraph& train) : train_(train) {}

Triple CorruptionSampler::corrupt_once(const Triple& t, Side side, Rng& rng) const {
  const EntityId original = side == Side::Head ? t.head : t.tail;
  const auto& same_type = train_.entities_of_type(train_.type_of(original));
  // Draw from the class minus the original: pick among n-1 slots and skip
  // over the original's position.
  const auto pos = static_cast<std::size_t>(
      std::lower_bound(same_type.begin(), same_type.end(), original) - same_type.begin());
  std::size_t j = rng.uniform_index(same_type.size() - 1);
  if (j >= pos) ++j;
  Triple c = t;
  (side == Side::Head ? c.head : c.tail) = same_type[j];
  return c;
}

std::vector<Triple> CorruptionSampler::sample(const Triple& t, std::size_t n, Rng& rng) const {
  const bool head_ok = train_.entities_of_type(train_.type_of(t.head)).size() > 1;
  const bool tail_ok = train_.entities_of_type(train_.type_of(t.tail)).size() > 1;
  if (!head_ok && !tail_ok) {
    fail(ErrorCode::NoCandidates, "no same-type replacement for either endpoint of a triple");
  }
  std::vector<Triple> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Side side = rng.coin() ? Side::Head : Side::Tail;
    if (side == Side::Head && !head_ok) side = Side::Tail;
    if (side == Side::Tail && !tail_ok) side = Side::Head;
    Triple c = corrupt_once(t, side, rng);
    for (int retry = 0; retry < 10 && train_.contains(c); ++retry) c = corrupt_once(t, side, rng);
    if (train_.contains(c)) ++collisions_kept_;
    out.push_back(c);
  }
  return out;
}

double batch_objective(const KgeModel& model, std::span<const TrainingExample> batch, double l3,
                       std::vector<double>* entity_grad, std::vector<double>* relation_grad) {
  const KgeConfig& cfg = model.config();
  const std::size_t ew = model.entity_width();
  const std::size_t rw = model.relation_width();
  const bool want_grad = entity_grad != nullptr && relation_grad != nullptr;
  auto ent_g = [&](EntityId e) { return std::span<double>(*entity_grad).subspan(e * ew, ew); };
  auto rel_g = [&](RelationId r) { return std::span<double>(*relation_grad).subspan(r * rw, rw); };

  double loss = 0;
  std::vector<EntityId> touched_entities;
  std::vector<RelationId> touched_relations;
  std::vector<double> neg_scores;
  const double batch_scale = 1.0 / static_cast<double>(batch.size());
  for (const TrainingExample& ex : batch) {
    const Triple& p = ex.positive;
    const double pos = model.score(p);
    neg_scores.clear();
    for (const Triple& n : ex.negatives) neg_scores.push_back(model.score(n));
    loss += batch_scale * rank_loss(pos, neg_scores, cfg.margin);

    touched_entities.push_back(p.head);
    touched_entities.push_back(p.tail);
    touched_relations.push_back(p.rel);
    const double per_neg = batch_scale / static_cast<double>(ex.negatives.size());
    for (std::size_t i = 0; i < ex.negatives.size(); ++i) {
      const Triple& n = ex.negatives[i];
      touched_entities.push_back(n.head);
      touched_entities.push_back(n.tail);
      if (!want_grad || cfg.margin - pos + neg_scores[i] <= 0) continue;
      add_score_gradient(cfg.kind, cfg.dim, model.entity(p.head), model.relation(p.rel), model.entity(p.tail),
                         -per_neg, ent_g(p.head), rel_g(p.rel), ent_g(p.tail));
      add_score_gradient(cfg.kind, cfg.dim, model.entity(n.head), model.relation(n.rel), model.entity(n.tail),
                         per_neg, ent_g(n.head), rel_g(n.rel), ent_g(n.tail));
    }
  }

  if (l3 > 0) {
    std::sort(touched_entities.begin(), touched_entities.end());
    touched_entities.erase(std::unique(touched_entities.begin(), touched_entities.end()), touched_entities.end());
    std::sort(touched_relations.begin(), touched_relations.end());
    touched_relations.erase(std::unique(touched_relations.begin(), touched_relations.end()), touched_relations.end());
    auto penalize = [&](std::span<const double> row, std::span<double> grad) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        const double a = std::abs(row[i]);
        loss += l3 * a * a * a;
        if (want_grad) grad[i] += 3 * l3 * row[i] * a;
      }
    };
    for (EntityId e : touched_entities) penalize(model.entity(e), want_grad ? ent_g(e) : std::span<double>());
    if (cfg.kind != KgeKind::RotatE) {
      for (RelationId r : touched_relations) penalize(model.relation(r), want_grad ? rel_g(r) : std::span<double>());
    }
  }
  return loss;
}

namespace {

struct Adam {
  explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad, double lr, std::size_t t) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    const double c1 = 1 - std::pow(kBeta1, static_cast<double>(t));
    const double c2 = 1 - std::pow(kBeta2, static_cast<double>(t));
    const auto n = static_cast<std::int64_t>(params.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      m[i] = kBeta1 * m[i] + (1 - kBeta1) * grad[i];
      v[i] = kBeta2 * v[i] + (1 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }

  std::vector<double> m, v;
};

double validation_mrr(const KgeModel& model, const NegativeSets& valid) {
  return compute_metrics(valid, score_queries(model, valid, "train", "")).mrr;
}

}  // namespace

KgeModel train_kge(const KnowledgeGraph& train, const NegativeSets* valid, const KgeConfig& config,
                   const std::function<void(const TrainingEvent&)>& on_eval) {
  KgeModel model = KgeModel::initialize(config, train.num_entities(), train.num_relations());
  if (config.max_steps == 0) return model;
  if (train.triples().empty()) fail(ErrorCode::InvalidArgument, "training graph has no triples");

  const CorruptionSampler sampler(train);
  Rng rng(derive_seed(config.seed, 0xba7c4));
  std::vector<std::uint32_t> order(train.triples().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  rng.shuffle(std::span(order));
  std::size_t cursor = 0;

  Adam entity_opt(model.entity_table().size());
  Adam relation_opt(model.relation_table().size());
  std::vector<double> entity_grad(model.entity_table().size());
  std::vector<double> relation_grad(model.relation_table().size());
  std::vector<TrainingExample> batch(config.batch_size);

  KgeModel best = model;
  double best_mrr = -1;
  auto evaluate_at = [&](std::size_t step, double loss) {
    if (valid == nullptr) return;
    const double mrr = validation_mrr(model, *valid);
    if (on_eval) on_eval({step, loss, mrr});
    if (mrr > best_mrr) {
      best_mrr = mrr;
      best = model;
      best.best_valid_mrr = mrr;
      best.best_step = step;
    }
  };
  evaluate_at(0, 0.0);

  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    for (auto& ex : batch) {
      if (cursor == order.size()) {
        rng.shuffle(std::span(order));
        cursor = 0;
      }
      ex.positive = train.triples()[order[cursor++]];
      ex.negatives = sampler.sample(ex.positive, config.negatives, rng);
    }
    std::fill(entity_grad.begin(), entity_grad.end(), 0.0);
    std::fill(relation_grad.begin(), relation_grad.end(), 0.0);
    const double loss = batch_objective(model, batch, config.l3, &entity_grad, &relation_grad);
    if (!std::isfinite(loss)) fail(ErrorCode::NonFiniteLoss, "loss diverged at step " + std::to_string(step));
    entity_opt.step(model.entity_table(), entity_grad, config.lr, step);
    relation_opt.step(model.relation_table(), relation_grad, config.lr, step);
    if (step % config.eval_every == 0 || step == config.max_steps) evaluate_at(step, loss);
  }

  if (valid == nullptr) {
    best = model;
    best.best_step = config.max_steps;
  }
  best.round_to_float32();
  if (valid != nullptr) best.best_valid_mrr = validation_mrr(best, *valid);
  return best;
}

namespace {

ScoreSet score_impl(const KgeModel& model, const NegativeSets& negs, std::string model_name,
                    std::string negatives_hash, bool parallel) {
  ScoreSet scores = make_score_skeleton(negs, std::move(model_name), std::move(negatives_hash));
  const auto n = static_cast<std::int64_t>(scores.queries.size());
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (std::int64_t q = 0; q < n; ++q) {
    QueryScores& query = scores.queries[q];
    const Triple& t = negs.triples[query.triple_index];
    query.positive = model.score(t);
    const auto& candidates = negs.negatives(query.triple_index, query.side);
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      Triple c = t;
      (query.side == Side::Head ? c.head : c.tail) = candidates[j];
      query.negatives[j] = model.score(c);
    }
  }
  return scores;
}

}  // namespace

ScoreSet score_queries(const KgeModel& model, const NegativeSets& negs, std::string model_name,
                       std::string negatives_hash) {
  return score_impl(model, negs, std::move(model_name), std::move(negatives_hash), true);
}

ScoreSet score_queries_serial(const KgeModel& model, const NegativeSets& negs, std::string model_name,
                              std::string negatives_hash) {
  return score_impl(model, negs, std::move(model_name), std::move(negatives_hash), false);
}

io::Json save_model(const std::filesystem::path& dir, const std::string& stem, const KgeModel& model,
                    const KnowledgeGraph& kg) {
  if (model.num_entities() != kg.num_entities() || model.num_relations() != kg.num_relations()) {
    fail(ErrorCode::InvalidArgument, "model shape does not match the graph");
  }
  const auto ent = dir / (stem + ".entities.f32");
  const auto rel = dir / (stem + ".relations.f32");
  io::write_f32(ent, model.entity_table());
  io::write_f32(rel, model.relation_table());
  io::Json manifest;
  manifest["config"] = to_json(model.config());
  manifest["entity_width"] = model.entity_width();
  manifest["relation_width"] = model.relation_width();
  io::Json keys = io::Json::array();
  for (const auto& e : kg.entities()) keys.push_back(e.key);
  manifest["entity_keys"] = keys;
  manifest["relation_keys"] = kg.relations();
  manifest["best_valid_mrr"] = model.best_valid_mrr;
  manifest["best_step"] = model.best_step;
  manifest["entities_sha256"] = io::sha256_file(ent);
  manifest["relations_sha256"] = io::sha256_file(rel);
  io::write_json(dir / (stem + ".json"), manifest);
  return manifest;
}

KgeModel load_model(const std::filesystem::path& dir, const std::string& stem, const KnowledgeGraph& kg) {
  const io::Json manifest = io::read_json(dir / (stem + ".json"));
  const auto ent = dir / (stem + ".entities.f32");
  const auto rel = dir / (stem + ".relations.f32");
  if (io::sha256_file(ent) != manifest.at("entities_sha256").get<std::string>() ||
      io::sha256_file(rel) != manifest.at("relations_sha256").get<std::string>()) {
    fail(ErrorCode::HashMismatch, "embedding blocks of " + stem + " do not match the manifest");
  }
  const auto& keys = manifest.at("entity_keys");
  if (keys.size() != kg.num_entities() || manifest.at("relation_keys").size() != kg.num_relations()) {
    fail(ErrorCode::InvalidArgument, "model " + stem + " was trained on a different graph");
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].get<std::string>() != kg.entities()[i].key) {
      fail(ErrorCode::InvalidArgument, "entity order of " + stem + " differs from the graph");
    }
  }
  KgeModel model(kge_config_from_json(manifest.at("config")), kg.num_entities(), kg.num_relations());
  model.entity_table() = io::read_f32(ent);
  model.relation_table() = io::read_f32(rel);
  if (model.entity_table().size() != kg.num_entities() * model.entity_width() ||
      model.relation_table().size() != kg.num_relations() * model.relation_width()) {
    fail(ErrorCode::MalformedLine, "embedding block size mismatch for " + stem);
  }
  model.best_valid_mrr = manifest.value("best_valid_mrr", 0.0);
  model.best_step = manifest.value("best_step", std::size_t{0});
  return model;
}

}  // namespace kgc
