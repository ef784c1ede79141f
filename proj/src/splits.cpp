#include "kgc/splits.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "kgc/error.hpp"
#include "kgc/rng.hpp"

namespace kgc {

std::string to_string(SplitMode mode) {
  return mode == SplitMode::Transductive ? "transductive" : "inductive";
}

SplitMode parse_split_mode(std::string_view text) {
  if (text == "transductive") return SplitMode::Transductive;
  if (text == "inductive") return SplitMode::Inductive;
  fail(ErrorCode::InvalidArgument, "unknown split mode '" + std::string(text) + "'");
}

std::string_view to_string(Side side) { return side == Side::Head ? "head" : "tail"; }

Side parse_side(std::string_view text) {
  if (text == "head") return Side::Head;
  if (text == "tail") return Side::Tail;
  fail(ErrorCode::MalformedLine, "unknown side '" + std::string(text) + "'");
}

std::string to_string(EvalPart part) { return part == EvalPart::Valid ? "valid" : "test"; }

HeldOutSizes held_out_sizes(std::size_t num_triples, double valid_frac, double test_frac) {
  if (valid_frac < 0 || test_frac < 0 || valid_frac + test_frac >= 1) {
    fail(ErrorCode::InvalidArgument, "fractions must be non-negative and sum below 1");
  }
  const double n = static_cast<double>(num_triples);
  // The small epsilon keeps exact products such as 0.2 * 6677 = 1335.4 from
  // landing one below due to representation error.
  const auto total = static_cast<std::size_t>(std::floor((valid_frac + test_frac) * n + 1e-9));
  auto valid = static_cast<std::size_t>(std::floor(valid_frac * n + 1e-9));
  valid = std::min(valid, total);
  return {valid, total - valid};
}

std::vector<std::size_t> undirected_degrees(std::size_t num_entities, std::span<const Triple> triples) {
  std::vector<std::size_t> degree(num_entities, 0);
  for (const Triple& t : triples) {
    ++degree[t.head];
    ++degree[t.tail];
  }
  return degree;
}

Split make_transductive_split(const KnowledgeGraph& kg, double valid_frac, double test_frac, std::uint64_t seed) {
  const auto& triples = kg.triples();
  const HeldOutSizes sizes = held_out_sizes(triples.size(), valid_frac, test_frac);
  const std::size_t target = sizes.valid + sizes.test;

  Rng rng(seed);
  std::vector<std::size_t> degree = undirected_degrees(kg.num_entities(), triples);
  std::vector<std::uint32_t> live(triples.size());
  for (std::size_t i = 0; i < live.size(); ++i) live[i] = static_cast<std::uint32_t>(i);
  std::vector<char> removed_flag(triples.size(), 0);
  std::vector<std::uint32_t> removed;
  removed.reserve(target);

  const std::size_t rejection_limit = 100 * std::max<std::size_t>(triples.size(), 1);
  std::size_t rejections = 0;
  while (removed.size() < target) {
    if (live.empty()) fail(ErrorCode::SplitInfeasible, "no edges left to remove");
    const std::size_t slot = rng.uniform_index(live.size());
    const Triple& t = triples[live[slot]];
    const bool removable = t.head == t.tail ? degree[t.head] > 2 : degree[t.head] > 1 && degree[t.tail] > 1;
    if (!removable) {
      if (++rejections > rejection_limit) {
        fail(ErrorCode::SplitInfeasible, "removed " + std::to_string(removed.size()) + " of " +
                                             std::to_string(target) + " edges before " +
                                             std::to_string(rejection_limit) + " consecutive rejections");
      }
      continue;
    }
    rejections = 0;
    --degree[t.head];
    --degree[t.tail];
    removed.push_back(live[slot]);
    removed_flag[live[slot]] = 1;
    live[slot] = live.back();
    live.pop_back();
  }

  rng.shuffle(std::span(removed));
  Split split;
  split.mode = SplitMode::Transductive;
  split.seed = seed;
  split.valid_frac = valid_frac;
  split.test_frac = test_frac;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (!removed_flag[i]) split.train.push_back(triples[i]);
  }
  for (std::size_t i = 0; i < removed.size(); ++i) {
    (i < sizes.valid ? split.valid : split.test).push_back(triples[removed[i]]);
  }
  return split;
}

Split make_inductive_split(const KnowledgeGraph& kg, double valid_frac, double test_frac, std::uint64_t seed) {
  const auto& triples = kg.triples();
  const HeldOutSizes sizes = held_out_sizes(triples.size(), valid_frac, test_frac);
  const std::size_t target = sizes.valid + sizes.test;
  const std::size_t tolerance = std::max<std::size_t>(1, triples.size() / 100);

  Rng rng(seed);
  std::vector<EntityId> order(kg.num_entities());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<EntityId>(i);
  rng.shuffle(std::span(order));

  std::vector<char> removed_flag(triples.size(), 0);
  std::size_t removed_count = 0;
  std::vector<std::uint32_t> incident;
  // Greedily hold out entities in random order, skipping any whose incident
  // edges would overshoot the target by more than the tolerance.
  for (EntityId e : order) {
    if (removed_count >= target) break;
    incident.clear();
    for (auto i : kg.out_edges(e)) if (!removed_flag[i]) incident.push_back(i);
    for (auto i : kg.in_edges(e)) if (!removed_flag[i]) incident.push_back(i);
    std::sort(incident.begin(), incident.end());
    incident.erase(std::unique(incident.begin(), incident.end()), incident.end());
    if (incident.empty() || removed_count + incident.size() > target + tolerance) continue;
    for (auto i : incident) removed_flag[i] = 1;
    removed_count += incident.size();
  }
  const std::size_t low = target > tolerance ? target - tolerance : 0;
  if (removed_count < low) {
    fail(ErrorCode::SplitInfeasible, "held out " + std::to_string(removed_count) + " triples, needed at least " +
                                         std::to_string(low));
  }

  std::vector<std::uint32_t> removed;
  Split split;
  split.mode = SplitMode::Inductive;
  split.seed = seed;
  split.valid_frac = valid_frac;
  split.test_frac = test_frac;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (removed_flag[i]) {
      removed.push_back(static_cast<std::uint32_t>(i));
    } else {
      split.train.push_back(triples[i]);
    }
  }
  rng.shuffle(std::span(removed));
  const auto n_valid = static_cast<std::size_t>(
      std::floor(static_cast<double>(removed.size()) * valid_frac / (valid_frac + test_frac) + 1e-9));
  for (std::size_t i = 0; i < removed.size(); ++i) {
    (i < n_valid ? split.valid : split.test).push_back(triples[removed[i]]);
  }
  return split;
}

std::size_t NegativeSets::num_empty() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    n += head_negatives[i].empty();
    n += tail_negatives[i].empty();
  }
  return n;
}

std::size_t NegativeSets::num_short() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    n += head_negatives[i].size() < m_eval;
    n += tail_negatives[i].size() < m_eval;
  }
  return n;
}

namespace {

std::uint64_t pair_key(std::uint32_t rel, EntityId anchor) {
  return (static_cast<std::uint64_t>(rel) << 32) | anchor;
}

}  // namespace

FilterIndex::FilterIndex(const KnowledgeGraph& kg, const Split& split) : kg_(kg) {
  for (const auto* part : {&split.train, &split.valid, &split.test}) {
    for (const Triple& t : *part) {
      if (all_.emplace(t, 0).second) {
        heads_of_[pair_key(t.rel, t.tail)].push_back(t.head);
        tails_of_[pair_key(t.rel, t.head)].push_back(t.tail);
      }
    }
  }
  for (auto* index : {&heads_of_, &tails_of_}) {
    for (auto& [key, ids] : *index) std::sort(ids.begin(), ids.end());
  }
}

namespace {

const std::vector<EntityId>& partners(const std::unordered_map<std::uint64_t, std::vector<EntityId>>& index,
                                      std::uint64_t key) {
  static const std::vector<EntityId> kEmpty;
  auto it = index.find(key);
  return it == index.end() ? kEmpty : it->second;
}

}  // namespace

std::vector<EntityId> FilterIndex::pool(const Triple& t, Side side) const {
  const EntityId replaced = side == Side::Head ? t.head : t.tail;
  const auto& known = side == Side::Head ? partners(heads_of_, pair_key(t.rel, t.tail))
                                         : partners(tails_of_, pair_key(t.rel, t.head));
  std::vector<EntityId> out;
  for (EntityId e : kg_.entities_of_type(kg_.type_of(replaced))) {
    if (e == replaced || std::binary_search(known.begin(), known.end(), e)) continue;
    out.push_back(e);
  }
  return out;
}

std::size_t FilterIndex::excluded(const Triple& t, Side side) const {
  const EntityId replaced = side == Side::Head ? t.head : t.tail;
  const TypeId type = kg_.type_of(replaced);
  const auto& known = side == Side::Head ? partners(heads_of_, pair_key(t.rel, t.tail))
                                         : partners(tails_of_, pair_key(t.rel, t.head));
  std::size_t n = 1;  // the true entity
  for (EntityId e : known) n += e != replaced && kg_.type_of(e) == type;
  return n;
}

namespace {

std::vector<EntityId> sample_query(const KnowledgeGraph& kg, const FilterIndex& filter, const Triple& t, Side side,
                                   std::size_t m_eval, std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  const EntityId replaced = side == Side::Head ? t.head : t.tail;
  const auto& same_type = kg.entities_of_type(kg.type_of(replaced));
  const std::size_t pool_size = same_type.size() - filter.excluded(t, side);
  const std::size_t take = std::min(m_eval, pool_size);
  if (take == 0) return {};

  if (pool_size <= 4 * m_eval) {
    // Small pools: explicit pool, partial Fisher-Yates.
    std::vector<EntityId> pool = filter.pool(t, side);
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(take);
    return pool;
  }
  // Large pools: rejection sampling over the type class. The pool is more
  // than four times the request, so acceptance stays above 3/4.
  std::vector<EntityId> chosen;
  std::unordered_set<EntityId> seen;
  chosen.reserve(take);
  while (chosen.size() < take) {
    const EntityId e = same_type[rng.uniform_index(same_type.size())];
    if (e == replaced || seen.count(e) != 0) continue;
    Triple candidate = t;
    (side == Side::Head ? candidate.head : candidate.tail) = e;
    if (filter.is_positive(candidate)) continue;
    seen.insert(e);
    chosen.push_back(e);
  }
  return chosen;
}

NegativeSets sample_part(const KnowledgeGraph& kg, const FilterIndex& filter, const std::vector<Triple>& triples,
                         EvalPart part, std::size_t m_eval, std::uint64_t seed, bool parallel) {
  NegativeSets negs;
  negs.part = part;
  negs.m_eval = m_eval;
  negs.seed = seed;
  negs.triples = triples;
  negs.head_negatives.resize(triples.size());
  negs.tail_negatives.resize(triples.size());
  const auto n = static_cast<std::int64_t>(triples.size());
  const auto part_tag = static_cast<std::uint64_t>(part);
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    negs.head_negatives[i] = sample_query(kg, filter, triples[i], Side::Head, m_eval, derive_seed(seed, part_tag, idx, 0));
    negs.tail_negatives[i] = sample_query(kg, filter, triples[i], Side::Tail, m_eval, derive_seed(seed, part_tag, idx, 1));
  }
  return negs;
}

NegativeSetPair generate(const KnowledgeGraph& kg, const Split& split, std::size_t m_eval, std::uint64_t seed,
                         bool parallel) {
  if (m_eval == 0) fail(ErrorCode::InvalidArgument, "m_eval must be positive");
  const FilterIndex filter(kg, split);
  return {sample_part(kg, filter, split.valid, EvalPart::Valid, m_eval, seed, parallel),
          sample_part(kg, filter, split.test, EvalPart::Test, m_eval, seed, parallel)};
}

}  // namespace

NegativeSetPair generate_negatives(const KnowledgeGraph& kg, const Split& split, std::size_t m_eval,
                                   std::uint64_t seed) {
  return generate(kg, split, m_eval, seed, true);
}

NegativeSetPair generate_negatives_serial(const KnowledgeGraph& kg, const Split& split, std::size_t m_eval,
                                          std::uint64_t seed) {
  return generate(kg, split, m_eval, seed, false);
}

void save_split(const std::filesystem::path& dir, const Split& split, const KnowledgeGraph& kg) {
  io::write_text(dir / "train.tsv", format_triples(split.train, kg));
  io::write_text(dir / "valid.tsv", format_triples(split.valid, kg));
  io::write_text(dir / "test.tsv", format_triples(split.test, kg));
  io::Json manifest;
  manifest["mode"] = to_string(split.mode);
  manifest["seed"] = split.seed;
  manifest["valid_frac"] = split.valid_frac;
  manifest["test_frac"] = split.test_frac;
  manifest["counts"] = {{"train", split.train.size()}, {"valid", split.valid.size()}, {"test", split.test.size()}};
  manifest["files"] = {{"train", io::sha256_file(dir / "train.tsv")},
                       {"valid", io::sha256_file(dir / "valid.tsv")},
                       {"test", io::sha256_file(dir / "test.tsv")}};
  io::write_json(dir / "manifest.json", manifest);
}

Split load_split(const std::filesystem::path& dir, const KnowledgeGraph& kg) {
  const io::Json manifest = io::read_json(dir / "manifest.json");
  for (const char* part : {"train", "valid", "test"}) {
    const auto path = dir / (std::string(part) + ".tsv");
    if (io::sha256_file(path) != manifest.at("files").at(part).get<std::string>()) {
      fail(ErrorCode::HashMismatch, path.string() + " does not match its manifest");
    }
  }
  Split split;
  split.mode = parse_split_mode(manifest.at("mode").get<std::string>());
  split.seed = manifest.at("seed").get<std::uint64_t>();
  split.valid_frac = manifest.at("valid_frac").get<double>();
  split.test_frac = manifest.at("test_frac").get<double>();
  split.train = read_triples(dir / "train.tsv", kg);
  split.valid = read_triples(dir / "valid.tsv", kg);
  split.test = read_triples(dir / "test.tsv", kg);
  return split;
}

io::Json save_negatives(const std::filesystem::path& dir, const std::string& stem, const NegativeSets& negs,
                        const KnowledgeGraph& kg) {
  std::string body;
  io::Json shortfalls = io::Json::array();
  for (std::size_t i = 0; i < negs.triples.size(); ++i) {
    for (Side side : {Side::Head, Side::Tail}) {
      const auto& list = negs.negatives(i, side);
      for (EntityId e : list) {
        body += std::to_string(i);
        body += '\t';
        body += to_string(side);
        body += '\t';
        body += kg.entity(e).key;
        body += '\n';
      }
      if (list.size() < negs.m_eval) {
        shortfalls.push_back({{"query_index", i}, {"side", to_string(side)}, {"size", list.size()}});
      }
    }
  }
  const auto tsv = dir / (stem + ".tsv");
  io::write_text(tsv, body);
  io::Json manifest;
  manifest["part"] = to_string(negs.part);
  manifest["m_eval"] = negs.m_eval;
  manifest["seed"] = negs.seed;
  manifest["num_triples"] = negs.triples.size();
  manifest["num_queries"] = negs.num_queries();
  manifest["num_empty"] = negs.num_empty();
  manifest["shortfalls"] = shortfalls;
  manifest["data_sha256"] = io::sha256_file(tsv);
  io::write_json(dir / (stem + ".manifest.json"), manifest);
  return manifest;
}

NegativeSets load_negatives(const std::filesystem::path& dir, const std::string& stem,
                            const std::vector<Triple>& triples, const KnowledgeGraph& kg) {
  const io::Json manifest = io::read_json(dir / (stem + ".manifest.json"));
  const auto tsv = dir / (stem + ".tsv");
  if (io::sha256_file(tsv) != manifest.at("data_sha256").get<std::string>()) {
    fail(ErrorCode::HashMismatch, tsv.string() + " does not match its manifest");
  }
  if (manifest.at("num_triples").get<std::size_t>() != triples.size()) {
    fail(ErrorCode::HashMismatch, tsv.string() + " was built for a different split");
  }
  NegativeSets negs;
  negs.part = manifest.at("part").get<std::string>() == "valid" ? EvalPart::Valid : EvalPart::Test;
  negs.m_eval = manifest.at("m_eval").get<std::size_t>();
  negs.seed = manifest.at("seed").get<std::uint64_t>();
  negs.triples = triples;
  negs.head_negatives.resize(triples.size());
  negs.tail_negatives.resize(triples.size());
  io::for_each_row(tsv, 3, [&](std::span<const std::string_view> f, std::size_t line) {
    const auto q = static_cast<std::size_t>(io::parse_int(f[0]));
    if (q >= triples.size()) {
      fail(ErrorCode::MalformedLine, tsv.string() + ":" + std::to_string(line) + ": query index out of range");
    }
    auto e = kg.find_entity(f[2]);
    if (!e) fail(ErrorCode::MissingEntityMetadata, tsv.string() + ":" + std::to_string(line) + ": unknown key");
    (parse_side(f[1]) == Side::Head ? negs.head_negatives : negs.tail_negatives)[q].push_back(*e);
  });
  return negs;
}

std::string negatives_manifest_hash(const std::filesystem::path& dir, const std::string& stem) {
  return io::sha256_file(dir / (stem + ".manifest.json"));
}

}  // namespace kgc
