#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kgc/io.hpp"
#include "kgc/kg.hpp"

namespace kgc {

enum class SplitMode { Transductive, Inductive };

std::string to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view text);

struct Split {
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  SplitMode mode = SplitMode::Transductive;
  std::uint64_t seed = 0;
  double valid_frac = 0;
  double test_frac = 0;
};

/// Held-out sizes for a fractional request: floor of the combined fraction
/// is removed, floor(valid_frac * n) of it goes to validation.
struct HeldOutSizes {
  std::size_t valid = 0;
  std::size_t test = 0;
};
HeldOutSizes held_out_sizes(std::size_t num_triples, double valid_frac, double test_frac);

/// Removes random edges whose endpoints both keep a training edge, then
/// partitions the removed edges into valid/test with one shuffle.
Split make_transductive_split(const KnowledgeGraph& kg, double valid_frac, double test_frac, std::uint64_t seed);

/// Holds out a random set of entities; every triple touching one of them
/// leaves the training set.
Split make_inductive_split(const KnowledgeGraph& kg, double valid_frac, double test_frac, std::uint64_t seed);

/// Undirected multigraph degree of each entity over `triples`.
std::vector<std::size_t> undirected_degrees(std::size_t num_entities, std::span<const Triple> triples);

enum class Side : std::uint8_t { Head = 0, Tail = 1 };
std::string_view to_string(Side side);
Side parse_side(std::string_view text);

enum class EvalPart { Valid, Test };
std::string to_string(EvalPart part);

/// Fixed filtered candidates for the evaluation triples of one split part.
/// Query q = 2 * triple_index + side.
struct NegativeSets {
  EvalPart part = EvalPart::Valid;
  std::size_t m_eval = 0;
  std::uint64_t seed = 0;
  std::vector<Triple> triples;
  std::vector<std::vector<EntityId>> head_negatives;
  std::vector<std::vector<EntityId>> tail_negatives;

  std::size_t num_queries() const { return 2 * triples.size(); }
  const std::vector<EntityId>& negatives(std::size_t triple_index, Side side) const {
    return side == Side::Head ? head_negatives[triple_index] : tail_negatives[triple_index];
  }
  /// Queries whose filtered pool was empty; excluded from metrics.
  std::size_t num_empty() const;
  /// Queries whose pool was smaller than m_eval (empty ones included).
  std::size_t num_short() const;
};

struct NegativeSetPair {
  NegativeSets valid;
  NegativeSets test;
};

/// Candidate pool for one query: same type as the replaced entity, minus
/// every entity that would form a known triple (train, valid or test), minus
/// the true entity. Ascending ids. Exposed for validation and tests.
class FilterIndex {
 public:
  FilterIndex(const KnowledgeGraph& kg, const Split& split);
  bool is_positive(const Triple& t) const { return all_.count(t) != 0; }
  std::vector<EntityId> pool(const Triple& t, Side side) const;
  /// Number of same-type entities excluded by filtering for this query.
  std::size_t excluded(const Triple& t, Side side) const;

 private:
  const KnowledgeGraph& kg_;
  std::unordered_map<Triple, char, TripleHash> all_;
  // (rel, anchor) -> entities completing a known triple on the other side
  std::unordered_map<std::uint64_t, std::vector<EntityId>> heads_of_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_of_;
};

/// Samples min(m_eval, |pool|) negatives per query with per-query seeded
/// streams (OpenMP-parallel; identical to the serial routine).
NegativeSetPair generate_negatives(const KnowledgeGraph& kg, const Split& split, std::size_t m_eval,
                                   std::uint64_t seed);
NegativeSetPair generate_negatives_serial(const KnowledgeGraph& kg, const Split& split, std::size_t m_eval,
                                          std::uint64_t seed);

// Persistence. Split: train/valid/test TSV plus manifest.json. Negatives:
// `query_index \t side \t candidate_key` TSV plus a manifest; query_index
// is the evaluation triple's index within its part.
void save_split(const std::filesystem::path& dir, const Split& split, const KnowledgeGraph& kg);
Split load_split(const std::filesystem::path& dir, const KnowledgeGraph& kg);

/// Writes `<stem>.tsv` and `<stem>.manifest.json`; returns the manifest.
io::Json save_negatives(const std::filesystem::path& dir, const std::string& stem, const NegativeSets& negs,
                        const KnowledgeGraph& kg);
/// Reads negatives for `triples` (the part's evaluation triples) and checks
/// the data hash recorded in the manifest.
NegativeSets load_negatives(const std::filesystem::path& dir, const std::string& stem,
                            const std::vector<Triple>& triples, const KnowledgeGraph& kg);
/// Hash that ScoreSets bind to.
std::string negatives_manifest_hash(const std::filesystem::path& dir, const std::string& stem);

}  // namespace kgc
