#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "kgc/io.hpp"
#include "kgc/kg.hpp"
#include "kgc/scoreset.hpp"

namespace kgc {

struct PageRankOptions {
  double damping = 0.85;
  double tol = 1e-9;
  std::size_t max_iter = 200;
};

/// Power iteration over the directed triple graph with uniform teleport and
/// dangling mass spread uniformly. Pull-based and OpenMP-parallel; the
/// push-based serial routine is the reference.
std::vector<double> pagerank(const KnowledgeGraph& kg, const PageRankOptions& options = {});
std::vector<double> pagerank_serial(const KnowledgeGraph& kg, const PageRankOptions& options = {});

/// Sum over common undirected neighbours u of 1 / ln(deg(u)), with deg the
/// number of distinct neighbours; deg(u) <= 1 contributes nothing.
double adamic_adar(const KnowledgeGraph& kg, EntityId h, EntityId t);

std::u32string utf8_decode(std::string_view text);
/// Levenshtein distance over Unicode scalar values.
std::size_t edit_distance(std::string_view a, std::string_view b);

/// Subword vocabulary for greedy longest-match segmentation. Pieces that
/// continue a word carry the "##" prefix, as in WordPiece vocabularies.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> pieces);
  static Vocabulary load(const std::filesystem::path& path);

  /// Token count of one whitespace-free word; a word that cannot be fully
  /// segmented counts as a single unknown token.
  std::size_t count_tokens(std::u32string_view word) const;
  bool contains(const std::string& piece) const { return pieces_.count(piece) != 0; }
  std::size_t size() const { return pieces_.size(); }

 private:
  std::unordered_set<std::string> pieces_;
  std::size_t max_piece_chars_ = 0;
};

struct TextStats {
  double chars = 0;
  double unknown = 0;
  double punct = 0;
  double punct_ratio = 0;
  double numeric = 0;
  double numeric_ratio = 0;
  double tokens_per_word = 0;
};

/// Statistics of one string. Punctuation is any Unicode P* character,
/// numeric is Nd. tokens_per_word is 1 when no vocabulary is given and 0
/// for text without words.
TextStats text_stats(std::string_view text, const Vocabulary* vocab);

/// Name and description statistics plus the missing-description flag.
/// An absent description yields zeros for every description statistic.
std::map<std::string, double> text_features(const EntityRecord& rec, const Vocabulary* vocab);

enum class FeatureKind { Numeric, OneHot };

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
};

struct FeatureSchema {
  static constexpr const char* kVersion = "kgc-features-v1";
  std::string version = kVersion;
  std::vector<FeatureColumn> columns;
  std::vector<std::string> model_names;

  std::size_t width() const { return columns.size(); }
  std::vector<std::string> column_names() const;
  /// Offset of the first model-score column.
  std::size_t score_offset() const { return columns.size() - model_names.size(); }
};

/// Column layout: entity-type one-hots (head, tail), relation one-hot,
/// degrees, PageRank, Adamic-Adar, name edit distance, text blocks, then one
/// score column per model in the given order.
FeatureSchema make_feature_schema(const KnowledgeGraph& kg, const std::vector<std::string>& model_names);

io::Json to_json(const FeatureSchema& schema);
FeatureSchema feature_schema_from_json(const io::Json& j);

/// Everything featurize needs that depends only on the training graph.
class FeatureContext {
 public:
  FeatureContext(const KnowledgeGraph& train, FeatureSchema schema, std::optional<Vocabulary> vocab = std::nullopt,
                 const PageRankOptions& pr = {});

  const FeatureSchema& schema() const { return schema_; }
  const std::vector<double>& pagerank_scores() const { return pagerank_; }

  /// Throws SchemaMismatch when the score count differs from the schema.
  std::vector<double> featurize(const Triple& t, std::span<const double> model_scores) const;

 private:
  const KnowledgeGraph& train_;
  FeatureSchema schema_;
  std::optional<Vocabulary> vocab_;
  std::vector<double> pagerank_;
};

/// Rows of features for the evaluation triples of one part.
struct FeatureMatrix {
  FeatureSchema schema;
  std::vector<std::vector<double>> rows;
};

/// Features for every triple covered by the aligned ScoreSets; the
/// positive score of each triple is taken from its head-side query.
FeatureMatrix featurize_part(const FeatureContext& ctx, const std::vector<Triple>& triples,
                             const std::vector<const ScoreSet*>& score_sets);

/// TSV with a header row (`triple_index` then schema columns) and a manifest
/// recording the schema.
io::Json save_features(const std::filesystem::path& dir, const std::string& stem, const FeatureMatrix& features);
FeatureMatrix load_features(const std::filesystem::path& dir, const std::string& stem);

}  // namespace kgc
