#include "kgc/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <unicode/uchar.h>

#include "kgc/error.hpp"
#include "kgc/evaluate.hpp"

namespace kgc {

namespace {

void normalize(std::vector<double>& x) {
  const double total = pairwise_sum(x);
  for (double& v : x) v /= total;
}

std::vector<std::size_t> out_counts(const KnowledgeGraph& kg) {
  std::vector<std::size_t> out(kg.num_entities());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = kg.out_degree(static_cast<EntityId>(e));
  return out;
}

}  // namespace

std::vector<double> pagerank_serial(const KnowledgeGraph& kg, const PageRankOptions& options) {
  const std::size_t n = kg.num_entities();
  if (n == 0) fail(ErrorCode::InvalidArgument, "pagerank of an empty graph");
  const auto out = out_counts(kg);
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> rank(n, inv_n);
  std::vector<double> next(n);
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    double dangling = 0;
    for (std::size_t u = 0; u < n; ++u) {
      if (out[u] == 0) dangling += rank[u];
    }
    const double base = (1 - options.damping) * inv_n + options.damping * dangling * inv_n;
    std::fill(next.begin(), next.end(), base);
    for (const Triple& t : kg.triples()) {
      next[t.tail] += options.damping * rank[t.head] / static_cast<double>(out[t.head]);
    }
    double change = 0;
    for (std::size_t u = 0; u < n; ++u) change += std::abs(next[u] - rank[u]);
    rank.swap(next);
    if (change < options.tol) break;
  }
  normalize(rank);
  return rank;
}

std::vector<double> pagerank(const KnowledgeGraph& kg, const PageRankOptions& options) {
  const std::size_t n = kg.num_entities();
  if (n == 0) fail(ErrorCode::InvalidArgument, "pagerank of an empty graph");
  const auto out = out_counts(kg);
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> rank(n, inv_n);
  std::vector<double> next(n);
  std::vector<double> scratch(n);
  const auto sn = static_cast<std::int64_t>(n);
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
#pragma omp parallel for schedule(static)
    for (std::int64_t u = 0; u < sn; ++u) scratch[u] = out[u] == 0 ? rank[u] : 0.0;
    const double dangling = pairwise_sum(scratch);
    const double base = (1 - options.damping) * inv_n + options.damping * dangling * inv_n;
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t v = 0; v < sn; ++v) {
      double pulled = 0;
      for (auto i : kg.in_edges(static_cast<EntityId>(v))) {
        const EntityId u = kg.triples()[i].head;
        pulled += rank[u] / static_cast<double>(out[u]);
      }
      next[v] = base + options.damping * pulled;
      scratch[v] = std::abs(next[v] - rank[v]);
    }
    const double change = pairwise_sum(scratch);
    rank.swap(next);
    if (change < options.tol) break;
  }
  normalize(rank);
  return rank;
}

double adamic_adar(const KnowledgeGraph& kg, EntityId h, EntityId t) {
  const auto nh = kg.neighbors(h, Direction::Both);
  const auto nt = kg.neighbors(t, Direction::Both);
  std::vector<EntityId> common;
  std::set_intersection(nh.begin(), nh.end(), nt.begin(), nt.end(), std::back_inserter(common));
  double score = 0;
  for (EntityId u : common) {
    const std::size_t deg = kg.neighbors(u, Direction::Both).size();
    if (deg > 1) score += 1.0 / std::log(static_cast<double>(deg));
  }
  return score;
}

std::u32string utf8_decode(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    int extra = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c & 0xe0) == 0xc0) {
      cp = c & 0x1f;
      extra = 1;
    } else if ((c & 0xf0) == 0xe0) {
      cp = c & 0x0f;
      extra = 2;
    } else if ((c & 0xf8) == 0xf0) {
      cp = c & 0x07;
      extra = 3;
    } else {
      out.push_back(U'\uFFFD');
      ++i;
      continue;
    }
    if (i + extra >= text.size()) {
      out.push_back(U'\uFFFD');
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xc0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3f);
    }
    if (!ok) {
      out.push_back(U'\uFFFD');
      ++i;
      continue;
    }
    out.push_back(cp);
    i += 1 + extra;
  }
  return out;
}

namespace {

std::string utf8_encode(std::u32string_view text) {
  std::string out;
  for (char32_t cp : text) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
      out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
  }
  return out;
}

bool is_space(char32_t cp) { return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0; }

std::vector<std::u32string_view> split_words(std::u32string_view text) {
  std::vector<std::u32string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) words.push_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

}  // namespace

std::size_t edit_distance(std::string_view a, std::string_view b) {
  const std::u32string x = utf8_decode(a);
  const std::u32string y = utf8_decode(b);
  std::vector<std::size_t> prev(y.size() + 1);
  std::vector<std::size_t> cur(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    prev.swap(cur);
  }
  return prev[y.size()];
}

Vocabulary::Vocabulary(std::vector<std::string> pieces) {
  for (auto& p : pieces) {
    if (p.empty()) continue;
    std::u32string_view body = U"";
    const std::u32string decoded = utf8_decode(p);
    body = decoded;
    if (body.starts_with(U"##")) body.remove_prefix(2);
    max_piece_chars_ = std::max(max_piece_chars_, body.size());
    pieces_.insert(std::move(p));
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open vocabulary " + path.string());
  std::vector<std::string> pieces;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pieces.push_back(line);
  }
  return Vocabulary(std::move(pieces));
}

std::size_t Vocabulary::count_tokens(std::u32string_view word) const {
  std::size_t tokens = 0;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = std::min(word.size(), start + max_piece_chars_);
    bool found = false;
    for (; end > start; --end) {
      std::string piece = utf8_encode(word.substr(start, end - start));
      if (start > 0) piece = "##" + piece;
      if (pieces_.count(piece) != 0) {
        found = true;
        break;
      }
    }
    if (!found) return 1;
    ++tokens;
    start = end;
  }
  return tokens;
}

TextStats text_stats(std::string_view text, const Vocabulary* vocab) {
  const std::u32string cps = utf8_decode(text);
  TextStats s;
  s.chars = static_cast<double>(cps.size());
  for (char32_t cp : cps) {
    const auto c = static_cast<UChar32>(cp);
    if (u_ispunct(c)) s.punct += 1;
    if (u_charType(c) == U_DECIMAL_DIGIT_NUMBER) s.numeric += 1;
  }
  if (s.chars > 0) {
    s.punct_ratio = s.punct / s.chars;
    s.numeric_ratio = s.numeric / s.chars;
  }
  // "unknown" as a whole word: maximal alphanumeric runs, case-folded.
  std::size_t i = 0;
  while (i < cps.size() && s.unknown == 0) {
    while (i < cps.size() && !u_isalnum(static_cast<UChar32>(cps[i]))) ++i;
    std::size_t j = i;
    std::u32string word;
    while (j < cps.size() && u_isalnum(static_cast<UChar32>(cps[j]))) {
      word.push_back(static_cast<char32_t>(u_foldCase(static_cast<UChar32>(cps[j]), U_FOLD_CASE_DEFAULT)));
      ++j;
    }
    if (word == U"unknown") s.unknown = 1;
    i = j;
  }
  const auto words = split_words(cps);
  if (!words.empty()) {
    if (vocab == nullptr) {
      s.tokens_per_word = 1.0;
    } else {
      std::size_t tokens = 0;
      for (auto w : words) tokens += vocab->count_tokens(w);
      s.tokens_per_word = static_cast<double>(tokens) / static_cast<double>(words.size());
    }
  }
  return s;
}

namespace {

const char* const kTextStatNames[] = {"chars", "unknown", "punct", "punct_ratio", "numeric", "numeric_ratio",
                                      "tokens_per_word"};

void put_stats(std::map<std::string, double>& out, const std::string& prefix, const TextStats& s) {
  const double values[] = {s.chars, s.unknown, s.punct, s.punct_ratio, s.numeric, s.numeric_ratio, s.tokens_per_word};
  for (std::size_t i = 0; i < std::size(values); ++i) out[prefix + kTextStatNames[i]] = values[i];
}

}  // namespace

std::map<std::string, double> text_features(const EntityRecord& rec, const Vocabulary* vocab) {
  std::map<std::string, double> out;
  put_stats(out, "name_", text_stats(rec.name, vocab));
  const bool missing = !rec.description.has_value() || rec.description->empty();
  out["missing_desc"] = missing ? 1.0 : 0.0;
  put_stats(out, "desc_", missing ? TextStats{} : text_stats(*rec.description, vocab));
  return out;
}

std::vector<std::string> FeatureSchema::column_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns) names.push_back(c.name);
  return names;
}

namespace {

const char* const kGraphColumns[] = {"head_in_degree", "head_out_degree", "tail_in_degree", "tail_out_degree",
                                     "head_pagerank",  "tail_pagerank",   "adamic_adar",    "name_edit_distance"};

std::vector<std::string> text_column_suffixes() {
  std::vector<std::string> out{"missing_desc"};
  for (const char* field : {"name_", "desc_"}) {
    for (const char* stat : kTextStatNames) out.push_back(std::string(field) + stat);
  }
  return out;
}

}  // namespace

FeatureSchema make_feature_schema(const KnowledgeGraph& kg, const std::vector<std::string>& model_names) {
  FeatureSchema schema;
  schema.model_names = model_names;
  for (const char* side : {"head", "tail"}) {
    for (const auto& type : kg.types()) schema.columns.push_back({std::string(side) + "_type=" + type, FeatureKind::OneHot});
  }
  for (const auto& rel : kg.relations()) schema.columns.push_back({"relation=" + rel, FeatureKind::OneHot});
  for (const char* name : kGraphColumns) schema.columns.push_back({name, FeatureKind::Numeric});
  for (const char* side : {"head_", "tail_"}) {
    for (const auto& suffix : text_column_suffixes()) schema.columns.push_back({side + suffix, FeatureKind::Numeric});
  }
  for (const auto& m : model_names) schema.columns.push_back({"score=" + m, FeatureKind::Numeric});
  return schema;
}

io::Json to_json(const FeatureSchema& schema) {
  io::Json cols = io::Json::array();
  for (const auto& c : schema.columns) {
    cols.push_back({{"name", c.name}, {"kind", c.kind == FeatureKind::OneHot ? "one-hot" : "numeric"}});
  }
  return {{"version", schema.version}, {"columns", cols}, {"model_names", schema.model_names}};
}

FeatureSchema feature_schema_from_json(const io::Json& j) {
  FeatureSchema schema;
  schema.version = j.at("version").get<std::string>();
  if (schema.version != FeatureSchema::kVersion) {
    fail(ErrorCode::SchemaMismatch, "unsupported feature schema version " + schema.version);
  }
  for (const auto& c : j.at("columns")) {
    schema.columns.push_back({c.at("name").get<std::string>(),
                              c.at("kind").get<std::string>() == "one-hot" ? FeatureKind::OneHot : FeatureKind::Numeric});
  }
  schema.model_names = j.at("model_names").get<std::vector<std::string>>();
  return schema;
}

FeatureContext::FeatureContext(const KnowledgeGraph& train, FeatureSchema schema, std::optional<Vocabulary> vocab,
                               const PageRankOptions& pr)
    : train_(train), schema_(std::move(schema)), vocab_(std::move(vocab)), pagerank_(pagerank(train, pr)) {
  const FeatureSchema expected = make_feature_schema(train, schema_.model_names);
  if (expected.column_names() != schema_.column_names()) {
    fail(ErrorCode::SchemaMismatch, "feature schema does not match the graph's types and relations");
  }
}

std::vector<double> FeatureContext::featurize(const Triple& t, std::span<const double> model_scores) const {
  if (model_scores.size() != schema_.model_names.size()) {
    fail(ErrorCode::SchemaMismatch, "expected " + std::to_string(schema_.model_names.size()) + " model scores, got " +
                                        std::to_string(model_scores.size()));
  }
  std::vector<double> row;
  row.reserve(schema_.width());
  const std::size_t n_types = train_.num_types();
  for (EntityId e : {t.head, t.tail}) {
    for (std::size_t k = 0; k < n_types; ++k) row.push_back(train_.type_of(e) == k ? 1.0 : 0.0);
  }
  for (std::size_t r = 0; r < train_.num_relations(); ++r) row.push_back(t.rel == r ? 1.0 : 0.0);
  row.push_back(static_cast<double>(train_.in_degree(t.head)));
  row.push_back(static_cast<double>(train_.out_degree(t.head)));
  row.push_back(static_cast<double>(train_.in_degree(t.tail)));
  row.push_back(static_cast<double>(train_.out_degree(t.tail)));
  row.push_back(pagerank_[t.head]);
  row.push_back(pagerank_[t.tail]);
  row.push_back(adamic_adar(train_, t.head, t.tail));
  row.push_back(static_cast<double>(edit_distance(train_.entity(t.head).name, train_.entity(t.tail).name)));
  const Vocabulary* vocab = vocab_ ? &*vocab_ : nullptr;
  for (EntityId e : {t.head, t.tail}) {
    const auto feats = text_features(train_.entity(e), vocab);
    for (const auto& suffix : text_column_suffixes()) row.push_back(feats.at(suffix));
  }
  for (double s : model_scores) row.push_back(s);
  return row;
}

FeatureMatrix featurize_part(const FeatureContext& ctx, const std::vector<Triple>& triples,
                             const std::vector<const ScoreSet*>& score_sets) {
  for (const ScoreSet* s : score_sets) {
    if (s->queries.size() != 2 * triples.size()) {
      fail(ErrorCode::MisalignedScoreSets, "'" + s->model_name + "' does not cover the evaluation triples");
    }
    if (s != score_sets.front()) check_aligned(*score_sets.front(), *s);
  }
  FeatureMatrix out;
  out.schema = ctx.schema();
  out.rows.resize(triples.size());
  const auto n = static_cast<std::int64_t>(triples.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<double> scores;
    for (const ScoreSet* s : score_sets) scores.push_back(s->queries[2 * i].positive);
    out.rows[i] = ctx.featurize(triples[i], scores);
  }
  return out;
}

io::Json save_features(const std::filesystem::path& dir, const std::string& stem, const FeatureMatrix& features) {
  std::string body = "triple_index";
  for (const auto& c : features.schema.columns) body += '\t' + c.name;
  body += '\n';
  for (std::size_t i = 0; i < features.rows.size(); ++i) {
    body += std::to_string(i);
    for (double v : features.rows[i]) body += '\t' + io::format_real(v);
    body += '\n';
  }
  const auto tsv = dir / (stem + ".tsv");
  io::write_text(tsv, body);
  io::Json manifest;
  manifest["schema"] = to_json(features.schema);
  manifest["num_rows"] = features.rows.size();
  manifest["data_sha256"] = io::sha256_file(tsv);
  io::write_json(dir / (stem + ".manifest.json"), manifest);
  return manifest;
}

FeatureMatrix load_features(const std::filesystem::path& dir, const std::string& stem) {
  const auto tsv = dir / (stem + ".tsv");
  const io::Json manifest = io::read_json(dir / (stem + ".manifest.json"));
  if (io::sha256_file(tsv) != manifest.at("data_sha256").get<std::string>()) {
    fail(ErrorCode::HashMismatch, tsv.string() + " does not match its manifest");
  }
  FeatureMatrix out;
  out.schema = feature_schema_from_json(manifest.at("schema"));
  bool header = true;
  io::for_each_row(tsv, out.schema.width() + 1, [&](std::span<const std::string_view> f, std::size_t line) {
    if (header) {
      header = false;
      for (std::size_t c = 0; c < out.schema.width(); ++c) {
        if (f[c + 1] != out.schema.columns[c].name) {
          fail(ErrorCode::SchemaMismatch, tsv.string() + ": header does not match the schema");
        }
      }
      return;
    }
    if (static_cast<std::size_t>(io::parse_int(f[0])) != out.rows.size()) {
      fail(ErrorCode::MalformedLine, tsv.string() + ":" + std::to_string(line) + ": rows out of order");
    }
    std::vector<double> row;
    for (std::size_t c = 1; c < f.size(); ++c) row.push_back(io::parse_real(f[c]));
    out.rows.push_back(std::move(row));
  });
  return out;
}

}  // namespace kgc
