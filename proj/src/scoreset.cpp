#include "kgc/scoreset.hpp"

#include <cmath>

#include "kgc/error.hpp"

namespace kgc {

ScoreSet make_score_skeleton(const NegativeSets& negs, std::string model_name, std::string negatives_hash) {
  ScoreSet scores;
  scores.model_name = std::move(model_name);
  scores.negatives_hash = std::move(negatives_hash);
  scores.queries.reserve(negs.num_queries());
  for (std::size_t i = 0; i < negs.triples.size(); ++i) {
    for (Side side : {Side::Head, Side::Tail}) {
      QueryScores q;
      q.triple_index = i;
      q.side = side;
      q.negatives.assign(negs.negatives(i, side).size(), 0.0);
      scores.queries.push_back(std::move(q));
    }
  }
  return scores;
}

void check_aligned(const ScoreSet& a, const ScoreSet& b) {
  if (a.negatives_hash != b.negatives_hash) {
    fail(ErrorCode::MisalignedScoreSets,
         "'" + a.model_name + "' and '" + b.model_name + "' bind to different negative sets");
  }
  if (a.queries.size() != b.queries.size()) {
    fail(ErrorCode::MisalignedScoreSets, "query counts differ: " + std::to_string(a.queries.size()) + " vs " +
                                             std::to_string(b.queries.size()));
  }
  for (std::size_t q = 0; q < a.queries.size(); ++q) {
    const auto& x = a.queries[q];
    const auto& y = b.queries[q];
    if (x.triple_index != y.triple_index || x.side != y.side || x.negatives.size() != y.negatives.size()) {
      fail(ErrorCode::MisalignedScoreSets, "query " + std::to_string(q) + " differs in shape");
    }
  }
}

void check_aligned(const ScoreSet& scores, const NegativeSets& negs) {
  if (scores.queries.size() != negs.num_queries()) {
    fail(ErrorCode::MisalignedScoreSets, "'" + scores.model_name + "' has " + std::to_string(scores.queries.size()) +
                                             " queries, negatives have " + std::to_string(negs.num_queries()));
  }
  for (std::size_t q = 0; q < scores.queries.size(); ++q) {
    const auto& x = scores.queries[q];
    const Side side = q % 2 == 0 ? Side::Head : Side::Tail;
    if (x.triple_index != q / 2 || x.side != side ||
        x.negatives.size() != negs.negatives(q / 2, side).size()) {
      fail(ErrorCode::MisalignedScoreSets, "query " + std::to_string(q) + " does not match the negative sets");
    }
  }
}

io::Json save_score_set(const std::filesystem::path& dir, const std::string& stem, const ScoreSet& scores) {
  std::string body;
  std::size_t candidates = 0;
  for (const auto& q : scores.queries) {
    const std::string prefix = std::to_string(q.triple_index) + '\t' + std::string(to_string(q.side)) + '\t';
    if (!std::isfinite(q.positive)) fail(ErrorCode::InvalidArgument, "non-finite score in " + scores.model_name);
    body += prefix + "0\t1\t" + io::format_real(q.positive) + '\n';
    for (std::size_t j = 0; j < q.negatives.size(); ++j) {
      if (!std::isfinite(q.negatives[j])) fail(ErrorCode::InvalidArgument, "non-finite score in " + scores.model_name);
      body += prefix + std::to_string(j + 1) + "\t0\t" + io::format_real(q.negatives[j]) + '\n';
    }
    candidates += 1 + q.negatives.size();
  }
  const auto tsv = dir / (stem + ".tsv");
  io::write_text(tsv, body);
  io::Json manifest;
  manifest["model_name"] = scores.model_name;
  manifest["negatives_manifest_sha256"] = scores.negatives_hash;
  manifest["num_queries"] = scores.queries.size();
  manifest["num_candidates"] = candidates;
  manifest["data_sha256"] = io::sha256_file(tsv);
  io::write_json(dir / (stem + ".manifest.json"), manifest);
  return manifest;
}

ScoreSet load_score_set(const std::filesystem::path& dir, const std::string& stem,
                        const std::string& expected_negatives_hash) {
  const auto tsv = dir / (stem + ".tsv");
  const io::Json manifest = io::read_json(dir / (stem + ".manifest.json"));
  if (io::sha256_file(tsv) != manifest.at("data_sha256").get<std::string>()) {
    fail(ErrorCode::HashMismatch, tsv.string() + " does not match its manifest");
  }
  ScoreSet scores;
  scores.model_name = manifest.at("model_name").get<std::string>();
  scores.negatives_hash = manifest.at("negatives_manifest_sha256").get<std::string>();
  if (!expected_negatives_hash.empty() && scores.negatives_hash != expected_negatives_hash) {
    fail(ErrorCode::HashMismatch, tsv.string() + " was scored against different negative sets");
  }
  io::for_each_row(tsv, 5, [&](std::span<const std::string_view> f, std::size_t line) {
    const auto where = tsv.string() + ":" + std::to_string(line);
    const auto triple = static_cast<std::size_t>(io::parse_int(f[0]));
    const Side side = parse_side(f[1]);
    const auto position = static_cast<std::size_t>(io::parse_int(f[2]));
    const bool positive = f[3] == "1";
    if (!positive && f[3] != "0") fail(ErrorCode::MalformedLine, where + ": is_positive must be 0 or 1");
    const double score = io::parse_real(f[4]);
    if (!std::isfinite(score)) fail(ErrorCode::MalformedLine, where + ": non-finite score");
    if (positive) {
      if (position != 0) fail(ErrorCode::MalformedLine, where + ": positive must sit at position 0");
      const std::size_t expected = 2 * triple + static_cast<std::size_t>(side);
      if (expected != scores.queries.size()) fail(ErrorCode::MisalignedScoreSets, where + ": queries out of order");
      scores.queries.push_back({triple, side, score, {}});
    } else {
      if (scores.queries.empty() || scores.queries.back().triple_index != triple || scores.queries.back().side != side ||
          position != scores.queries.back().negatives.size() + 1) {
        fail(ErrorCode::MisalignedScoreSets, where + ": negative out of order");
      }
      scores.queries.back().negatives.push_back(score);
    }
  });
  if (scores.queries.size() != manifest.at("num_queries").get<std::size_t>()) {
    fail(ErrorCode::MisalignedScoreSets, tsv.string() + ": query count disagrees with manifest");
  }
  return scores;
}

}  // namespace kgc
