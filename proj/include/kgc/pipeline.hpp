#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kgc/ensemble.hpp"
#include "kgc/io.hpp"
#include "kgc/kge.hpp"
#include "kgc/splits.hpp"

namespace kgc {

inline constexpr const char* kRunConfigSchema = "kgc-run-config-v1";
inline constexpr const char* kReportSchema = "kgc-report-v1";

struct ModelSpec {
  std::string name;
  /// The seed field is ignored; each model's seed derives from the run seed.
  KgeConfig config;
};

/// Precomputed ScoreSets from another scorer (e.g. a language model) bound
/// to this run's negatives. Stems are `dir/stem` without extension.
struct ExternalScores {
  std::string name;
  std::string valid;
  std::string test;
};

struct RunConfig {
  std::string triples;
  std::string entities;
  std::string vocab;  // optional
  SplitMode mode = SplitMode::Transductive;
  double valid_frac = 0.1;
  double test_frac = 0.1;
  std::size_t m_eval = 500;
  std::vector<ModelSpec> models;
  std::vector<ExternalScores> external;
  /// Any of "global-average", "router", "weighted-average".
  std::vector<std::string> methods{"global-average", "router", "weighted-average"};
  RouterKind router_kind = RouterKind::Gbdt;
  io::Json router_grid = io::Json::object();
  io::Json weighter_grid = io::Json::object();
  double grid_step = 0.05;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  /// Directory relative paths are resolved against; not serialized.
  std::filesystem::path base_dir;
  std::filesystem::path resolve(const std::string& p) const;
};

io::Json to_json(const RunConfig& config);
/// Throws InvalidArgument on a wrong schema header or missing fields.
RunConfig run_config_from_json(const io::Json& j, const std::filesystem::path& base_dir = {});
/// Loads and checks that every referenced input file exists.
RunConfig load_run_config(const std::filesystem::path& path);

struct RunResult {
  std::filesystem::path output_dir;
  io::Json report;
  std::size_t stages_run = 0;
  std::size_t stages_cached = 0;
};

/// split -> negatives -> train-kge -> score -> features -> fit integrators
/// (validation part only) -> integrate -> evaluate (test part). Each stage
/// records its input key and output hashes in `<stage>/stage.json` and is
/// skipped when both still match; an output whose hash changed since it
/// was written raises HashMismatch. Other stage errors are rethrown as
/// StageFailure naming the stage.
RunResult run_pipeline(const RunConfig& config, const std::filesystem::path& output_dir);

struct ValidationCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

/// Re-checks a pipeline output directory: artifact hashes, negative type
/// preservation and filtering, simplex sums, and ranks recomputed for a
/// sample of queries.
std::vector<ValidationCheck> validate_artifacts(const std::filesystem::path& dir, std::uint64_t seed = 0);

}  // namespace kgc
