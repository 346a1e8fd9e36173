#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "muscdb/report.hpp"
#include "muscdb/sampler.hpp"
#include "muscdb/scoring.hpp"
#include "muscdb/surrogate.hpp"
#include "muscdb/synthgen.hpp"

namespace muscdb {

enum class Strategy { mus_cdb, mus_only, cdb_only, random, entropy, coreset };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);
bool is_object_strategy(Strategy s);

// Where the pool comes from: the synthetic generator (re-seeded per
// experiment seed) or DOTA annotations plus detector predictions on disk.
struct PoolSource {
  enum class Kind { synthetic, dota };
  Kind kind = Kind::synthetic;
  GenConfig generator;
  std::string label_dir;
  std::string predictions_path;
  std::string classes_path;
  std::string features_path;
  std::string initial_labeled_path;
  double initial_labeled_fraction = 0.05;
};

struct SurrogateSettings {
  bool enabled = true;
  TrainConfig train;
  int heldout_per_class = 200;
};

struct ExperimentConfig {
  PoolSource source;
  Strategy strategy = Strategy::mus_cdb;
  int cycles = 3;
  std::int64_t budget = 200;
  ScoringConfig scoring;
  // The per-cycle budget field is ignored here; `budget` is used.
  SamplerConfig sampler;
  bool allow_overshoot = false;
  std::vector<std::uint64_t> seeds;
  SurrogateSettings surrogate;
  std::string output_dir;

  ExperimentConfig();
  void validate() const;
};

nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
// Rejects unknown keys and out-of-range values with Error{config}.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Long-tailed synthetic benchmark shared by the acceptance suite and the
// shipped example configuration.
ExperimentConfig standard_benchmark();

// KL divergence of the normalised histogram from the uniform distribution.
// Throws Error{contract} on an all-zero histogram.
double kl_to_uniform(std::span<const std::int64_t> histogram);

// The ceil(C/4) classes with the fewest ground-truth objects (ties resolved
// towards the higher class index).
std::vector<int> rare_classes(std::span<const std::int64_t> class_totals);

struct RunOptions {
  // Write artifacts under this directory (empty: keep everything in memory).
  std::string output_dir;
  bool resume = false;
  // Stop after this many completed cycles (simulates an interruption).
  std::optional<int> stop_after;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<CycleReport> reports;
  std::vector<QueryResult> queries;
  std::vector<std::pair<int, ImageId>> image_selections;
  ClassCounts class_totals;
  // Wall-clock seconds per cycle; kept out of the reports so they stay
  // byte-reproducible.
  std::vector<double> cycle_seconds;
};

SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options = {});

struct ExperimentResult {
  std::vector<SeedRun> runs;
  std::vector<CycleReport> all_reports() const;
};

// Runs every seed; with an output directory, writes
// <out>/<strategy>/reports.csv plus per-seed artifacts and checkpoints.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct SweepRow {
  double theta = 0.0;
  int cycle = 0;
  int seeds = 0;
  double macro_recall_mean = 0.0;
  double macro_recall_min = 0.0;
  double macro_recall_max = 0.0;
  double kl_mean = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<ExperimentResult> experiments;
};

SweepResult theta_sweep(const ExperimentConfig& config, std::span<const double> thetas,
                        const RunOptions& options = {});
std::string write_sweep_table(std::span<const SweepRow> rows);

struct CompareRow {
  std::string strategy;
  int cycle = 0;
  int seeds = 0;
  double macro_recall_mean = 0.0;
  double kl_mean = 0.0;
  double rare_share_mean = 0.0;
  double charged_mean = 0.0;
  // Sign test of macro recall against the first strategy, paired by seed.
  int wins = 0;
  int losses = 0;
  int ties = 0;
  double sign_p = 1.0;
};

std::vector<CompareRow> compare_reports(std::span<const std::vector<CycleReport>> groups);
std::string write_compare_table(std::span<const CompareRow> rows);

// Two-sided exact sign-test p-value.
double sign_test_p(int wins, int losses);

std::string hex_digest(std::uint64_t value);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);
std::uint64_t pool_digest(const PoolState& pool);

}  // namespace muscdb

namespace muscdb {

// Cycle-state checkpoint: enough to rebuild the pool by replaying labels onto
// a freshly constructed world and to verify the result.
struct Checkpoint {
  std::string config_digest;
  std::uint64_t seed = 0;
  int completed_cycles = 0;
  std::string rng_digest;
  PoolSnapshot pool;
  std::vector<QueryResult> queries;
  std::vector<std::pair<int, ImageId>> image_selections;
  std::vector<CycleReport> reports;
};

std::string checkpoint_to_text(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_text(std::string_view text);
bool same_checkpoint(const Checkpoint& a, const Checkpoint& b);

}  // namespace muscdb
