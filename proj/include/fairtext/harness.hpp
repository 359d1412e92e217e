#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairtext/checkpoint.hpp"
#include "fairtext/metrics.hpp"

namespace fairtext {

inline constexpr const char* kToolVersion = "0.1.0";

struct SyntheticSpec {
  int vocab_size = 200;
  int n_train = 4000;
  int n_test = 1000;
  double bias_rate = 0.9;
  double test_bias_rate = 0.5;  // independent y/z by default on the test side
  unsigned seed = 12345;        // corpus seed, fixed across methods and runs
};

// One experiment: a data source, a method, and the per-seed training setup.
// Loaded from a flat key=value file; CLI flags override file values.
struct ExperimentConfig {
  std::optional<std::string> train_path;
  std::optional<std::string> test_path;
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::string> lexicon_path;
  std::string method = "fairberts";
  std::optional<double> clp_lambda;  // required iff method == "clp"
  std::string clp_norm = "abs_logit_gap";
  std::vector<int> seeds{0, 1, 2};
  std::string out_dir = "runs";
  EncoderConfig encoder;
  TrainConfig train;
  // Task-only steps run before adversarial training (fairberts only): the
  // desk-scale counterpart of starting from a task-adapted checkpoint.
  int warmup_iters = 0;

  static ExperimentConfig load(const std::string& path);
  void apply_override(const std::string& key, const std::string& value);
  void validate() const;
  // Stable key-sorted serialization; hashed into the manifest.
  std::string canonical() const;
};

struct SeedRun {
  int seed = 0;
  std::string checkpoint_path;
  std::string predictions_path;
  std::string log_path;  // empty for baselines
  MetricValues metrics;
};

struct RunManifest {
  std::string tool_version;
  std::uint64_t config_hash = 0;
  std::string config_canonical;
  std::string method;
  std::vector<SeedRun> runs;
  MetricsReport aggregate;
  std::vector<std::pair<std::string, std::uint64_t>> artifact_hashes;

  void save(const std::string& path) const;
  static RunManifest load(const std::string& path);
  // Every referenced artifact exists and hashes to the stored value.
  void verify() const;
};

struct ExperimentData {
  Dataset train;
  Dataset test;
  IdentityLexicon lexicon;
};

ExperimentData load_experiment_data(const ExperimentConfig& config);

// Trains the configured method once per seed, writing checkpoints, logs,
// predictions, per-seed metric reports, and the manifest.
RunManifest run_experiment(const ExperimentConfig& config);

// Evaluation of a stored checkpoint; writes predictions and a report file.
MetricValues evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& test,
                                 const IdentityLexicon& lexicon,
                                 const std::string& predictions_path,
                                 const std::string& report_path);

// method -> aggregated metrics, rendered as Table-style rows.
std::string render_report_table(
    const std::vector<std::pair<std::string, MetricsReport>>& rows);

std::uint64_t fnv1a_hash(const std::string& bytes);
std::uint64_t file_hash(const std::string& path);

}  // namespace fairtext
