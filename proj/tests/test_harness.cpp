#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "fairtext/errors.hpp"
#include "fairtext/harness.hpp"

using namespace fairtext;
namespace fs = std::filesystem;

namespace {

// A tiny synthetic experiment that trains in well under a second per seed.
ExperimentConfig tiny_config(const std::string& method,
                             const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.method = method;
  cfg.out_dir = out_dir;
  cfg.synthetic = SyntheticSpec{};
  cfg.synthetic->vocab_size = 50;
  cfg.synthetic->n_train = 64;
  cfg.synthetic->n_test = 40;
  cfg.encoder.dim = 8;
  cfg.encoder.n_layers = 1;
  cfg.encoder.n_heads = 2;
  cfg.encoder.max_len = 16;
  cfg.train.max_iters = 6;
  cfg.train.batch_size = 8;
  cfg.seeds = {0, 1};
  if (method == "clp") cfg.clp_lambda = 0.5;
  return cfg;
}

struct TempDir {
  std::string path;
  explicit TempDir(std::string p) : path(std::move(p)) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config file loading, overrides, and validation") {
  const std::string path = "test_harness_cfg.txt";
  {
    std::ofstream out(path);
    out << "# comment line\n"
        << "method = vanilla\n"
        << "synthetic.vocab_size = 80\n"
        << "seeds = 4, 5,6\n"
        << "train.iters = 11\n"
        << "train.eta_g = 0.02\n"
        << "encoder.dim = 16\n";
  }
  ExperimentConfig cfg = ExperimentConfig::load(path);
  std::remove(path.c_str());

  CHECK(cfg.method == "vanilla");
  REQUIRE(cfg.synthetic.has_value());
  CHECK(cfg.synthetic->vocab_size == 80);
  CHECK(cfg.seeds == std::vector<int>{4, 5, 6});
  CHECK(cfg.train.max_iters == 11);
  CHECK(cfg.train.eta_g == 0.02);
  CHECK(cfg.encoder.dim == 16);
  CHECK_NOTHROW(cfg.validate());

  // CLI-style overrides replace file values
  cfg.apply_override("train.iters", "3");
  CHECK(cfg.train.max_iters == 3);
  cfg.apply_override("train.warmup", "7");
  CHECK(cfg.warmup_iters == 7);

  CHECK_THROWS_AS(cfg.apply_override("no.such.key", "1"), ParameterError);
  CHECK_THROWS_AS(cfg.apply_override("train.iters", "abc"), ParameterError);
  CHECK_THROWS_AS(cfg.apply_override("train.freeze_encoder", "maybe"),
                  ParameterError);
  CHECK_THROWS_AS(ExperimentConfig::load("test_harness_none.txt"), IoError);

  SUBCASE("method-specific validation") {
    ExperimentConfig c = tiny_config("clp", "x");
    c.clp_lambda.reset();
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = tiny_config("vanilla", "x");
    c.clp_lambda = 0.5;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = tiny_config("unknown_method", "x");
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = tiny_config("vanilla", "x");
    c.seeds.clear();
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = tiny_config("vanilla", "x");
    c.synthetic.reset();
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = tiny_config("fairberts", "x");
    c.warmup_iters = -1;
    CHECK_THROWS_AS(c.validate(), ParameterError);
  }

  SUBCASE("malformed config line") {
    std::ofstream out("test_harness_bad.txt");
    out << "method vanilla\n";
    out.close();
    CHECK_THROWS_AS(ExperimentConfig::load("test_harness_bad.txt"),
                    ParameterError);
    std::remove("test_harness_bad.txt");
  }
}

TEST_CASE("canonical serialization is stable and order-insensitive") {
  ExperimentConfig a = tiny_config("vanilla", "runs_x");
  ExperimentConfig b = tiny_config("vanilla", "runs_x");
  CHECK(a.canonical() == b.canonical());
  CHECK(fnv1a_hash(a.canonical()) == fnv1a_hash(b.canonical()));

  b.train.max_iters = 7;
  CHECK(a.canonical() != b.canonical());

  // the canonical form parses back through apply_override (out_dir excluded
  // by design: it does not alter the experiment identity)
  ExperimentConfig c;
  c.synthetic = SyntheticSpec{};
  std::istringstream in(a.canonical());
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    REQUIRE(eq != std::string::npos);
    c.apply_override(line.substr(0, eq), line.substr(eq + 1));
  }
  c.out_dir = a.out_dir;
  CHECK(c.canonical() == a.canonical());
}

TEST_CASE("synthetic experiment data matches its configuration") {
  ExperimentConfig cfg = tiny_config("vanilla", "runs_x");
  ExperimentData data = load_experiment_data(cfg);
  CHECK(data.train.examples.size() == 64);
  CHECK(data.test.examples.size() == 40);
  CHECK(data.train.split == Split::kTrain);
  CHECK(data.test.split == Split::kTest);
  CHECK(data.lexicon.size() == 1);

  // the test split is drawn independently of the train split
  bool differs = false;
  for (std::size_t i = 0; i < 40; ++i) {
    if (data.test.examples[i].tokens != data.train.examples[i].tokens) {
      differs = true;
    }
  }
  CHECK(differs);
}

TEST_CASE("run_experiment writes a complete verifiable manifest") {
  TempDir dir("test_harness_runs");
  ExperimentConfig cfg = tiny_config("vanilla", dir.path);
  RunManifest manifest = run_experiment(cfg);

  CHECK(manifest.method == "vanilla");
  CHECK(manifest.tool_version == kToolVersion);
  REQUIRE(manifest.runs.size() == 2);
  CHECK(manifest.aggregate.per_seed.size() == 2);
  CHECK_NOTHROW(manifest.verify());
  for (const auto& run : manifest.runs) {
    CHECK(fs::exists(run.checkpoint_path));
    CHECK(fs::exists(run.predictions_path));
    CHECK(run.log_path.empty());  // baselines keep no adversarial loss log
    CHECK(run.metrics.acc >= 0.0);
    CHECK(run.metrics.acc <= 1.0);
  }

  SUBCASE("manifest round-trips through its file") {
    std::string mpath = dir.path + "/manifest_vanilla.json";
    REQUIRE(fs::exists(mpath));
    RunManifest loaded = RunManifest::load(mpath);
    CHECK(loaded.config_hash == manifest.config_hash);
    CHECK(loaded.config_canonical == manifest.config_canonical);
    REQUIRE(loaded.runs.size() == 2);
    CHECK(loaded.runs[0].metrics.acc == manifest.runs[0].metrics.acc);
    CHECK_NOTHROW(loaded.verify());
  }

  SUBCASE("tampered artifacts fail verification") {
    std::ofstream out(manifest.runs[0].predictions_path, std::ios::app);
    out << "{}\n";
    out.close();
    CHECK_THROWS_AS(manifest.verify(), ArtifactError);
  }

  SUBCASE("rerunning the same config reproduces metrics exactly") {
    TempDir dir2("test_harness_runs2");
    ExperimentConfig cfg2 = tiny_config("vanilla", dir2.path);
    RunManifest again = run_experiment(cfg2);
    CHECK(again.config_hash == manifest.config_hash);
    for (std::size_t i = 0; i < manifest.runs.size(); ++i) {
      CHECK(again.runs[i].metrics.acc == manifest.runs[i].metrics.acc);
      CHECK(again.runs[i].metrics.dpd == manifest.runs[i].metrics.dpd);
      CHECK(again.runs[i].metrics.ctf == manifest.runs[i].metrics.ctf);
    }
  }
}

TEST_CASE("fairberts runs produce training logs and honor warm-up") {
  TempDir dir("test_harness_fair");
  ExperimentConfig cfg = tiny_config("fairberts", dir.path);
  cfg.seeds = {0};
  RunManifest manifest = run_experiment(cfg);
  REQUIRE(manifest.runs.size() == 1);
  CHECK(!manifest.runs[0].log_path.empty());
  CHECK(fs::exists(manifest.runs[0].log_path));
  {
    std::ifstream in(manifest.runs[0].log_path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "iteration,L_D,L_G_F,L_T,wall_ms");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == cfg.train.max_iters);
  }

  // warm-up changes the trained model but keeps everything deterministic
  TempDir dir2("test_harness_fair_warm");
  ExperimentConfig warm = tiny_config("fairberts", dir2.path);
  warm.seeds = {0};
  warm.warmup_iters = 5;
  RunManifest wm = run_experiment(warm);
  CHECK(wm.config_hash != manifest.config_hash);
  CHECK(wm.runs[0].metrics.acc >= 0.0);
  TempDir dir3("test_harness_fair_warm2");
  ExperimentConfig warm2 = tiny_config("fairberts", dir3.path);
  warm2.seeds = {0};
  warm2.warmup_iters = 5;
  RunManifest wm2 = run_experiment(warm2);
  CHECK(wm2.runs[0].metrics.acc == wm.runs[0].metrics.acc);
  CHECK(wm2.runs[0].metrics.dpd == wm.runs[0].metrics.dpd);
}

TEST_CASE("every method tag trains end to end") {
  for (const std::string method : {"vanilla", "ftu1", "ftu2", "clp",
                                   "fairberts"}) {
    TempDir dir("test_harness_all_" + method);
    ExperimentConfig cfg = tiny_config(method, dir.path);
    cfg.seeds = {0};
    RunManifest manifest = run_experiment(cfg);
    REQUIRE(manifest.runs.size() == 1);
    Checkpoint ckpt = load_checkpoint(manifest.runs[0].checkpoint_path);
    CHECK(ckpt.kind == method);
    if (method == "ftu2") {
      // FTU-II checkpoints mask at inference straight from their header
      CHECK(ckpt.baseline->masks_at_inference());
      CHECK(manifest.runs[0].metrics.ctf == 1.0);
    }
  }
}

TEST_CASE("evaluate_checkpoint replays the manifest metrics") {
  TempDir dir("test_harness_eval");
  ExperimentConfig cfg = tiny_config("vanilla", dir.path);
  cfg.seeds = {0};
  RunManifest manifest = run_experiment(cfg);
  ExperimentData data = load_experiment_data(cfg);

  Checkpoint ckpt = load_checkpoint(manifest.runs[0].checkpoint_path);
  MetricValues m = evaluate_checkpoint(ckpt, data.test, data.lexicon,
                                       dir.path + "/replay_preds.jsonl",
                                       dir.path + "/replay_report.json");
  CHECK(m.acc == manifest.runs[0].metrics.acc);
  CHECK(m.dpd == manifest.runs[0].metrics.dpd);
  CHECK(m.eod == manifest.runs[0].metrics.eod);
  CHECK(m.dir == manifest.runs[0].metrics.dir);
  CHECK(m.ctf == manifest.runs[0].metrics.ctf);
  CHECK(fs::exists(dir.path + "/replay_preds.jsonl"));
  CHECK(fs::exists(dir.path + "/replay_report.json"));

  // the stored prediction files agree record for record
  auto a = load_predictions(manifest.runs[0].predictions_path);
  auto b = load_predictions(dir.path + "/replay_preds.jsonl");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].y_hat == b[i].y_hat);
  }
}

TEST_CASE("report table renders four-decimal mean and std cells") {
  MetricsReport r;
  r.per_seed = {MetricValues{0.8, 0.1, 0.2, 0.9, 1.0},
                MetricValues{1.0, 0.3, 0.4, 0.7, 0.8}};
  r.mean = MetricValues{0.9, 0.2, 0.3, 0.8, 0.9};
  r.stddev = MetricValues{0.1, 0.1, 0.1, 0.1, 0.1};
  std::string table = render_report_table({{"vanilla", r}});
  CHECK(table.find("method") != std::string::npos);
  CHECK(table.find("Acc") != std::string::npos);
  CHECK(table.find("CTF") != std::string::npos);
  CHECK(table.find("vanilla") != std::string::npos);
  CHECK(table.find("0.9000 ± 0.1000") != std::string::npos);

  std::string single = render_report_table(
      {{"clp", MetricsReport{{MetricValues{1, 0, 0, 1, 1}},
                             MetricValues{1, 0, 0, 1, 1},
                             MetricValues{}}}});
  CHECK(single.find("0.0000 ± 0.0000") != std::string::npos);
  CHECK(single.find("1.0000 ± 0.0000") != std::string::npos);
}

TEST_CASE("fnv1a and file hashing are stable") {
  CHECK(fnv1a_hash("") == 14695981039346656037ULL);
  CHECK(fnv1a_hash("a") == fnv1a_hash("a"));
  CHECK(fnv1a_hash("a") != fnv1a_hash("b"));

  std::ofstream out("test_harness_hash.bin", std::ios::binary);
  out << "payload";
  out.close();
  CHECK(file_hash("test_harness_hash.bin") == fnv1a_hash("payload"));
  std::remove("test_harness_hash.bin");
  CHECK_THROWS_AS(file_hash("test_harness_hash.bin"), ArtifactError);
}
