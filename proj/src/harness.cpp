#include "fairtext/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fairtext/analysis.hpp"
#include "fairtext/errors.hpp"

namespace fairtext {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open artifact for hashing: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hash(ss.str());
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ParameterError("config key " + key + ": not an integer: " + v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ParameterError("config key " + key + ": not a number: " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParameterError("config key " + key + ": not a boolean: " + v);
}

json metrics_to_json(const MetricValues& m) {
  return json{{"acc", m.acc},
              {"dpd", m.dpd},
              {"eod", m.eod},
              {"dir", m.dir},
              {"ctf", m.ctf}};
}

MetricValues metrics_from_json(const json& j) {
  MetricValues m;
  m.acc = j.at("acc").get<double>();
  m.dpd = j.at("dpd").get<double>();
  m.eod = j.at("eod").get<double>();
  m.dir = j.at("dir").get<double>();
  m.ctf = j.at("ctf").get<double>();
  return m;
}

json report_to_json(const MetricsReport& r) {
  json per_seed = json::array();
  for (const auto& m : r.per_seed) per_seed.push_back(metrics_to_json(m));
  return json{{"per_seed", per_seed},
              {"mean", metrics_to_json(r.mean)},
              {"std", metrics_to_json(r.stddev)}};
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  for (const auto& m : j.at("per_seed")) {
    r.per_seed.push_back(metrics_from_json(m));
  }
  r.mean = metrics_from_json(j.at("mean"));
  r.stddev = metrics_from_json(j.at("std"));
  return r;
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParameterError("config " + path + " line " +
                           std::to_string(line_no) + ": expected key=value");
    }
    cfg.apply_override(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

void ExperimentConfig::apply_override(const std::string& key,
                                      const std::string& value) {
  auto synth = [this]() -> SyntheticSpec& {
    if (!synthetic) synthetic = SyntheticSpec{};
    return *synthetic;
  };
  if (key == "data.train") {
    train_path = value;
  } else if (key == "data.test") {
    test_path = value;
  } else if (key == "lexicon") {
    lexicon_path = value;
  } else if (key == "method") {
    method = value;
  } else if (key == "clp_lambda") {
    clp_lambda = to_double(key, value);
  } else if (key == "clp_norm") {
    if (value != "abs_logit_gap" && value != "l2_logit_vector") {
      throw ParameterError("config key clp_norm: unknown value " + value);
    }
    clp_norm = value;
  } else if (key == "seeds") {
    seeds.clear();
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) {
      seeds.push_back(to_int(key, trim(part)));
    }
  } else if (key == "out_dir") {
    out_dir = value;
  } else if (key == "synthetic.vocab_size") {
    synth().vocab_size = to_int(key, value);
  } else if (key == "synthetic.n_train") {
    synth().n_train = to_int(key, value);
  } else if (key == "synthetic.n_test") {
    synth().n_test = to_int(key, value);
  } else if (key == "synthetic.bias_rate") {
    synth().bias_rate = to_double(key, value);
  } else if (key == "synthetic.test_bias_rate") {
    synth().test_bias_rate = to_double(key, value);
  } else if (key == "synthetic.seed") {
    synth().seed = static_cast<unsigned>(to_int(key, value));
  } else if (key == "encoder.dim") {
    encoder.dim = to_int(key, value);
  } else if (key == "encoder.n_layers") {
    encoder.n_layers = to_int(key, value);
  } else if (key == "encoder.n_heads") {
    encoder.n_heads = to_int(key, value);
  } else if (key == "encoder.max_len") {
    encoder.max_len = to_int(key, value);
  } else if (key == "train.alpha") {
    train.alpha = to_double(key, value);
  } else if (key == "train.beta") {
    train.beta = to_double(key, value);
  } else if (key == "train.epsilon") {
    train.epsilon = to_double(key, value);
  } else if (key == "train.eta_d") {
    train.eta_d = to_double(key, value);
  } else if (key == "train.eta_g") {
    train.eta_g = to_double(key, value);
  } else if (key == "train.iters") {
    train.max_iters = to_int(key, value);
  } else if (key == "train.batch") {
    train.batch_size = to_int(key, value);
  } else if (key == "train.leaky_slope") {
    train.leaky_slope = to_double(key, value);
  } else if (key == "train.d_steps_per_g") {
    train.d_steps_per_g = to_int(key, value);
  } else if (key == "train.freeze_encoder") {
    train.freeze_encoder = to_bool(key, value);
  } else if (key == "train.warmup") {
    warmup_iters = to_int(key, value);
  } else {
    throw ParameterError("unknown config key: " + key);
  }
}

void ExperimentConfig::validate() const {
  if (!synthetic && (!train_path || !test_path)) {
    throw ParameterError(
        "config needs either data.train and data.test or synthetic.*");
  }
  if (method != "fairberts") {
    baseline_tag_from_name(method);  // throws on unknown tags
  }
  if (method == "clp" && !clp_lambda) {
    throw ParameterError("config key clp_lambda is required for method=clp");
  }
  if (method != "clp" && clp_lambda) {
    throw ParameterError("config key clp_lambda is only valid for method=clp");
  }
  if (seeds.empty()) throw ParameterError("config key seeds must be nonempty");
  if (warmup_iters < 0) {
    throw ParameterError("config key train.warmup must be >= 0");
  }
  train.validate();
}

std::string ExperimentConfig::canonical() const {
  std::vector<std::pair<std::string, std::string>> kv;
  auto put = [&kv](const std::string& k, const std::string& v) {
    kv.emplace_back(k, v);
  };
  auto num = [](double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
  };
  if (train_path) put("data.train", *train_path);
  if (test_path) put("data.test", *test_path);
  if (lexicon_path) put("lexicon", *lexicon_path);
  put("method", method);
  if (clp_lambda) put("clp_lambda", num(*clp_lambda));
  if (method == "clp") put("clp_norm", clp_norm);
  {
    std::ostringstream ss;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (i) ss << ",";
      ss << seeds[i];
    }
    put("seeds", ss.str());
  }
  if (synthetic) {
    put("synthetic.vocab_size", std::to_string(synthetic->vocab_size));
    put("synthetic.n_train", std::to_string(synthetic->n_train));
    put("synthetic.n_test", std::to_string(synthetic->n_test));
    put("synthetic.bias_rate", num(synthetic->bias_rate));
    put("synthetic.test_bias_rate", num(synthetic->test_bias_rate));
    put("synthetic.seed", std::to_string(synthetic->seed));
  }
  put("encoder.dim", std::to_string(encoder.dim));
  put("encoder.n_layers", std::to_string(encoder.n_layers));
  put("encoder.n_heads", std::to_string(encoder.n_heads));
  put("encoder.max_len", std::to_string(encoder.max_len));
  put("train.alpha", num(train.alpha));
  put("train.beta", num(train.beta));
  put("train.epsilon", num(train.epsilon));
  put("train.eta_d", num(train.eta_d));
  put("train.eta_g", num(train.eta_g));
  put("train.iters", std::to_string(train.max_iters));
  put("train.batch", std::to_string(train.batch_size));
  put("train.leaky_slope", num(train.leaky_slope));
  put("train.d_steps_per_g", std::to_string(train.d_steps_per_g));
  put("train.freeze_encoder", train.freeze_encoder ? "true" : "false");
  put("train.warmup", std::to_string(warmup_iters));
  std::sort(kv.begin(), kv.end());
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += "=";
    out += v;
    out += "\n";
  }
  return out;
}

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  ExperimentData data;
  if (config.synthetic) {
    const auto& s = *config.synthetic;
    data.train = make_synthetic_biased_corpus(s.vocab_size, s.n_train,
                                              s.bias_rate, s.seed);
    data.train.split = Split::kTrain;
    data.test = make_synthetic_biased_corpus(s.vocab_size, s.n_test,
                                             s.test_bias_rate, s.seed + 1);
    data.test.split = Split::kTest;
    data.lexicon =
        config.lexicon_path ? IdentityLexicon::load(*config.lexicon_path)
                            : synthetic_lexicon();
  } else {
    data.train = load_dataset(*config.train_path, Split::kTrain);
    data.test = load_dataset(*config.test_path, Split::kTest);
    data.lexicon = config.lexicon_path
                       ? IdentityLexicon::load(*config.lexicon_path)
                       : IdentityLexicon::default_gender();
  }
  return data;
}

void RunManifest::save(const std::string& path) const {
  json artifacts = json::array();
  for (const auto& [p, h] : artifact_hashes) {
    artifacts.push_back(json::array({p, h}));
  }
  json runs_json = json::array();
  for (const auto& r : runs) {
    runs_json.push_back(json{{"seed", r.seed},
                             {"checkpoint", r.checkpoint_path},
                             {"predictions", r.predictions_path},
                             {"log", r.log_path},
                             {"metrics", metrics_to_json(r.metrics)}});
  }
  json j{{"tool_version", tool_version},
         {"config_hash", config_hash},
         {"config_canonical", config_canonical},
         {"method", method},
         {"runs", runs_json},
         {"aggregate", report_to_json(aggregate)},
         {"artifacts", artifacts}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

RunManifest RunManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::uint64_t>();
    m.config_canonical = j.at("config_canonical").get<std::string>();
    m.method = j.at("method").get<std::string>();
    for (const auto& r : j.at("runs")) {
      SeedRun run;
      run.seed = r.at("seed").get<int>();
      run.checkpoint_path = r.at("checkpoint").get<std::string>();
      run.predictions_path = r.at("predictions").get<std::string>();
      run.log_path = r.at("log").get<std::string>();
      run.metrics = metrics_from_json(r.at("metrics"));
      m.runs.push_back(std::move(run));
    }
    m.aggregate = report_from_json(j.at("aggregate"));
    for (const auto& a : j.at("artifacts")) {
      m.artifact_hashes.emplace_back(a.at(0).get<std::string>(),
                                     a.at(1).get<std::uint64_t>());
    }
    if (fnv1a_hash(m.config_canonical) != m.config_hash) {
      throw ArtifactError("manifest config hash mismatch in " + path);
    }
    return m;
  } catch (const json::exception& e) {
    throw ArtifactError("malformed manifest " + path + ": " + e.what());
  }
}

void RunManifest::verify() const {
  for (const auto& [path, hash] : artifact_hashes) {
    if (!fs::exists(path)) {
      throw ArtifactError("manifest artifact missing: " + path);
    }
    if (file_hash(path) != hash) {
      throw ArtifactError("manifest artifact hash mismatch: " + path);
    }
  }
}

RunManifest run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentData data = load_experiment_data(config);
  fs::create_directories(config.out_dir);

  RunManifest manifest;
  manifest.tool_version = kToolVersion;
  manifest.config_canonical = config.canonical();
  manifest.config_hash = fnv1a_hash(manifest.config_canonical);
  manifest.method = config.method;

  std::vector<MetricValues> per_seed;
  for (int seed : config.seeds) {
    TrainConfig tc = config.train;
    tc.seed = seed;
    // The encoder seed stays fixed across runs: every model starts from the
    // same initial encoder, the way fine-tuning starts from one pre-trained
    // checkpoint. The run seed drives batching and head/G/D initialization.
    EncoderConfig enc = config.encoder;
    enc.vocab_size = 0;  // filled from the training vocabulary

    SeedRun run;
    run.seed = seed;
    std::string stem =
        config.out_dir + "/" + config.method + "_seed" + std::to_string(seed);
    run.checkpoint_path = stem + ".ckpt.json";
    run.predictions_path = stem + "_predictions.jsonl";

    PredictFn predict;
    if (config.method == "fairberts") {
      std::unique_ptr<BaselineModel> warm;
      const ParameterStore* warm_store = nullptr;
      if (config.warmup_iters > 0) {
        // Task-only warm-up standing in for a pre-trained checkpoint.  The
        // zero-penalty CLP trainer is an exact vanilla trajectory whose
        // vocabulary comes from the augmented corpus, so its encoder and
        // head tensors line up with the adversarial model's.
        TrainConfig wtc = tc;
        wtc.max_iters = config.warmup_iters;
        warm = train_clp(data.train, data.lexicon, enc, wtc, 0.0);
        warm_store = &warm->store();
      }
      auto model = train_debias(data.train, data.lexicon, enc, tc, warm_store);
      run.log_path = stem + "_train_log.csv";
      write_training_log(model->log(), run.log_path);
      save_checkpoint(*model, run.checkpoint_path);
      auto shared = std::shared_ptr<DebiasModel>(std::move(model));
      predict = [shared](const std::vector<std::string>& tokens) {
        return shared->predict(tokens).y_hat;
      };
    } else {
      std::unique_ptr<BaselineModel> model;
      if (config.method == "vanilla") {
        model = train_vanilla(data.train, enc, tc);
      } else if (config.method == "ftu1") {
        model = train_ftu(data.train, data.lexicon, enc, tc,
                          FtuStage::kTrainOnly);
      } else if (config.method == "ftu2") {
        model = train_ftu(data.train, data.lexicon, enc, tc,
                          FtuStage::kTrainAndInfer);
      } else {
        model = train_clp(data.train, data.lexicon, enc, tc, *config.clp_lambda,
                          config.clp_norm == "abs_logit_gap"
                              ? ClpNorm::kAbsLogitGap
                              : ClpNorm::kL2LogitVector);
      }
      save_checkpoint(*model, run.checkpoint_path);
      auto shared = std::shared_ptr<BaselineModel>(std::move(model));
      predict = [shared](const std::vector<std::string>& tokens) {
        return shared->predict(tokens).y_hat;
      };
    }

    std::vector<PredictionRecord> records;
    run.metrics = evaluate_predictor(predict, data.test, data.lexicon,
                                     &records);
    save_predictions(records, run.predictions_path);

    std::string metrics_path = stem + "_metrics.json";
    {
      std::ofstream out(metrics_path);
      if (!out) throw IoError("cannot write metrics report: " + metrics_path);
      out << metrics_to_json(run.metrics).dump(2) << "\n";
    }
    manifest.artifact_hashes.emplace_back(run.checkpoint_path,
                                          file_hash(run.checkpoint_path));
    manifest.artifact_hashes.emplace_back(run.predictions_path,
                                          file_hash(run.predictions_path));
    manifest.artifact_hashes.emplace_back(metrics_path,
                                          file_hash(metrics_path));
    if (!run.log_path.empty()) {
      manifest.artifact_hashes.emplace_back(run.log_path,
                                            file_hash(run.log_path));
    }
    per_seed.push_back(run.metrics);
    manifest.runs.push_back(std::move(run));
  }
  manifest.aggregate = aggregate_seeds(per_seed);
  manifest.save(config.out_dir + "/manifest_" + config.method + ".json");
  return manifest;
}

MetricValues evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& test,
                                 const IdentityLexicon& lexicon,
                                 const std::string& predictions_path,
                                 const std::string& report_path) {
  auto predict = [&ckpt](const std::vector<std::string>& tokens) {
    return ckpt.predict(tokens).y_hat;
  };
  std::vector<PredictionRecord> records;
  MetricValues m = evaluate_predictor(predict, test, lexicon, &records);
  save_predictions(records, predictions_path);
  std::ofstream out(report_path);
  if (!out) throw IoError("cannot write report: " + report_path);
  json j{{"kind", ckpt.kind}, {"metrics", metrics_to_json(m)}};
  out << j.dump(2) << "\n";
  return m;
}

std::string render_report_table(
    const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "method";
  for (const char* col : {"Acc", "DPD", "EOD", "DIR", "CTF"}) {
    out << std::setw(18) << col;
  }
  out << "\n";
  auto cell = [](double mean, double sd) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(4) << mean << " ± " << sd;
    return ss.str();
  };
  for (const auto& [method, report] : rows) {
    out << std::left << std::setw(12) << method;
    out << std::setw(18) << cell(report.mean.acc, report.stddev.acc)
        << std::setw(18) << cell(report.mean.dpd, report.stddev.dpd)
        << std::setw(18) << cell(report.mean.eod, report.stddev.eod)
        << std::setw(18) << cell(report.mean.dir, report.stddev.dir)
        << std::setw(18) << cell(report.mean.ctf, report.stddev.ctf) << "\n";
  }
  return out.str();
}

}  // namespace fairtext
