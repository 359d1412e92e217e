// Command-line driver: corpus augmentation, training, evaluation,
// perturbation transfer, representation analysis, and report rendering.
//
// Exit codes: 0 success, 2 invalid configuration or input format,
// 3 training divergence, 4 incompatible or corrupt artifacts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fairtext/analysis.hpp"
#include "fairtext/checkpoint.hpp"
#include "fairtext/errors.hpp"
#include "fairtext/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fairtext;

namespace {

IdentityLexicon lexicon_from_option(const std::string& path) {
  return path.empty() ? IdentityLexicon::default_gender()
                      : IdentityLexicon::load(path);
}

int run_augment(const std::string& data_path, const std::string& lexicon_path,
                const std::string& out_path) {
  Dataset ds = load_dataset(data_path, Split::kTrain);
  IdentityLexicon lex = lexicon_from_option(lexicon_path);
  Dataset augmented = counterfactual_augment(ds, lex);
  save_dataset(augmented, out_path);
  std::cout << "augmented " << ds.examples.size() << " -> "
            << augmented.examples.size() << " examples to " << out_path
            << "\n";
  return 0;
}

int run_train(const std::string& config_path,
              const std::vector<std::string>& overrides) {
  ExperimentConfig config;
  if (!config_path.empty()) config = ExperimentConfig::load(config_path);
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ParameterError("--set expects key=value, got: " + kv);
    }
    config.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
  }
  RunManifest manifest = run_experiment(config);
  std::cout << "method " << manifest.method << ", config hash "
            << manifest.config_hash << "\n";
  std::cout << render_report_table({{manifest.method, manifest.aggregate}});
  std::cout << "manifest: " << config.out_dir << "/manifest_"
            << manifest.method << ".json\n";
  return 0;
}

int run_evaluate(const std::string& ckpt_path, const std::string& data_path,
                 const std::string& lexicon_path, const std::string& out_dir) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  Dataset test = load_dataset(data_path, Split::kTest);
  IdentityLexicon lex = lexicon_from_option(lexicon_path);
  fs::create_directories(out_dir);
  std::string stem = out_dir + "/" + fs::path(ckpt_path).stem().string();
  MetricValues m = evaluate_checkpoint(ckpt, test, lex,
                                       stem + "_predictions.jsonl",
                                       stem + "_report.json");
  MetricsReport single = aggregate_seeds({m});
  std::cout << render_report_table({{ckpt.kind, single}});
  return 0;
}

int run_transfer(const std::string& source_path, const std::string& target_path,
                 const std::string& data_path, const std::string& lexicon_path,
                 const std::string& hs_choice, const std::string& out_path) {
  Checkpoint source = load_checkpoint(source_path);
  if (!source.is_debias()) {
    throw ArtifactError("transfer source must be a fairberts checkpoint");
  }
  Checkpoint target = load_checkpoint(target_path);
  Dataset test = load_dataset(data_path, Split::kTest);
  IdentityLexicon lex = lexicon_from_option(lexicon_path);
  TransferHs hs =
      hs_choice == "source" ? TransferHs::kSource : TransferHs::kTarget;

  MetricValues vanilla_row;
  MetricValues delta_row;
  if (target.is_debias()) {
    // Self-transfer: the target contributes its encoder and task head.
    vanilla_row = evaluate_predictor(
        [&](const std::vector<std::string>& tokens) {
          return target.predict(tokens).y_hat;
        },
        test, lex);
    delta_row = transfer_perturbations(*source.debias,
                                       target.debias->encoder(),
                                       target.debias->task_head(), test, lex,
                                       hs);
  } else {
    vanilla_row = evaluate_predictor(
        [&](const std::vector<std::string>& tokens) {
          return target.baseline->predict(tokens).y_hat;
        },
        test, lex);
    delta_row =
        transfer_perturbations(*source.debias, *target.baseline, test, lex, hs);
  }

  MetricsReport vanilla_report = aggregate_seeds({vanilla_row});
  MetricsReport delta_report = aggregate_seeds({delta_row});
  std::string table = render_report_table(
      {{target.kind, vanilla_report}, {target.kind + "+delta", delta_report}});
  std::cout << table;
  if (!out_path.empty()) {
    json j{{"transfer_hs", hs_choice},
           {"target", {{"kind", target.kind},
                       {"acc", vanilla_row.acc},
                       {"dpd", vanilla_row.dpd},
                       {"eod", vanilla_row.eod},
                       {"dir", vanilla_row.dir},
                       {"ctf", vanilla_row.ctf}}},
           {"target_plus_delta", {{"acc", delta_row.acc},
                                  {"dpd", delta_row.dpd},
                                  {"eod", delta_row.eod},
                                  {"dir", delta_row.dir},
                                  {"ctf", delta_row.ctf}}},
           {"rendered", table}};
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write transfer report: " + out_path);
    out << j.dump(2) << "\n";
  }
  return 0;
}

int run_analyze(const std::string& ckpt_path, const std::string& data_path,
                const std::string& lexicon_path, const std::string& out_dir,
                int topk) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  Dataset test = load_dataset(data_path, Split::kTest);
  IdentityLexicon lex = lexicon_from_option(lexicon_path);
  fs::create_directories(out_dir);

  std::vector<Eigen::RowVectorXd> h_c;
  std::vector<Eigen::RowVectorXd> h_c_fair;
  std::vector<int> z;
  for (const auto& ex : test.examples) {
    z.push_back(ex.z);
    if (ckpt.is_debias()) {
      Tape tape;
      EncoderGraph enc = ckpt.debias->encoder().encode(tape, ex.tokens);
      auto delta = ckpt.debias->generator().perturbation(tape, enc.h_s);
      auto fair = tape.add(enc.h_c, delta);
      h_c.push_back(tape.value(enc.h_c).row(0));
      h_c_fair.push_back(tape.value(fair).row(0));
    } else {
      h_c.push_back(ckpt.baseline->represent(ex.tokens).h_c);
    }
  }

  json probes = json::array();
  auto add_probe = [&](const std::vector<Eigen::RowVectorXd>& reps,
                       const std::string& source) {
    ProbeResult p = probe_sensitive(reps, z, 0, source);
    probes.push_back(json{{"source", p.representation_source},
                          {"probe_accuracy", p.probe_accuracy},
                          {"n_train", p.n_train},
                          {"n_test", p.n_test}});
    std::cout << "probe " << source << ": " << p.probe_accuracy << "\n";
  };
  add_probe(h_c, "h_c");
  if (!h_c_fair.empty()) add_probe(h_c_fair, "h_c_fair");

  export_representations(test, ckpt.is_debias() ? h_c_fair : h_c,
                         out_dir + "/representations.jsonl");
  auto coords = project_2d(ckpt.is_debias() ? h_c_fair : h_c);
  {
    std::ofstream out(out_dir + "/projection.jsonl");
    for (std::size_t i = 0; i < coords.size(); ++i) {
      out << json{{"id", test.examples[i].id},
                  {"x", coords[i][0]},
                  {"y", coords[i][1]},
                  {"z", test.examples[i].z}}
                 .dump()
          << "\n";
    }
  }

  std::vector<TokenImportance> importances;
  for (const auto& ex : test.examples) {
    importances.push_back(occlusion_importance(
        [&](const std::vector<std::string>& tokens) {
          return ckpt.predict(tokens);
        },
        ex.tokens, ex.id));
  }
  export_importances(importances, out_dir + "/importances.jsonl");
  auto counts = count_sensitive_in_topk(importances, lex, topk);
  json counts_json = json::object();
  int total = 0;
  for (const auto& [term, count] : counts) {
    counts_json[term] = count;
    total += count;
  }
  std::cout << "sensitive terms in top-" << topk << ": " << total << "\n";
  {
    std::ofstream out(out_dir + "/analysis.json");
    out << json{{"probes", probes},
                {"topk", topk},
                {"sensitive_topk_counts", counts_json},
                {"sensitive_topk_total", total}}
               .dump(2)
        << "\n";
  }
  return 0;
}

int run_report(const std::vector<std::string>& manifest_paths,
               const std::string& out_path, bool verify) {
  std::vector<std::pair<std::string, MetricsReport>> rows;
  json j_manifests = json::array();
  for (const auto& path : manifest_paths) {
    RunManifest m;
    try {
      m = RunManifest::load(path);
    } catch (const ArtifactError& e) {
      // Report treats unreadable or mismatched manifests as config errors.
      throw ParameterError(e.what());
    }
    if (verify) m.verify();
    rows.emplace_back(m.method, m.aggregate);
    j_manifests.push_back(json{{"path", path},
                               {"method", m.method},
                               {"config_hash", m.config_hash}});
  }
  std::string table = render_report_table(rows);
  std::cout << table;
  if (!out_path.empty()) {
    json rows_json = json::array();
    for (const auto& [method, report] : rows) {
      json per_seed = json::array();
      for (const auto& m : report.per_seed) {
        per_seed.push_back(json{{"acc", m.acc},
                                {"dpd", m.dpd},
                                {"eod", m.eod},
                                {"dir", m.dir},
                                {"ctf", m.ctf}});
      }
      rows_json.push_back(json{
          {"method", method},
          {"per_seed", per_seed},
          {"mean",
           {{"acc", report.mean.acc},
            {"dpd", report.mean.dpd},
            {"eod", report.mean.eod},
            {"dir", report.mean.dir},
            {"ctf", report.mean.ctf}}},
          {"std",
           {{"acc", report.stddev.acc},
            {"dpd", report.stddev.dpd},
            {"eod", report.stddev.eod},
            {"dir", report.stddev.dir},
            {"ctf", report.stddev.ctf}}}});
    }
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write report: " + out_path);
    out << json{{"manifests", j_manifests},
                {"rows", rows_json},
                {"rendered", table}}
               .dump(2)
        << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairtext: adversarially debiased text classification toolkit"};
  app.require_subcommand(1);

  std::string data_path, lexicon_path, out_path, out_dir = "out";
  std::string config_path, ckpt_path, source_path, target_path;
  std::string hs_choice = "target";
  std::vector<std::string> overrides, manifest_paths;
  int topk = 3;
  bool verify = false;

  auto* augment = app.add_subcommand("augment", "Counterfactually augment a dataset");
  augment->add_option("--data", data_path, "dataset JSONL")->required();
  augment->add_option("--lexicon", lexicon_path, "lexicon JSONL (default: built-in gender pairs)");
  augment->add_option("--out", out_path, "output JSONL")->required();

  auto* train = app.add_subcommand("train", "Train one method across seeds");
  train->add_option("--config", config_path, "flat key=value config file");
  train->add_option("--set", overrides, "override, key=value (repeatable)");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  evaluate->add_option("--checkpoint", ckpt_path)->required();
  evaluate->add_option("--data", data_path)->required();
  evaluate->add_option("--lexicon", lexicon_path);
  evaluate->add_option("--out-dir", out_dir);

  auto* transfer = app.add_subcommand("transfer", "Apply a trained generator to another model");
  transfer->add_option("--source", source_path, "fairberts checkpoint")->required();
  transfer->add_option("--target", target_path, "target checkpoint")->required();
  transfer->add_option("--data", data_path)->required();
  transfer->add_option("--lexicon", lexicon_path);
  transfer->add_option("--transfer-hs", hs_choice, "h_s fed to G: target|source")
      ->check(CLI::IsMember({"target", "source"}));
  transfer->add_option("--out", out_path, "JSON report path");

  auto* analyze = app.add_subcommand("analyze", "Probing, occlusion importance, 2-D projection");
  analyze->add_option("--checkpoint", ckpt_path)->required();
  analyze->add_option("--data", data_path)->required();
  analyze->add_option("--lexicon", lexicon_path);
  analyze->add_option("--out-dir", out_dir);
  analyze->add_option("--topk", topk, "top-k cutoff for sensitive-word counts");

  auto* report = app.add_subcommand("report", "Render a comparison table from manifests");
  report->add_option("manifests", manifest_paths, "manifest JSON paths")->required();
  report->add_option("--out", out_path, "JSON output path");
  report->add_flag("--verify", verify, "hash-validate every referenced artifact");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*augment) return run_augment(data_path, lexicon_path, out_path);
    if (*train) return run_train(config_path, overrides);
    if (*evaluate) return run_evaluate(ckpt_path, data_path, lexicon_path, out_dir);
    if (*transfer) {
      return run_transfer(source_path, target_path, data_path, lexicon_path,
                          hs_choice, out_path);
    }
    if (*analyze) {
      return run_analyze(ckpt_path, data_path, lexicon_path, out_dir, topk);
    }
    if (*report) return run_report(manifest_paths, out_path, verify);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
