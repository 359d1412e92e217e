#include "fairtext/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "fairtext/errors.hpp"

namespace fairtext {

using nlohmann::json;

ProbeResult probe_sensitive(const std::vector<Eigen::RowVectorXd>& reps,
                            const std::vector<int>& z, unsigned split_seed,
                            const std::string& source) {
  if (reps.size() != z.size()) {
    throw ParameterError("probe_sensitive: representation/label mismatch");
  }
  if (reps.size() < 20) {
    throw ParameterError("probe_sensitive: need at least 20 samples");
  }
  if (std::count(z.begin(), z.end(), 0) == 0 ||
      std::count(z.begin(), z.end(), 1) == 0) {
    throw ParameterError("probe_sensitive: both groups must be present");
  }
  const auto d = reps[0].size();
  std::vector<std::size_t> order(reps.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937 rng(split_seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = (reps.size() * 4) / 5;

  // Full-batch logistic regression on the train part.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, 2);
  Eigen::RowVector2d b = Eigen::RowVector2d::Zero();
  const double lr = 0.5;
  const int iters = 400;
  for (int it = 0; it < iters; ++it) {
    Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(d, 2);
    Eigen::RowVector2d gb = Eigen::RowVector2d::Zero();
    for (std::size_t k = 0; k < n_train; ++k) {
      const auto& x = reps[order[k]];
      Eigen::RowVector2d logits = x * w + b;
      double mx = logits.maxCoeff();
      Eigen::RowVector2d p = (logits.array() - mx).exp();
      p /= p.sum();
      p(z[order[k]]) -= 1.0;
      gw += x.transpose() * p;
      gb += p;
    }
    w -= (lr / static_cast<double>(n_train)) * gw;
    b -= (lr / static_cast<double>(n_train)) * gb;
  }

  int correct = 0;
  for (std::size_t k = n_train; k < order.size(); ++k) {
    const auto& x = reps[order[k]];
    Eigen::RowVector2d logits = x * w + b;
    int pred = logits(1) > logits(0) ? 1 : 0;
    correct += (pred == z[order[k]]);
  }
  ProbeResult out;
  out.representation_source = source;
  out.n_train = static_cast<int>(n_train);
  out.n_test = static_cast<int>(order.size() - n_train);
  out.probe_accuracy = static_cast<double>(correct) / out.n_test;
  return out;
}

TokenImportance occlusion_importance(const ProbPredictFn& predict,
                                     const std::vector<std::string>& tokens,
                                     const std::string& id) {
  if (tokens.empty()) {
    throw ParameterError("occlusion_importance: empty token sequence");
  }
  Prediction full = predict(tokens);
  TokenImportance out;
  out.id = id;
  out.target_label = full.y_hat;
  double p_full = full.probs[static_cast<std::size_t>(full.y_hat)];
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == kMarkerToken) continue;
    std::vector<std::string> occluded = tokens;
    occluded[i] = kMaskToken;
    Prediction masked = predict(occluded);
    out.tokens.push_back(tokens[i]);
    out.scores.push_back(
        p_full - masked.probs[static_cast<std::size_t>(full.y_hat)]);
  }
  return out;
}

std::map<std::string, int> count_sensitive_in_topk(
    const std::vector<TokenImportance>& importances,
    const IdentityLexicon& lexicon, int k) {
  if (k < 1) throw ParameterError("count_sensitive_in_topk: k must be >= 1");
  std::map<std::string, int> counts;
  for (const auto& [a, b] : lexicon.pairs()) {
    counts[a] = 0;
    counts[b] = 0;
  }
  for (const auto& imp : importances) {
    std::vector<std::size_t> order(imp.tokens.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return imp.scores[a] > imp.scores[b];
                     });
    const std::size_t top =
        std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    std::set<std::string> seen;
    for (std::size_t i = 0; i < top; ++i) {
      const auto& tok = imp.tokens[order[i]];
      if (lexicon.contains(tok) && seen.insert(tok).second) {
        ++counts[tok];
      }
    }
  }
  return counts;
}

std::vector<std::array<double, 2>> project_2d(
    const std::vector<Eigen::RowVectorXd>& reps) {
  if (reps.size() < 3) throw ParameterError("project_2d: need >= 3 vectors");
  const auto n = static_cast<Eigen::Index>(reps.size());
  const auto d = reps[0].size();
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = reps[i];
  Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Columns are ordered by ascending eigenvalue; take the last two and fix
  // the sign so results do not depend on solver conventions.
  Eigen::MatrixXd basis(d, 2);
  basis.col(0) = solver.eigenvectors().col(d - 1);
  if (d >= 2) {
    basis.col(1) = solver.eigenvectors().col(d - 2);
  } else {
    basis.col(1).setZero();
  }
  for (int c = 0; c < 2; ++c) {
    Eigen::Index imax;
    basis.col(c).cwiseAbs().maxCoeff(&imax);
    if (basis(imax, c) < 0.0) basis.col(c) = -basis.col(c);
  }
  Eigen::MatrixXd proj = x * basis;
  std::vector<std::array<double, 2>> out(reps.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = {proj(i, 0), proj(i, 1)};
  }
  return out;
}

MetricValues evaluate_predictor(const PredictFn& predict,
                                const Dataset& dataset,
                                const IdentityLexicon& lexicon,
                                std::vector<PredictionRecord>* records_out) {
  if (dataset.examples.empty()) {
    throw ParameterError("evaluate_predictor: empty dataset");
  }
  std::vector<PredictionRecord> records;
  records.reserve(dataset.examples.size());
  for (const auto& ex : dataset.examples) {
    records.push_back(
        PredictionRecord{ex.id, predict(ex.tokens), ex.y, ex.z});
  }
  MetricValues m;
  m.acc = accuracy(records);
  m.dpd = dpd(records);
  m.eod = eod(records);
  m.dir = dir(records);
  auto pairs = counterfactual_pairs(dataset, lexicon);
  m.ctf = pairs.empty() ? 1.0 : ctf(predict, pairs);
  if (records_out) *records_out = std::move(records);
  return m;
}

MetricValues transfer_perturbations(
    const DebiasModel& source, const TransformerEncoder& target_encoder,
    const TaskHead& target_head, const Dataset& dataset,
    const IdentityLexicon& lexicon, TransferHs hs,
    std::vector<PredictionRecord>* records_out) {
  if (source.encoder_config().dim != target_encoder.config().dim) {
    throw ShapeError("transfer: source and target widths differ");
  }
  auto predict = [&](const std::vector<std::string>& tokens) {
    Tape tape;
    EncoderGraph target_enc = target_encoder.encode(tape, tokens);
    Tape::NodeId h_s = target_enc.h_s;
    if (hs == TransferHs::kSource) {
      h_s = source.encoder().encode(tape, tokens).h_s;
    }
    auto delta = source.generator().perturbation(tape, h_s);
    auto logits = target_head.logits(tape, tape.add(target_enc.h_c, delta));
    const auto& lv = tape.value(logits);
    return lv(0, 1) > lv(0, 0) ? 1 : 0;
  };
  return evaluate_predictor(predict, dataset, lexicon, records_out);
}

MetricValues transfer_perturbations(
    const DebiasModel& source, const BaselineModel& target,
    const Dataset& dataset, const IdentityLexicon& lexicon, TransferHs hs,
    std::vector<PredictionRecord>* records_out) {
  Dataset effective = dataset;
  if (target.masks_at_inference()) {
    for (auto& ex : effective.examples) {
      ex.tokens = mask_identity_terms(ex.tokens, target.lexicon());
    }
  }
  return transfer_perturbations(source, target.encoder(), target.task_head(),
                                effective, lexicon, hs, records_out);
}

void export_representations(const Dataset& dataset,
                            const std::vector<Eigen::RowVectorXd>& reps,
                            const std::string& path) {
  if (dataset.examples.size() != reps.size()) {
    throw ParameterError("export_representations: size mismatch");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write representation export: " + path);
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const auto& ex = dataset.examples[i];
    json vec = json::array();
    for (Eigen::Index j = 0; j < reps[i].size(); ++j) {
      vec.push_back(reps[i](j));
    }
    out << json{{"id", ex.id}, {"y", ex.y}, {"z", ex.z}, {"vector", vec}}.dump()
        << "\n";
  }
}

void export_importances(const std::vector<TokenImportance>& importances,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write importance export: " + path);
  for (const auto& imp : importances) {
    out << json{{"id", imp.id},
                {"tokens", imp.tokens},
                {"scores", imp.scores},
                {"target_label", imp.target_label}}
               .dump()
        << "\n";
  }
}

}  // namespace fairtext
