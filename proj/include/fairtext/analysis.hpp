#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fairtext/baselines.hpp"
#include "fairtext/debias.hpp"
#include "fairtext/metrics.hpp"

namespace fairtext {

struct ProbeResult {
  double probe_accuracy = 0.0;
  std::string representation_source;  // "h_c" or "h_c_fair"
  int n_train = 0;
  int n_test = 0;
};

// Trains a fresh affine probe on a seeded 80/20 split of the frozen vectors
// to predict z and reports held-out accuracy.
ProbeResult probe_sensitive(const std::vector<Eigen::RowVectorXd>& reps,
                            const std::vector<int>& z, unsigned split_seed,
                            const std::string& source = "h_c");

struct TokenImportance {
  std::string id;
  std::vector<std::string> tokens;  // marker excluded
  std::vector<double> scores;       // aligned with tokens
  int target_label = 0;             // full-input prediction being explained
};

using ProbPredictFn =
    std::function<Prediction(const std::vector<std::string>&)>;

// score(i) = p(y_full | input) - p(y_full | input with token i masked).
TokenImportance occlusion_importance(const ProbPredictFn& predict,
                                     const std::vector<std::string>& tokens,
                                     const std::string& id = "");

// Per lexicon term: number of examples where it lands in the k
// highest-scoring tokens (score descending, ties to the earlier token).
std::map<std::string, int> count_sensitive_in_topk(
    const std::vector<TokenImportance>& importances,
    const IdentityLexicon& lexicon, int k);

// Centered projection onto the top-2 principal directions.
std::vector<std::array<double, 2>> project_2d(
    const std::vector<Eigen::RowVectorXd>& reps);

enum class TransferHs { kTarget, kSource };

// Applies the source generator's perturbations to the target's pooled
// representation: y_hat = argmax f_target(h_c_target + G_source(h_s)).
// By default h_s comes from the target encoder.
MetricValues transfer_perturbations(
    const DebiasModel& source, const BaselineModel& target,
    const Dataset& dataset, const IdentityLexicon& lexicon,
    TransferHs hs = TransferHs::kTarget,
    std::vector<PredictionRecord>* records_out = nullptr);

// Generic form over any encoder/head pair; the BaselineModel overload adds
// the target's inference-time masking and self-transfer uses the source's
// own encoder and head.
MetricValues transfer_perturbations(
    const DebiasModel& source, const TransformerEncoder& target_encoder,
    const TaskHead& target_head, const Dataset& dataset,
    const IdentityLexicon& lexicon, TransferHs hs = TransferHs::kTarget,
    std::vector<PredictionRecord>* records_out = nullptr);

// Full metric suite for an arbitrary predictor.  CTF is evaluated on the
// counterfactual pairs of `dataset`; 1.0 when the dataset yields no pairs.
MetricValues evaluate_predictor(const PredictFn& predict,
                                const Dataset& dataset,
                                const IdentityLexicon& lexicon,
                                std::vector<PredictionRecord>* records_out =
                                    nullptr);

void export_representations(const Dataset& dataset,
                            const std::vector<Eigen::RowVectorXd>& reps,
                            const std::string& path);
void export_importances(const std::vector<TokenImportance>& importances,
                        const std::string& path);

}  // namespace fairtext
