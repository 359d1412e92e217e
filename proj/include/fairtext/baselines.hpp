#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fairtext/corpus.hpp"
#include "fairtext/debias.hpp"
#include "fairtext/encoder.hpp"

namespace fairtext {

enum class BaselineTag { kVanilla, kFtu1, kFtu2, kClp };

const char* baseline_tag_name(BaselineTag tag);
BaselineTag baseline_tag_from_name(const std::string& name);

enum class ClpNorm { kAbsLogitGap, kL2LogitVector };

struct BaselineKind {
  BaselineTag tag = BaselineTag::kVanilla;
  double clp_lambda = 0.0;  // meaningful only for kClp
  ClpNorm clp_norm = ClpNorm::kAbsLogitGap;
};

enum class FtuStage { kTrainOnly, kTrainAndInfer };

// Encoder + task head trained without the adversarial components.  FTU-II
// models mask identity terms at inference time and carry the lexicon for it.
class BaselineModel {
 public:
  BaselineModel(const EncoderConfig& enc_config, Vocabulary vocab,
                const TrainConfig& train_config, BaselineKind kind,
                IdentityLexicon lexicon);

  Prediction predict(const std::vector<std::string>& tokens) const;
  // Representations after any inference-time masking.
  EncoderOutputs represent(const std::vector<std::string>& tokens) const;

  const TransformerEncoder& encoder() const { return *encoder_; }
  const TaskHead& task_head() const { return task_head_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  const BaselineKind& kind() const { return kind_; }
  bool masks_at_inference() const { return kind_.tag == BaselineTag::kFtu2; }
  const TrainConfig& train_config() const { return train_config_; }
  const IdentityLexicon& lexicon() const { return lexicon_; }

  // One SGD step on mean task cross-entropy over `batch` drawn from `data`.
  // When `counterfactuals` is non-null (CLP), examples with a counterfactual
  // token sequence are co-batched and the logit-pairing penalty is added.
  double train_step(
      const Dataset& data, const std::vector<std::size_t>& batch,
      const std::vector<std::optional<std::vector<std::string>>>*
          counterfactuals = nullptr);

 private:
  std::vector<std::string> effective_tokens(
      const std::vector<std::string>& tokens) const;

  ParameterStore store_;
  std::unique_ptr<TransformerEncoder> encoder_;
  TaskHead task_head_;
  TrainConfig train_config_;
  BaselineKind kind_;
  IdentityLexicon lexicon_;
};

std::unique_ptr<BaselineModel> train_vanilla(const Dataset& dataset,
                                             EncoderConfig enc_config,
                                             const TrainConfig& train_config);

std::unique_ptr<BaselineModel> train_ftu(const Dataset& dataset,
                                         const IdentityLexicon& lexicon,
                                         EncoderConfig enc_config,
                                         const TrainConfig& train_config,
                                         FtuStage stage);

std::unique_ptr<BaselineModel> train_clp(const Dataset& dataset,
                                         const IdentityLexicon& lexicon,
                                         EncoderConfig enc_config,
                                         const TrainConfig& train_config,
                                         double clp_lambda,
                                         ClpNorm norm = ClpNorm::kAbsLogitGap);

}  // namespace fairtext
