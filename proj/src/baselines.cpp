#include "fairtext/baselines.hpp"

#include <cmath>

#include "fairtext/errors.hpp"

namespace fairtext {

const char* baseline_tag_name(BaselineTag tag) {
  switch (tag) {
    case BaselineTag::kVanilla:
      return "vanilla";
    case BaselineTag::kFtu1:
      return "ftu1";
    case BaselineTag::kFtu2:
      return "ftu2";
    case BaselineTag::kClp:
      return "clp";
  }
  return "unknown";
}

BaselineTag baseline_tag_from_name(const std::string& name) {
  if (name == "vanilla") return BaselineTag::kVanilla;
  if (name == "ftu1") return BaselineTag::kFtu1;
  if (name == "ftu2") return BaselineTag::kFtu2;
  if (name == "clp") return BaselineTag::kClp;
  throw ParameterError("unknown baseline tag: " + name);
}

BaselineModel::BaselineModel(const EncoderConfig& enc_config, Vocabulary vocab,
                             const TrainConfig& train_config,
                             BaselineKind kind, IdentityLexicon lexicon)
    : encoder_(std::make_unique<TransformerEncoder>(enc_config,
                                                    std::move(vocab), store_)),
      task_head_(enc_config.dim, store_,
                 static_cast<unsigned>(train_config.seed) * 2654435761u + 3),
      train_config_(train_config),
      kind_(kind),
      lexicon_(std::move(lexicon)) {
  train_config_.validate();
  if (kind_.tag == BaselineTag::kClp && kind_.clp_lambda < 0.0) {
    throw ParameterError("clp_lambda must be >= 0");
  }
}

std::vector<std::string> BaselineModel::effective_tokens(
    const std::vector<std::string>& tokens) const {
  if (masks_at_inference()) return mask_identity_terms(tokens, lexicon_);
  return tokens;
}

Prediction BaselineModel::predict(const std::vector<std::string>& tokens) const {
  Tape tape;
  EncoderGraph enc = encoder_->encode(tape, effective_tokens(tokens));
  auto logits = task_head_.logits(tape, enc.h_c);
  Eigen::RowVectorXd lv = tape.value(logits).row(0);
  double mx = lv.maxCoeff();
  Eigen::ArrayXd e = (lv.array() - mx).exp().transpose();
  Eigen::ArrayXd p = e / e.sum();
  Prediction out;
  out.probs = {p(0), p(1)};
  out.y_hat = p(1) > p(0) ? 1 : 0;
  return out;
}

EncoderOutputs BaselineModel::represent(
    const std::vector<std::string>& tokens) const {
  return encoder_->encode_values(effective_tokens(tokens));
}

double BaselineModel::train_step(
    const Dataset& data, const std::vector<std::size_t>& batch,
    const std::vector<std::optional<std::vector<std::string>>>*
        counterfactuals) {
  if (batch.empty()) throw ParameterError("train_step: empty batch");
  store_.zero_grads();
  Tape tape;
  std::vector<Tape::NodeId> ce_terms;
  std::vector<Tape::NodeId> penalty_terms;
  for (std::size_t idx : batch) {
    const auto& ex = data.examples.at(idx);
    EncoderGraph enc = encoder_->encode(tape, ex.tokens);
    auto logits = task_head_.logits(tape, enc.h_c);
    ce_terms.push_back(tape.cross_entropy(logits, ex.y));
    if (counterfactuals && (*counterfactuals)[idx]) {
      EncoderGraph cf_enc = encoder_->encode(tape, *(*counterfactuals)[idx]);
      auto cf_logits = task_head_.logits(tape, cf_enc.h_c);
      auto gap = tape.add(logits, tape.scale(cf_logits, -1.0));
      if (kind_.clp_norm == ClpNorm::kAbsLogitGap) {
        // |positive-class logit gap|
        penalty_terms.push_back(tape.abs(tape.cols(gap, 1, 1)));
      } else {
        penalty_terms.push_back(tape.sqrt(tape.sum(tape.square(gap))));
      }
    }
  }
  auto acc = ce_terms[0];
  for (std::size_t i = 1; i < ce_terms.size(); ++i) {
    acc = tape.add(acc, ce_terms[i]);
  }
  auto loss = tape.scale(acc, 1.0 / static_cast<double>(ce_terms.size()));
  if (!penalty_terms.empty()) {
    auto pen = penalty_terms[0];
    for (std::size_t i = 1; i < penalty_terms.size(); ++i) {
      pen = tape.add(pen, penalty_terms[i]);
    }
    pen = tape.scale(pen, kind_.clp_lambda /
                              static_cast<double>(penalty_terms.size()));
    loss = tape.add(loss, pen);
  }
  double value = tape.scalar(loss);
  tape.backward(loss);
  store_.sgd_step(ParamGroup::kEncoder, train_config_.eta_g);
  store_.sgd_step(ParamGroup::kTaskHead, train_config_.eta_g);
  store_.zero_grads();
  return value;
}

namespace {

std::unique_ptr<BaselineModel> run_training(
    const Dataset& train_data, const Dataset& vocab_source,
    EncoderConfig enc_config, const TrainConfig& train_config,
    BaselineKind kind, IdentityLexicon lexicon,
    const std::vector<std::optional<std::vector<std::string>>>*
        counterfactuals) {
  if (train_data.examples.empty()) {
    throw ParameterError("baseline training: empty dataset");
  }
  train_config.validate();
  Vocabulary vocab = Vocabulary::build(vocab_source);
  if (enc_config.vocab_size == 0) enc_config.vocab_size = vocab.size();
  auto model = std::make_unique<BaselineModel>(
      enc_config, std::move(vocab), train_config, kind, std::move(lexicon));
  BatchStream batches(train_data.examples.size(),
                      static_cast<std::size_t>(train_config.batch_size),
                      static_cast<unsigned>(train_config.seed));
  for (int iter = 0; iter < train_config.max_iters; ++iter) {
    double loss =
        model->train_step(train_data, batches.next(), counterfactuals);
    if (!std::isfinite(loss)) {
      throw DivergenceError("non-finite loss at iteration " +
                            std::to_string(iter + 1));
    }
  }
  return model;
}

}  // namespace

std::unique_ptr<BaselineModel> train_vanilla(const Dataset& dataset,
                                             EncoderConfig enc_config,
                                             const TrainConfig& train_config) {
  return run_training(dataset, dataset, enc_config, train_config,
                      BaselineKind{BaselineTag::kVanilla}, IdentityLexicon{},
                      nullptr);
}

std::unique_ptr<BaselineModel> train_ftu(const Dataset& dataset,
                                         const IdentityLexicon& lexicon,
                                         EncoderConfig enc_config,
                                         const TrainConfig& train_config,
                                         FtuStage stage) {
  Dataset masked = dataset;
  for (auto& ex : masked.examples) {
    ex.tokens = mask_identity_terms(ex.tokens, lexicon);
  }
  BaselineKind kind{stage == FtuStage::kTrainAndInfer ? BaselineTag::kFtu2
                                                      : BaselineTag::kFtu1};
  // Vocabulary comes from the unmasked corpus so FTU-I still embeds the
  // identity terms it sees at inference time.
  return run_training(masked, dataset, enc_config, train_config, kind, lexicon,
                      nullptr);
}

std::unique_ptr<BaselineModel> train_clp(const Dataset& dataset,
                                         const IdentityLexicon& lexicon,
                                         EncoderConfig enc_config,
                                         const TrainConfig& train_config,
                                         double clp_lambda, ClpNorm norm) {
  if (clp_lambda < 0.0) throw ParameterError("clp_lambda must be >= 0");
  std::vector<std::optional<std::vector<std::string>>> counterfactuals;
  counterfactuals.reserve(dataset.examples.size());
  for (const auto& ex : dataset.examples) {
    auto swapped = swap_identity_terms(ex.tokens, lexicon);
    if (swapped == ex.tokens) {
      counterfactuals.emplace_back(std::nullopt);
    } else {
      counterfactuals.emplace_back(std::move(swapped));
    }
  }
  // Identity terms only occur swapped inside the penalty term, so take the
  // vocabulary from the augmented corpus to embed both sides of each pair.
  Dataset vocab_source = counterfactual_augment(dataset, lexicon);
  BaselineKind kind{BaselineTag::kClp, clp_lambda, norm};
  return run_training(dataset, vocab_source, enc_config, train_config, kind,
                      lexicon, &counterfactuals);
}

}  // namespace fairtext
