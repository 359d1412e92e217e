#include "fairtext/checkpoint.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "fairtext/errors.hpp"

namespace fairtext {

using nlohmann::json;

namespace {

json encoder_config_to_json(const EncoderConfig& c) {
  return json{{"vocab_size", c.vocab_size}, {"dim", c.dim},
              {"n_layers", c.n_layers},     {"n_heads", c.n_heads},
              {"max_len", c.max_len},       {"seed", c.seed}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.dim = j.at("dim").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.seed = j.at("seed").get<int>();
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"alpha", c.alpha},
              {"beta", c.beta},
              {"epsilon", c.epsilon},
              {"eta_d", c.eta_d},
              {"eta_g", c.eta_g},
              {"max_iters", c.max_iters},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"leaky_slope", c.leaky_slope},
              {"d_steps_per_g", c.d_steps_per_g},
              {"freeze_encoder", c.freeze_encoder}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.eta_d = j.at("eta_d").get<double>();
  c.eta_g = j.at("eta_g").get<double>();
  c.max_iters = j.at("max_iters").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.d_steps_per_g = j.at("d_steps_per_g").get<int>();
  c.freeze_encoder = j.at("freeze_encoder").get<bool>();
  return c;
}

json tensors_to_json(const ParameterStore& store) {
  json arr = json::array();
  for (const auto& t : store.tensors()) {
    json data = json::array();
    for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
        data.push_back(t.value(i, j));
      }
    }
    arr.push_back(json{{"name", t.name},
                       {"group", param_group_name(t.group)},
                       {"rows", t.value.rows()},
                       {"cols", t.value.cols()},
                       {"data", std::move(data)}});
  }
  return arr;
}

void tensors_from_json(const json& arr, ParameterStore& store) {
  for (const auto& jt : arr) {
    const auto name = jt.at("name").get<std::string>();
    if (!store.contains(name)) {
      throw ArtifactError("checkpoint tensor has no target: " + name);
    }
    Tensor& t = store.at(name);
    auto rows = jt.at("rows").get<Eigen::Index>();
    auto cols = jt.at("cols").get<Eigen::Index>();
    if (rows != t.value.rows() || cols != t.value.cols()) {
      throw ArtifactError("checkpoint tensor shape mismatch: " + name);
    }
    const auto& data = jt.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw ArtifactError("checkpoint tensor size mismatch: " + name);
    }
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        t.value(i, j) = data[k++].get<double>();
      }
    }
  }
}

json lexicon_to_json(const IdentityLexicon& lex) {
  json arr = json::array();
  for (const auto& [a, b] : lex.pairs()) {
    arr.push_back(json::array({a, b}));
  }
  return arr;
}

IdentityLexicon lexicon_from_json(const json& arr) {
  IdentityLexicon lex;
  for (const auto& p : arr) {
    lex.add_pair(p.at(0).get<std::string>(), p.at(1).get<std::string>());
  }
  return lex;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << j.dump() << "\n";
}

json header(const std::string& kind, const EncoderConfig& enc,
            const TrainConfig& tc, const Vocabulary& vocab) {
  return json{{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"kind", kind},
              {"encoder_config", encoder_config_to_json(enc)},
              {"train_config", train_config_to_json(tc)},
              {"vocab", vocab.tokens()}};
}

}  // namespace

void save_checkpoint(const DebiasModel& model, const std::string& path) {
  json j = header("fairberts", model.encoder_config(), model.train_config(),
                  model.encoder().vocab());
  j["tensors"] = tensors_to_json(model.store());
  write_json(j, path);
}

void save_checkpoint(const BaselineModel& model, const std::string& path) {
  json j = header(baseline_tag_name(model.kind().tag),
                  model.encoder().config(), model.train_config(),
                  model.encoder().vocab());
  j["lexicon"] = lexicon_to_json(model.lexicon());
  if (model.kind().tag == BaselineTag::kClp) {
    j["clp_lambda"] = model.kind().clp_lambda;
    j["clp_norm"] = model.kind().clp_norm == ClpNorm::kAbsLogitGap
                        ? "abs_logit_gap"
                        : "l2_logit_vector";
  }
  j["tensors"] = tensors_to_json(model.store());
  write_json(j, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ArtifactError("malformed checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw ArtifactError("not a model checkpoint: " + path);
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ArtifactError("unsupported checkpoint version in " + path);
    }
    Checkpoint ckpt;
    ckpt.kind = j.at("kind").get<std::string>();
    EncoderConfig enc = encoder_config_from_json(j.at("encoder_config"));
    TrainConfig tc = train_config_from_json(j.at("train_config"));
    Vocabulary vocab =
        Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>());
    if (ckpt.kind == "fairberts") {
      ckpt.debias = std::make_unique<DebiasModel>(enc, std::move(vocab), tc);
      tensors_from_json(j.at("tensors"), ckpt.debias->store());
    } else {
      BaselineKind kind{baseline_tag_from_name(ckpt.kind)};
      if (kind.tag == BaselineTag::kClp) {
        kind.clp_lambda = j.at("clp_lambda").get<double>();
        kind.clp_norm = j.at("clp_norm").get<std::string>() == "abs_logit_gap"
                            ? ClpNorm::kAbsLogitGap
                            : ClpNorm::kL2LogitVector;
      }
      IdentityLexicon lex = lexicon_from_json(j.at("lexicon"));
      ckpt.baseline = std::make_unique<BaselineModel>(
          enc, std::move(vocab), tc, kind, std::move(lex));
      tensors_from_json(j.at("tensors"), ckpt.baseline->store());
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw ArtifactError("malformed checkpoint " + path + ": " + e.what());
  }
}

Prediction Checkpoint::predict(const std::vector<std::string>& tokens) const {
  if (debias) return debias->predict(tokens);
  return baseline->predict(tokens);
}

const TransformerEncoder& Checkpoint::encoder() const {
  return debias ? debias->encoder() : baseline->encoder();
}

int Checkpoint::dim() const { return encoder().config().dim; }

}  // namespace fairtext
