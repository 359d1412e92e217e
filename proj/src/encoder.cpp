#include "fairtext/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "fairtext/errors.hpp"

namespace fairtext {

void EncoderConfig::validate() const {
  if (vocab_size < 3) throw ParameterError("vocab_size must be >= 3");
  if (dim < 1) throw ParameterError("dim must be positive");
  if (n_layers < 1) throw ParameterError("n_layers must be positive");
  if (n_heads < 1) throw ParameterError("n_heads must be positive");
  if (dim % n_heads != 0) {
    throw ParameterError("dim must be divisible by n_heads (" +
                         std::to_string(dim) + " % " +
                         std::to_string(n_heads) + " != 0)");
  }
  if (max_len < 2) throw ParameterError("max_len must be >= 2");
}

Vocabulary::Vocabulary() {
  tokens_ = {kMarkerToken, kMaskToken, kUnkToken};
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    index_[tokens_[i]] = i;
  }
}

Vocabulary Vocabulary::build(const Dataset& dataset) {
  std::set<std::string> seen;
  for (const auto& ex : dataset.examples) {
    for (const auto& t : ex.tokens) seen.insert(t);
  }
  Vocabulary v;
  for (const auto& t : seen) {
    if (!v.index_.count(t)) {
      v.index_[t] = static_cast<int>(v.tokens_.size());
      v.tokens_.push_back(t);
    }
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  v.tokens_.clear();
  v.index_.clear();
  for (const auto& t : tokens) {
    if (v.index_.count(t)) throw FormatError("duplicate vocabulary token: " + t);
    v.index_[t] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(t);
  }
  if (!v.index_.count(kMarkerToken) || !v.index_.count(kMaskToken) ||
      !v.index_.count(kUnkToken)) {
    throw FormatError("vocabulary lacks reserved tokens");
  }
  return v;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unk_id() : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) throw ParameterError("token id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::unk_id() const { return index_.at(kUnkToken); }
int Vocabulary::mask_id() const { return index_.at(kMaskToken); }

void init_group_tensors(ParameterStore& store, ParamGroup group,
                        unsigned seed) {
  std::mt19937 rng(seed);
  for (auto& t : store.tensors()) {
    if (t.group != group) continue;
    if (t.value.rows() == 1) {
      // Bias rows start at zero, layer-norm gains at one.
      bool is_gain = t.name.size() > 5 &&
                     t.name.compare(t.name.size() - 5, 5, "_gain") == 0;
      t.value.setConstant(is_gain ? 1.0 : 0.0);
      continue;
    }
    double limit = std::sqrt(
        6.0 / static_cast<double>(t.value.rows() + t.value.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
        t.value(i, j) = dist(rng);
      }
    }
  }
}

TransformerEncoder::TransformerEncoder(const EncoderConfig& config,
                                       Vocabulary vocab, ParameterStore& store)
    : config_(config), vocab_(std::move(vocab)), store_(&store) {
  config_.validate();
  if (vocab_.size() != config_.vocab_size) {
    throw ParameterError("vocabulary size " + std::to_string(vocab_.size()) +
                         " does not match config vocab_size " +
                         std::to_string(config_.vocab_size));
  }
  const int d = config_.dim;
  const auto g = ParamGroup::kEncoder;
  store.add("enc.tok_emb", g, config_.vocab_size, d);
  store.add("enc.pos_emb", g, config_.max_len, d);
  for (int l = 0; l < config_.n_layers; ++l) {
    std::string p = "enc.l" + std::to_string(l) + ".";
    store.add(p + "ln1_gain", g, 1, d);
    store.add(p + "ln1_bias", g, 1, d);
    store.add(p + "wq", g, d, d);
    store.add(p + "bq", g, 1, d);
    store.add(p + "wk", g, d, d);
    store.add(p + "bk", g, 1, d);
    store.add(p + "wv", g, d, d);
    store.add(p + "bv", g, 1, d);
    store.add(p + "wo", g, d, d);
    store.add(p + "bo", g, 1, d);
    store.add(p + "ln2_gain", g, 1, d);
    store.add(p + "ln2_bias", g, 1, d);
    store.add(p + "w_ff1", g, d, 4 * d);
    store.add(p + "b_ff1", g, 1, 4 * d);
    store.add(p + "w_ff2", g, 4 * d, d);
    store.add(p + "b_ff2", g, 1, d);
  }
  store.add("enc.ln_f_gain", g, 1, d);
  store.add("enc.ln_f_bias", g, 1, d);
  init_group_tensors(store, g, static_cast<unsigned>(config_.seed));
}

std::vector<int> TransformerEncoder::to_ids(
    const std::vector<std::string>& tokens, bool* truncated) const {
  if (tokens.empty()) throw ParameterError("encode: empty token sequence");
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab_.id_of(t));
  *truncated = false;
  if (static_cast<int>(ids.size()) > config_.max_len) {
    ids.resize(static_cast<std::size_t>(config_.max_len));
    *truncated = true;
    ++truncations_;
  }
  return ids;
}

EncoderGraph TransformerEncoder::encode(
    Tape& tape, const std::vector<std::string>& tokens) const {
  EncoderGraph out;
  std::vector<int> ids = to_ids(tokens, &out.truncated);
  const auto l_len = static_cast<Eigen::Index>(ids.size());
  const int d = config_.dim;
  const int dk = d / config_.n_heads;

  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    positions[i] = static_cast<int>(i);
  }
  auto x = tape.add(tape.embed_rows(store_->at("enc.tok_emb"), ids),
                    tape.embed_rows(store_->at("enc.pos_emb"), positions));

  for (int l = 0; l < config_.n_layers; ++l) {
    std::string p = "enc.l" + std::to_string(l) + ".";
    auto ln1 = tape.layer_norm(x, tape.param(store_->at(p + "ln1_gain")),
                               tape.param(store_->at(p + "ln1_bias")));
    auto q = tape.add_rowvec(tape.matmul(ln1, tape.param(store_->at(p + "wq"))),
                             tape.param(store_->at(p + "bq")));
    auto k = tape.add_rowvec(tape.matmul(ln1, tape.param(store_->at(p + "wk"))),
                             tape.param(store_->at(p + "bk")));
    auto v = tape.add_rowvec(tape.matmul(ln1, tape.param(store_->at(p + "wv"))),
                             tape.param(store_->at(p + "bv")));
    std::vector<Tape::NodeId> heads;
    for (int h = 0; h < config_.n_heads; ++h) {
      auto qh = tape.cols(q, h * dk, dk);
      auto kh = tape.cols(k, h * dk, dk);
      auto vh = tape.cols(v, h * dk, dk);
      auto scores =
          tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dk)));
      heads.push_back(tape.matmul(tape.softmax_rows(scores), vh));
    }
    auto attn = tape.add_rowvec(
        tape.matmul(tape.hcat(heads), tape.param(store_->at(p + "wo"))),
        tape.param(store_->at(p + "bo")));
    x = tape.add(x, attn);
    auto ln2 = tape.layer_norm(x, tape.param(store_->at(p + "ln2_gain")),
                               tape.param(store_->at(p + "ln2_bias")));
    auto ff = tape.add_rowvec(
        tape.matmul(
            tape.gelu(tape.add_rowvec(
                tape.matmul(ln2, tape.param(store_->at(p + "w_ff1"))),
                tape.param(store_->at(p + "b_ff1")))),
            tape.param(store_->at(p + "w_ff2"))),
        tape.param(store_->at(p + "b_ff2")));
    x = tape.add(x, ff);
  }
  out.h_s = tape.layer_norm(x, tape.param(store_->at("enc.ln_f_gain")),
                            tape.param(store_->at("enc.ln_f_bias")));
  out.h_c = tape.row(out.h_s, 0);
  (void)l_len;
  return out;
}

EncoderOutputs TransformerEncoder::encode_values(
    const std::vector<std::string>& tokens) const {
  Tape tape;
  EncoderGraph g = encode(tape, tokens);
  EncoderOutputs out;
  out.h_s = tape.value(g.h_s);
  out.h_c = tape.value(g.h_c).row(0);
  out.truncated = g.truncated;
  return out;
}

}  // namespace fairtext
