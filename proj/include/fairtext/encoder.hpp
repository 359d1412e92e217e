#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairtext/autodiff.hpp"
#include "fairtext/corpus.hpp"
#include "fairtext/params.hpp"

namespace fairtext {

struct EncoderConfig {
  int vocab_size = 0;
  int dim = 32;
  int n_layers = 2;
  int n_heads = 4;
  int max_len = 32;
  int seed = 0;

  void validate() const;
};

// Pooled and per-token representations of one input.
struct EncoderOutputs {
  Eigen::RowVectorXd h_c;  // marker-row pooled representation, length d
  Eigen::MatrixXd h_s;     // L x d final hidden states
  bool truncated = false;
};

// Token <-> id map.  Ids 0..2 are the reserved marker, mask, and
// unknown-token rows; the rest is the sorted training vocabulary.
class Vocabulary {
 public:
  Vocabulary();
  static Vocabulary build(const Dataset& dataset);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int id_of(const std::string& token) const;  // UNK for out-of-vocabulary
  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  int unk_id() const;
  int mask_id() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Graph handles for one encoded input.
struct EncoderGraph {
  Tape::NodeId h_s = -1;
  Tape::NodeId h_c = -1;
  bool truncated = false;
};

// Small pre-norm transformer: token + learned positional embeddings,
// n_layers self-attention blocks with 4x feed-forward expansion, final
// layer norm.  h_c is row 0 (the marker token) of the final hidden states.
class TransformerEncoder {
 public:
  // Declares and deterministically initializes the encoder parameter group
  // in `store`.
  TransformerEncoder(const EncoderConfig& config, Vocabulary vocab,
                     ParameterStore& store);

  EncoderGraph encode(Tape& tape, const std::vector<std::string>& tokens) const;
  EncoderOutputs encode_values(const std::vector<std::string>& tokens) const;

  const EncoderConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParameterStore& store() const { return *store_; }
  std::uint64_t truncation_count() const { return truncations_.load(); }

 private:
  std::vector<int> to_ids(const std::vector<std::string>& tokens,
                          bool* truncated) const;

  EncoderConfig config_;
  Vocabulary vocab_;
  ParameterStore* store_;
  mutable std::atomic<std::uint64_t> truncations_{0};
};

// Fills every tensor currently in `group` with the deterministic scheme:
// Glorot-uniform weights, zero biases, unit layer-norm gains.
void init_group_tensors(ParameterStore& store, ParamGroup group,
                        unsigned seed);

}  // namespace fairtext
