#pragma once

#include <array>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "fairtext/autodiff.hpp"
#include "fairtext/corpus.hpp"
#include "fairtext/encoder.hpp"
#include "fairtext/params.hpp"

namespace fairtext {

struct TrainConfig {
  double alpha = 1.0;    // weight of the clean-representation term in L_D
  double beta = 1.0;     // weight of the task loss inside L_G
  double epsilon = 0.1;  // weight of the clean-representation term in L_T
  double eta_d = 1e-2;   // discriminator learning rate
  double eta_g = 1e-2;   // generator-side learning rate
  int max_iters = 1000;
  int batch_size = 32;
  int seed = 0;
  double leaky_slope = 0.01;
  int d_steps_per_g = 1;        // discriminator steps per generator step
  bool freeze_encoder = false;  // keep the backbone fixed during G-steps

  void validate() const;
};

// Scalar cross-entropy: -log softmax(logits)[label].
double cross_entropy(const Eigen::RowVectorXd& logits, int label);

// Pools h_s by row mean and maps it through a 2-layer tanh MLP to an
// additive perturbation of width d.
class Generator {
 public:
  Generator(int dim, ParameterStore& store, unsigned init_seed);
  Tape::NodeId perturbation(Tape& tape, Tape::NodeId h_s) const;
  int dim() const { return dim_; }

 private:
  int dim_;
  ParameterStore* store_;
};

// Three fully connected layers (d -> d -> d/2 -> 2) with Leaky ReLU.
class Discriminator {
 public:
  Discriminator(int dim, double leaky_slope, ParameterStore& store,
                unsigned init_seed);
  Tape::NodeId logits(Tape& tape, Tape::NodeId vec) const;

 private:
  int dim_;
  double leaky_slope_;
  ParameterStore* store_;
};

// Affine map from a d-vector to two task logits.
class TaskHead {
 public:
  TaskHead(int dim, ParameterStore& store, unsigned init_seed);
  Tape::NodeId logits(Tape& tape, Tape::NodeId vec) const;

 private:
  int dim_;
  ParameterStore* store_;
};

// Graph-building loss ops.  Batches are per-example 1xd node handles.
Tape::NodeId discriminator_loss(Tape& tape, const Discriminator& d,
                                const std::vector<Tape::NodeId>& h_c_fair,
                                const std::vector<Tape::NodeId>& h_c,
                                const std::vector<int>& z, double alpha);
Tape::NodeId generator_fairness_loss(Tape& tape, const Discriminator& d,
                                     const std::vector<Tape::NodeId>& h_c_fair,
                                     const std::vector<int>& z);
Tape::NodeId task_loss(Tape& tape, const TaskHead& f,
                       const std::vector<Tape::NodeId>& h_c_fair,
                       const std::vector<Tape::NodeId>& h_c,
                       const std::vector<int>& y, double epsilon);
double generator_total_loss(double fairness_loss, double task_loss,
                            double beta);

struct TrainLogRow {
  int iteration = 0;
  double l_d = 0.0;
  double l_g_f = 0.0;
  double l_t = 0.0;
  double wall_ms = 0.0;
};

struct Prediction {
  int y_hat = 0;
  std::array<double, 2> probs{0.5, 0.5};
};

// Seeded shuffled full batches over [0, n); reshuffles at each epoch
// boundary.  Shared by the debias and baseline trainers so that methods see
// identical data order.
class BatchStream {
 public:
  BatchStream(std::size_t n, std::size_t batch_size, unsigned seed);
  std::vector<std::size_t> next();

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t cursor_;
  std::mt19937 rng_;
};

// Encoder + generator + discriminator + task head with disjoint parameter
// groups, plus the training log.
class DebiasModel {
 public:
  DebiasModel(const EncoderConfig& enc_config, Vocabulary vocab,
              const TrainConfig& train_config);

  Prediction predict(const std::vector<std::string>& tokens) const;

  // One discriminator update on the given example indices; only the
  // discriminator group changes.  Returns the logged L_D.
  double train_step_d(const Dataset& data,
                      const std::vector<std::size_t>& batch);
  // One generator-side update; the discriminator group is untouched.
  // Returns (L_G, L_G^F, L_T).
  std::array<double, 3> train_step_g(const Dataset& data,
                                     const std::vector<std::size_t>& batch);

  const TransformerEncoder& encoder() const { return *encoder_; }
  const Generator& generator() const { return generator_; }
  const Discriminator& discriminator() const { return discriminator_; }
  const TaskHead& task_head() const { return task_head_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  const TrainConfig& train_config() const { return train_config_; }
  const EncoderConfig& encoder_config() const { return encoder_->config(); }
  std::vector<TrainLogRow>& log() { return log_; }
  const std::vector<TrainLogRow>& log() const { return log_; }

 private:
  struct BatchGraph {
    std::vector<Tape::NodeId> h_c;
    std::vector<Tape::NodeId> h_c_fair;
  };
  BatchGraph forward_batch(Tape& tape, const Dataset& data,
                           const std::vector<std::size_t>& batch) const;

  ParameterStore store_;
  std::unique_ptr<TransformerEncoder> encoder_;
  Generator generator_;
  Discriminator discriminator_;
  TaskHead task_head_;
  TrainConfig train_config_;
  std::vector<TrainLogRow> log_;
};

// Algorithm: counterfactually augment, then alternate discriminator and
// generator updates for max_iters iterations over seeded shuffled batches.
// When `warm_start` is given, encoder and task-head tensors whose names and
// shapes match are copied from it before training begins — the counterpart of
// starting adversarial fine-tuning from a task-adapted checkpoint instead of
// a random one.
std::unique_ptr<DebiasModel> train_debias(
    const Dataset& dataset, const IdentityLexicon& lexicon,
    EncoderConfig enc_config, const TrainConfig& train_config,
    const ParameterStore* warm_start = nullptr);

void write_training_log(const std::vector<TrainLogRow>& log,
                        const std::string& path);

}  // namespace fairtext
