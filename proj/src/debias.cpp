#include "fairtext/debias.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "fairtext/errors.hpp"

namespace fairtext {

void TrainConfig::validate() const {
  auto check_finite_nonneg = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ParameterError(std::string(name) + " must be finite and >= 0");
    }
  };
  check_finite_nonneg(alpha, "alpha");
  check_finite_nonneg(beta, "beta");
  check_finite_nonneg(epsilon, "epsilon");
  // Zero rates are admitted so that a zero step is a provable no-op.
  check_finite_nonneg(eta_d, "eta_d");
  check_finite_nonneg(eta_g, "eta_g");
  if (max_iters < 0) throw ParameterError("max_iters must be >= 0");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
    throw ParameterError("leaky_slope must lie in (0,1)");
  }
  if (d_steps_per_g < 1) throw ParameterError("d_steps_per_g must be >= 1");
}

double cross_entropy(const Eigen::RowVectorXd& logits, int label) {
  if (label < 0 || label >= logits.size()) {
    throw ParameterError("cross_entropy: label out of range");
  }
  double mx = logits.maxCoeff();
  double lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits(label);
}

Generator::Generator(int dim, ParameterStore& store, unsigned init_seed)
    : dim_(dim), store_(&store) {
  store.add("gen.w1", ParamGroup::kGenerator, dim, dim);
  store.add("gen.b1", ParamGroup::kGenerator, 1, dim);
  store.add("gen.w2", ParamGroup::kGenerator, dim, dim);
  store.add("gen.b2", ParamGroup::kGenerator, 1, dim);
  init_group_tensors(store, ParamGroup::kGenerator, init_seed);
}

Tape::NodeId Generator::perturbation(Tape& tape, Tape::NodeId h_s) const {
  if (tape.value(h_s).cols() != dim_) {
    throw ShapeError("generator: h_s width does not match d");
  }
  auto pooled = tape.mean_rows(h_s);
  auto hidden = tape.tanh(
      tape.add(tape.matmul(pooled, tape.param(store_->at("gen.w1"))),
               tape.param(store_->at("gen.b1"))));
  return tape.add(tape.matmul(hidden, tape.param(store_->at("gen.w2"))),
                  tape.param(store_->at("gen.b2")));
}

Discriminator::Discriminator(int dim, double leaky_slope,
                             ParameterStore& store, unsigned init_seed)
    : dim_(dim), leaky_slope_(leaky_slope), store_(&store) {
  if (dim < 2) throw ParameterError("discriminator needs dim >= 2");
  store.add("disc.w1", ParamGroup::kDiscriminator, dim, dim);
  store.add("disc.b1", ParamGroup::kDiscriminator, 1, dim);
  store.add("disc.w2", ParamGroup::kDiscriminator, dim, dim / 2);
  store.add("disc.b2", ParamGroup::kDiscriminator, 1, dim / 2);
  store.add("disc.w3", ParamGroup::kDiscriminator, dim / 2, 2);
  store.add("disc.b3", ParamGroup::kDiscriminator, 1, 2);
  init_group_tensors(store, ParamGroup::kDiscriminator, init_seed);
}

Tape::NodeId Discriminator::logits(Tape& tape, Tape::NodeId vec) const {
  if (tape.value(vec).cols() != dim_) {
    throw ShapeError("discriminator: input width does not match d");
  }
  auto h1 = tape.leaky_relu(
      tape.add(tape.matmul(vec, tape.param(store_->at("disc.w1"))),
               tape.param(store_->at("disc.b1"))),
      leaky_slope_);
  auto h2 = tape.leaky_relu(
      tape.add(tape.matmul(h1, tape.param(store_->at("disc.w2"))),
               tape.param(store_->at("disc.b2"))),
      leaky_slope_);
  return tape.add(tape.matmul(h2, tape.param(store_->at("disc.w3"))),
                  tape.param(store_->at("disc.b3")));
}

TaskHead::TaskHead(int dim, ParameterStore& store, unsigned init_seed)
    : dim_(dim), store_(&store) {
  store.add("head.w", ParamGroup::kTaskHead, dim, 2);
  store.add("head.b", ParamGroup::kTaskHead, 1, 2);
  init_group_tensors(store, ParamGroup::kTaskHead, init_seed);
}

Tape::NodeId TaskHead::logits(Tape& tape, Tape::NodeId vec) const {
  if (tape.value(vec).cols() != dim_) {
    throw ShapeError("task head: input width does not match d");
  }
  return tape.add(tape.matmul(vec, tape.param(store_->at("head.w"))),
                  tape.param(store_->at("head.b")));
}

namespace {
Tape::NodeId batch_mean(Tape& tape, const std::vector<Tape::NodeId>& terms) {
  Tape::NodeId acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) {
    acc = tape.add(acc, terms[i]);
  }
  return tape.scale(acc, 1.0 / static_cast<double>(terms.size()));
}
}  // namespace

Tape::NodeId discriminator_loss(Tape& tape, const Discriminator& d,
                                const std::vector<Tape::NodeId>& h_c_fair,
                                const std::vector<Tape::NodeId>& h_c,
                                const std::vector<int>& z, double alpha) {
  if (h_c_fair.empty() || h_c_fair.size() != h_c.size() ||
      h_c.size() != z.size()) {
    throw ParameterError("discriminator_loss: empty or mismatched batch");
  }
  std::vector<Tape::NodeId> terms;
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto fair_ce = tape.cross_entropy(d.logits(tape, h_c_fair[i]), z[i]);
    auto clean_ce = tape.cross_entropy(d.logits(tape, h_c[i]), z[i]);
    terms.push_back(tape.add(fair_ce, tape.scale(clean_ce, alpha)));
  }
  return batch_mean(tape, terms);
}

Tape::NodeId generator_fairness_loss(Tape& tape, const Discriminator& d,
                                     const std::vector<Tape::NodeId>& h_c_fair,
                                     const std::vector<int>& z) {
  if (h_c_fair.empty() || h_c_fair.size() != z.size()) {
    throw ParameterError("generator_fairness_loss: empty or mismatched batch");
  }
  std::vector<Tape::NodeId> terms;
  for (std::size_t i = 0; i < z.size(); ++i) {
    terms.push_back(tape.cross_entropy(d.logits(tape, h_c_fair[i]), z[i]));
  }
  return tape.scale(batch_mean(tape, terms), -1.0);
}

Tape::NodeId task_loss(Tape& tape, const TaskHead& f,
                       const std::vector<Tape::NodeId>& h_c_fair,
                       const std::vector<Tape::NodeId>& h_c,
                       const std::vector<int>& y, double epsilon) {
  if (h_c_fair.empty() || h_c_fair.size() != h_c.size() ||
      h_c.size() != y.size()) {
    throw ParameterError("task_loss: empty or mismatched batch");
  }
  std::vector<Tape::NodeId> terms;
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto fair_ce = tape.cross_entropy(f.logits(tape, h_c_fair[i]), y[i]);
    auto clean_ce = tape.cross_entropy(f.logits(tape, h_c[i]), y[i]);
    terms.push_back(tape.add(fair_ce, tape.scale(clean_ce, epsilon)));
  }
  return batch_mean(tape, terms);
}

double generator_total_loss(double fairness_loss, double task_loss,
                            double beta) {
  return fairness_loss + beta * task_loss;
}

BatchStream::BatchStream(std::size_t n, std::size_t batch_size, unsigned seed)
    : batch_size_(std::min(batch_size, n)), cursor_(0), rng_(seed) {
  if (n == 0) throw ParameterError("BatchStream over an empty dataset");
  order_.resize(n);
  for (std::size_t i = 0; i < n; ++i) order_[i] = i;
  std::shuffle(order_.begin(), order_.end(), rng_);
}

std::vector<std::size_t> BatchStream::next() {
  if (cursor_ + batch_size_ > order_.size()) {
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }
  std::vector<std::size_t> batch(order_.begin() + cursor_,
                                 order_.begin() + cursor_ + batch_size_);
  cursor_ += batch_size_;
  return batch;
}

DebiasModel::DebiasModel(const EncoderConfig& enc_config, Vocabulary vocab,
                         const TrainConfig& train_config)
    : encoder_(std::make_unique<TransformerEncoder>(enc_config,
                                                    std::move(vocab), store_)),
      generator_(enc_config.dim, store_,
                 static_cast<unsigned>(train_config.seed) * 2654435761u + 1),
      discriminator_(enc_config.dim, train_config.leaky_slope, store_,
                     static_cast<unsigned>(train_config.seed) * 2654435761u + 2),
      task_head_(enc_config.dim, store_,
                 static_cast<unsigned>(train_config.seed) * 2654435761u + 3),
      train_config_(train_config) {
  train_config_.validate();
}

DebiasModel::BatchGraph DebiasModel::forward_batch(
    Tape& tape, const Dataset& data,
    const std::vector<std::size_t>& batch) const {
  BatchGraph g;
  for (std::size_t idx : batch) {
    const auto& ex = data.examples.at(idx);
    EncoderGraph enc = encoder_->encode(tape, ex.tokens);
    auto delta = generator_.perturbation(tape, enc.h_s);
    g.h_c.push_back(enc.h_c);
    g.h_c_fair.push_back(tape.add(enc.h_c, delta));
  }
  return g;
}

double DebiasModel::train_step_d(const Dataset& data,
                                 const std::vector<std::size_t>& batch) {
  if (batch.empty()) throw ParameterError("train_step_d: empty batch");
  store_.zero_grads();
  Tape tape;
  BatchGraph g = forward_batch(tape, data, batch);
  std::vector<int> z;
  for (std::size_t idx : batch) z.push_back(data.examples.at(idx).z);
  auto loss = discriminator_loss(tape, discriminator_, g.h_c_fair, g.h_c, z,
                                 train_config_.alpha);
  double l_d = tape.scalar(loss);
  tape.backward(loss);
  store_.sgd_step(ParamGroup::kDiscriminator, train_config_.eta_d);
  store_.zero_grads();
  return l_d;
}

std::array<double, 3> DebiasModel::train_step_g(
    const Dataset& data, const std::vector<std::size_t>& batch) {
  if (batch.empty()) throw ParameterError("train_step_g: empty batch");
  store_.zero_grads();
  Tape tape;
  BatchGraph g = forward_batch(tape, data, batch);
  std::vector<int> y, z;
  for (std::size_t idx : batch) {
    y.push_back(data.examples.at(idx).y);
    z.push_back(data.examples.at(idx).z);
  }
  auto l_g_f = generator_fairness_loss(tape, discriminator_, g.h_c_fair, z);
  auto l_t = task_loss(tape, task_head_, g.h_c_fair, g.h_c, y,
                       train_config_.epsilon);
  auto l_g = tape.add(l_g_f, tape.scale(l_t, train_config_.beta));
  double lgf = tape.scalar(l_g_f);
  double lt = tape.scalar(l_t);
  tape.backward(l_g);
  store_.sgd_step(ParamGroup::kGenerator, train_config_.eta_g);
  store_.sgd_step(ParamGroup::kTaskHead, train_config_.eta_g);
  if (!train_config_.freeze_encoder) {
    store_.sgd_step(ParamGroup::kEncoder, train_config_.eta_g);
  }
  store_.zero_grads();
  return {generator_total_loss(lgf, lt, train_config_.beta), lgf, lt};
}

Prediction DebiasModel::predict(const std::vector<std::string>& tokens) const {
  Tape tape;
  EncoderGraph enc = encoder_->encode(tape, tokens);
  auto delta = generator_.perturbation(tape, enc.h_s);
  auto fair = tape.add(enc.h_c, delta);
  auto logits = task_head_.logits(tape, fair);
  Eigen::RowVectorXd lv = tape.value(logits).row(0);
  double mx = lv.maxCoeff();
  Eigen::ArrayXd e = (lv.array() - mx).exp().transpose();
  Eigen::ArrayXd p = e / e.sum();
  Prediction out;
  out.probs = {p(0), p(1)};
  out.y_hat = p(1) > p(0) ? 1 : 0;  // ties break toward label 0
  return out;
}

std::unique_ptr<DebiasModel> train_debias(const Dataset& dataset,
                                          const IdentityLexicon& lexicon,
                                          EncoderConfig enc_config,
                                          const TrainConfig& train_config,
                                          const ParameterStore* warm_start) {
  if (dataset.examples.empty()) {
    throw ParameterError("train_debias: empty dataset");
  }
  train_config.validate();
  Dataset augmented = counterfactual_augment(dataset, lexicon);
  Vocabulary vocab = Vocabulary::build(augmented);
  if (enc_config.vocab_size == 0) enc_config.vocab_size = vocab.size();
  auto model = std::make_unique<DebiasModel>(enc_config, std::move(vocab),
                                             train_config);
  if (warm_start != nullptr) {
    for (const auto& src : warm_start->tensors()) {
      if (src.group != ParamGroup::kEncoder &&
          src.group != ParamGroup::kTaskHead) {
        continue;
      }
      if (!model->store().contains(src.name)) continue;
      Tensor& dst = model->store().at(src.name);
      if (dst.value.rows() != src.value.rows() ||
          dst.value.cols() != src.value.cols()) {
        throw ShapeError("train_debias: warm-start tensor " + src.name +
                         " has mismatched shape");
      }
      dst.value = src.value;
    }
  }
  BatchStream batches(augmented.examples.size(),
                      static_cast<std::size_t>(train_config.batch_size),
                      static_cast<unsigned>(train_config.seed));
  for (int iter = 0; iter < train_config.max_iters; ++iter) {
    auto t0 = std::chrono::steady_clock::now();
    auto batch = batches.next();
    double l_d = 0.0;
    for (int k = 0; k < train_config.d_steps_per_g; ++k) {
      l_d = model->train_step_d(augmented, batch);
    }
    auto [l_g, l_g_f, l_t] = model->train_step_g(augmented, batch);
    (void)l_g;
    if (!std::isfinite(l_d) || !std::isfinite(l_g_f) || !std::isfinite(l_t)) {
      throw DivergenceError("non-finite loss at iteration " +
                            std::to_string(iter + 1));
    }
    auto t1 = std::chrono::steady_clock::now();
    double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    model->log().push_back(TrainLogRow{iter + 1, l_d, l_g_f, l_t, ms});
  }
  return model;
}

void write_training_log(const std::vector<TrainLogRow>& log,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log: " + path);
  out << "iteration,L_D,L_G_F,L_T,wall_ms\n";
  for (const auto& row : log) {
    out << row.iteration << "," << row.l_d << "," << row.l_g_f << ","
        << row.l_t << "," << row.wall_ms << "\n";
  }
}

}  // namespace fairtext
