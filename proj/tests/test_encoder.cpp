#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fairtext/corpus.hpp"
#include "fairtext/encoder.hpp"
#include "fairtext/errors.hpp"

using namespace fairtext;

namespace {

Dataset tiny_dataset() {
  Dataset ds;
  ds.name = "tiny";
  ds.examples.push_back({"a", {kMarkerToken, "red", "cat", "runs"}, 1, 0, {}});
  ds.examples.push_back({"b", {kMarkerToken, "blue", "dog"}, 0, 1, {}});
  return ds;
}

EncoderConfig small_config(const Vocabulary& vocab) {
  EncoderConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.dim = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.max_len = 6;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  EncoderConfig cfg;
  cfg.vocab_size = 10;
  cfg.dim = 8;
  cfg.n_heads = 3;  // does not divide 8
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg.n_heads = 2;
  CHECK_NOTHROW(cfg.validate());
  cfg.max_len = 1;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg.max_len = 32;
  cfg.n_layers = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg.n_layers = 2;
  cfg.vocab_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("vocabulary build, reserved ids, and UNK fallback") {
  Vocabulary vocab = Vocabulary::build(tiny_dataset());
  CHECK(vocab.token_of(0) == kMarkerToken);
  CHECK(vocab.token_of(1) == kMaskToken);
  CHECK(vocab.token_of(2) == kUnkToken);
  CHECK(vocab.id_of(kMarkerToken) == 0);
  CHECK(vocab.mask_id() == 1);
  CHECK(vocab.unk_id() == 2);

  // 3 reserved + {blue, cat, dog, red, runs}
  CHECK(vocab.size() == 8);
  // sorted training tokens after the reserved block
  std::vector<std::string> tail(vocab.tokens().begin() + 3,
                                vocab.tokens().end());
  CHECK(std::is_sorted(tail.begin(), tail.end()));
  CHECK(vocab.id_of("zebra") == vocab.unk_id());

  Vocabulary rt = Vocabulary::from_tokens(vocab.tokens());
  CHECK(rt.tokens() == vocab.tokens());
  CHECK(rt.id_of("dog") == vocab.id_of("dog"));
}

TEST_CASE("initialization is deterministic in the seed") {
  Vocabulary vocab = Vocabulary::build(tiny_dataset());
  EncoderConfig cfg = small_config(vocab);

  ParameterStore s1, s2, s3;
  TransformerEncoder e1(cfg, vocab, s1);
  TransformerEncoder e2(cfg, vocab, s2);
  EncoderConfig other = cfg;
  other.seed = 6;
  TransformerEncoder e3(other, vocab, s3);

  CHECK(s1.group_hash(ParamGroup::kEncoder) ==
        s2.group_hash(ParamGroup::kEncoder));
  CHECK(s1.group_hash(ParamGroup::kEncoder) !=
        s3.group_hash(ParamGroup::kEncoder));
}

TEST_CASE("parameter count matches the closed form") {
  Vocabulary vocab = Vocabulary::build(tiny_dataset());
  EncoderConfig cfg = small_config(vocab);
  cfg.dim = 16;
  cfg.n_heads = 4;
  cfg.n_layers = 1;
  ParameterStore store;
  TransformerEncoder enc(cfg, vocab, store);

  const std::size_t v = static_cast<std::size_t>(vocab.size());
  const std::size_t d = 16, L = static_cast<std::size_t>(cfg.max_len);
  // embeddings + per-block (2 layer norms, q/k/v/o projections with biases,
  // 4x feed-forward) + final layer norm
  std::size_t expected = v * d + L * d;
  expected += cfg.n_layers * (2 * d + 2 * d +             // ln gains/biases
                              4 * (d * d + d) +           // wq/wk/wv/wo + biases
                              d * 4 * d + 4 * d +         // ff in
                              4 * d * d + d);             // ff out
  expected += 2 * d;  // final layer norm
  CHECK(store.parameter_count(ParamGroup::kEncoder) == expected);
  CHECK(store.parameter_count() == expected);
}

TEST_CASE("shape contract for every admissible length") {
  Vocabulary vocab = Vocabulary::build(tiny_dataset());
  EncoderConfig cfg = small_config(vocab);
  ParameterStore store;
  TransformerEncoder enc(cfg, vocab, store);

  std::vector<std::string> pool = {"red", "cat", "runs", "blue", "dog"};
  for (int len = 1; len <= cfg.max_len; ++len) {
    std::vector<std::string> tokens = {kMarkerToken};
    for (int i = 1; i < len; ++i) tokens.push_back(pool[i % pool.size()]);
    EncoderOutputs out = enc.encode_values(tokens);
    CHECK(out.h_s.rows() == len);
    CHECK(out.h_s.cols() == cfg.dim);
    CHECK(out.h_c.size() == cfg.dim);
    CHECK(!out.truncated);
    CHECK(out.h_c.allFinite());
    CHECK(out.h_s.allFinite());
    // h_c is exactly the marker row of h_s
    CHECK((out.h_c - out.h_s.row(0)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("encode is deterministic and position-sensitive") {
  Vocabulary vocab = Vocabulary::build(tiny_dataset());
  EncoderConfig cfg = small_config(vocab);
  ParameterStore store;
  TransformerEncoder enc(cfg, vocab, store);

  std::vector<std::string> tokens = {kMarkerToken, "red", "cat", "dog"};
  EncoderOutputs a = enc.encode_values(tokens);
  EncoderOutputs b = enc.encode_values(tokens);
  CHECK((a.h_c - b.h_c).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.h_s - b.h_s).cwiseAbs().maxCoeff() == 0.0);

  std::vector<std::string> permuted = {kMarkerToken, "cat", "dog", "red"};
  EncoderOutputs p = enc.encode_values(permuted);
  CHECK((a.h_c - p.h_c).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("unknown tokens map onto the reserved UNK embedding") {
  Vocabulary vocab = Vocabulary::build(tiny_dataset());
  EncoderConfig cfg = small_config(vocab);
  ParameterStore store;
  TransformerEncoder enc(cfg, vocab, store);

  EncoderOutputs oov = enc.encode_values({kMarkerToken, "zebra", "cat"});
  EncoderOutputs unk = enc.encode_values({kMarkerToken, kUnkToken, "cat"});
  CHECK((oov.h_c - unk.h_c).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("overlong inputs truncate loudly, never silently") {
  Vocabulary vocab = Vocabulary::build(tiny_dataset());
  EncoderConfig cfg = small_config(vocab);  // max_len 6
  ParameterStore store;
  TransformerEncoder enc(cfg, vocab, store);

  std::vector<std::string> tokens = {kMarkerToken};
  for (int i = 0; i < 10; ++i) tokens.push_back("cat");
  CHECK(enc.truncation_count() == 0);
  EncoderOutputs out = enc.encode_values(tokens);
  CHECK(out.truncated);
  CHECK(out.h_s.rows() == cfg.max_len);
  CHECK(enc.truncation_count() == 1);

  std::vector<std::string> head(tokens.begin(), tokens.begin() + cfg.max_len);
  EncoderOutputs exact = enc.encode_values(head);
  CHECK(!exact.truncated);
  CHECK((out.h_c - exact.h_c).cwiseAbs().maxCoeff() == 0.0);
  CHECK(enc.truncation_count() == 1);
}

TEST_CASE("encoder gradients agree with central finite differences") {
  Vocabulary vocab = Vocabulary::build(tiny_dataset());
  EncoderConfig cfg = small_config(vocab);
  ParameterStore store;
  TransformerEncoder enc(cfg, vocab, store);
  std::vector<std::string> tokens = {kMarkerToken, "red", "cat", "dog"};

  auto loss = [&](Tape& t) {
    EncoderGraph g = enc.encode(t, tokens);
    return t.sum(t.square(g.h_c));
  };

  store.zero_grads();
  {
    Tape t;
    t.backward(loss(t));
  }

  const double step = 1e-4;
  std::mt19937 rng(17);
  for (auto& tensor : store.tensors()) {
    // sample a handful of coordinates from every tensor
    std::uniform_int_distribution<Eigen::Index> ri(0, tensor.value.rows() - 1);
    std::uniform_int_distribution<Eigen::Index> ci(0, tensor.value.cols() - 1);
    for (int rep = 0; rep < 4; ++rep) {
      Eigen::Index i = ri(rng), j = ci(rng);
      double saved = tensor.value(i, j);
      tensor.value(i, j) = saved + step;
      Tape tp;
      double up = tp.scalar(loss(tp));
      tensor.value(i, j) = saved - step;
      Tape tm;
      double down = tm.scalar(loss(tm));
      tensor.value(i, j) = saved;
      double fd = (up - down) / (2.0 * step);
      double analytic = tensor.grad(i, j);
      // The floor absorbs finite-difference noise on coordinates whose true
      // gradient vanishes (e.g. key biases, which cancel inside softmax).
      double denom = std::max({std::abs(fd), std::abs(analytic), 1e-2});
      INFO(tensor.name << "(" << i << "," << j << ")");
      CHECK(std::abs(fd - analytic) / denom < 1e-4);
    }
  }
}
