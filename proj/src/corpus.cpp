#include "fairtext/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "fairtext/errors.hpp"

namespace fairtext {

using nlohmann::json;

void IdentityLexicon::add_pair(const std::string& a, const std::string& b) {
  if (a.empty() || b.empty()) {
    throw ParameterError("lexicon terms must be non-empty");
  }
  if (a == b) throw ParameterError("lexicon pair maps term to itself: " + a);
  if (counterpart_.count(a) || counterpart_.count(b)) {
    throw ParameterError("lexicon term appears in more than one pair: " +
                         (counterpart_.count(a) ? a : b));
  }
  pairs_.emplace_back(a, b);
  counterpart_[a] = b;
  counterpart_[b] = a;
  group_[a] = 0;
  group_[b] = 1;
}

std::optional<std::string> IdentityLexicon::counterpart(
    const std::string& term) const {
  auto it = counterpart_.find(term);
  if (it == counterpart_.end()) return std::nullopt;
  return it->second;
}

bool IdentityLexicon::contains(const std::string& term) const {
  return counterpart_.count(term) > 0;
}

std::optional<int> IdentityLexicon::group_of(const std::string& term) const {
  auto it = group_.find(term);
  if (it == group_.end()) return std::nullopt;
  return it->second;
}

IdentityLexicon IdentityLexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon file: " + path);
  IdentityLexicon lex;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError("lexicon " + path + " line " + std::to_string(line_no) +
                        ": " + e.what());
    }
    if (!rec.contains("a") || !rec.contains("b") || !rec["a"].is_string() ||
        !rec["b"].is_string()) {
      throw FormatError("lexicon " + path + " line " + std::to_string(line_no) +
                        ": expected string keys \"a\" and \"b\"");
    }
    lex.add_pair(rec["a"].get<std::string>(), rec["b"].get<std::string>());
  }
  return lex;
}

IdentityLexicon IdentityLexicon::default_gender() {
  IdentityLexicon lex;
  lex.add_pair("he", "she");
  lex.add_pair("him", "her");
  lex.add_pair("his", "hers");
  lex.add_pair("himself", "herself");
  lex.add_pair("man", "woman");
  lex.add_pair("men", "women");
  lex.add_pair("male", "female");
  lex.add_pair("boy", "girl");
  lex.add_pair("boys", "girls");
  lex.add_pair("father", "mother");
  lex.add_pair("son", "daughter");
  lex.add_pair("husband", "wife");
  return lex;
}

void Dataset::validate() const {
  std::unordered_set<std::string> ids;
  for (const auto& ex : examples) {
    if (ex.id.empty()) throw FormatError("example with empty id");
    if (!ids.insert(ex.id).second) {
      throw FormatError("duplicate example id: " + ex.id);
    }
    if (ex.tokens.empty()) throw FormatError("example has no tokens: " + ex.id);
    for (const auto& t : ex.tokens) {
      if (t.empty()) throw FormatError("empty token in example: " + ex.id);
    }
    if (ex.y != 0 && ex.y != 1) {
      throw FormatError("label outside {0,1} in example: " + ex.id);
    }
    if (ex.z != 0 && ex.z != 1) {
      throw FormatError("sensitive label outside {0,1} in example: " + ex.id);
    }
    if (ex.counterfactual_of && *ex.counterfactual_of == ex.id) {
      throw FormatError("example is its own counterfactual: " + ex.id);
    }
  }
  for (const auto& ex : examples) {
    if (ex.counterfactual_of && !ids.count(*ex.counterfactual_of)) {
      throw FormatError("unresolved counterfactual_of in example: " + ex.id);
    }
  }
}

Dataset load_dataset(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);
  Dataset ds;
  ds.name = path;
  ds.split = split;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError("dataset " + path + " line " + std::to_string(line_no) +
                        ": " + e.what());
    }
    auto context = path + " line " + std::to_string(line_no);
    if (!rec.contains("id") || !rec["id"].is_string()) {
      throw FormatError("missing string \"id\" at " + context);
    }
    LabeledExample ex;
    ex.id = rec["id"].get<std::string>();
    if (!rec.contains("text") || !rec["text"].is_string()) {
      throw FormatError("missing string \"text\" in record " + ex.id);
    }
    ex.tokens = tokenize(rec["text"].get<std::string>());
    auto read_label = [&](const char* key) {
      if (!rec.contains(key) || !rec[key].is_number_integer()) {
        throw FormatError(std::string("missing integer \"") + key +
                          "\" in record " + ex.id);
      }
      int v = rec[key].get<int>();
      if (v != 0 && v != 1) {
        throw FormatError(std::string("\"") + key + "\" outside {0,1} in record " +
                          ex.id);
      }
      return v;
    };
    ex.y = read_label("label");
    ex.z = read_label("sensitive");
    if (rec.contains("counterfactual_of")) {
      ex.counterfactual_of = rec["counterfactual_of"].get<std::string>();
    }
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file: " + path);
  for (const auto& ex : dataset.examples) {
    json rec{{"id", ex.id},
             {"text", detokenize(ex.tokens)},
             {"label", ex.y},
             {"sensitive", ex.z}};
    if (ex.counterfactual_of) rec["counterfactual_of"] = *ex.counterfactual_of;
    out << rec.dump() << "\n";
  }
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens{kMarkerToken};
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      tokens.push_back(word);
      word.clear();
    }
  };
  for (char ch : text) {
    auto uc = static_cast<unsigned char>(ch);
    if (std::isalnum(uc) || uc >= 0x80) {
      word.push_back(static_cast<char>(std::tolower(uc)));
    } else if (std::isspace(uc)) {
      flush();
    } else {
      flush();
      tokens.push_back(std::string(1, ch));
    }
  }
  flush();
  return tokens;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (t == kMarkerToken) continue;
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

std::vector<std::string> swap_identity_terms(
    const std::vector<std::string>& tokens, const IdentityLexicon& lexicon) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto cp = lexicon.counterpart(t);
    out.push_back(cp ? *cp : t);
  }
  return out;
}

std::vector<std::string> mask_identity_terms(
    const std::vector<std::string>& tokens, const IdentityLexicon& lexicon) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    out.push_back(lexicon.contains(t) ? kMaskToken : t);
  }
  return out;
}

namespace {
bool has_lexicon_term(const std::vector<std::string>& tokens,
                      const IdentityLexicon& lexicon) {
  return std::any_of(tokens.begin(), tokens.end(),
                     [&](const std::string& t) { return lexicon.contains(t); });
}
}  // namespace

Dataset counterfactual_augment(const Dataset& dataset,
                               const IdentityLexicon& lexicon) {
  Dataset out = dataset;
  for (const auto& ex : dataset.examples) {
    if (!has_lexicon_term(ex.tokens, lexicon)) continue;
    LabeledExample cf;
    cf.id = ex.id + "~cf";
    cf.tokens = swap_identity_terms(ex.tokens, lexicon);
    cf.y = ex.y;
    cf.z = 1 - ex.z;
    cf.counterfactual_of = ex.id;
    out.examples.push_back(std::move(cf));
  }
  out.validate();
  return out;
}

std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
counterfactual_pairs(const Dataset& dataset, const IdentityLexicon& lexicon) {
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
      pairs;
  for (const auto& ex : dataset.examples) {
    if (ex.counterfactual_of) continue;  // already someone's counterfactual
    if (!has_lexicon_term(ex.tokens, lexicon)) continue;
    pairs.emplace_back(ex.tokens, swap_identity_terms(ex.tokens, lexicon));
  }
  return pairs;
}

IdentityLexicon synthetic_lexicon() {
  IdentityLexicon lex;
  lex.add_pair("he", "she");
  return lex;
}

Dataset make_synthetic_biased_corpus(int vocab_size, int n_examples,
                                     double bias_rate, unsigned seed) {
  if (bias_rate < 0.0 || bias_rate > 1.0) {
    throw ParameterError("bias_rate must lie in [0,1]");
  }
  if (n_examples < 1) throw ParameterError("n_examples must be positive");
  constexpr int kSignalPerClass = 8;
  constexpr int kFillerPerExample = 5;
  const int reserved = 3 + 2 + 2 * kSignalPerClass;  // specials, identity, signals
  if (vocab_size < reserved + 1) {
    throw ParameterError("vocab_size too small for the synthetic template");
  }
  const int n_filler = vocab_size - reserved;

  std::vector<std::string> pos_signals, neg_signals, fillers;
  for (int i = 0; i < kSignalPerClass; ++i) {
    pos_signals.push_back("pos" + std::to_string(i));
    neg_signals.push_back("neg" + std::to_string(i));
  }
  for (int i = 0; i < n_filler; ++i) {
    fillers.push_back("w" + std::to_string(i));
  }
  const std::string identity[2] = {"he", "she"};

  std::mt19937 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution aligned(bias_rate);
  std::uniform_int_distribution<int> pick_signal(0, kSignalPerClass - 1);
  std::uniform_int_distribution<int> pick_filler(0, n_filler - 1);

  Dataset ds;
  ds.name = "synthetic";
  for (int i = 0; i < n_examples; ++i) {
    LabeledExample ex;
    ex.id = "syn-" + std::to_string(i);
    ex.y = coin(rng) ? 1 : 0;
    // g(y) = y: the b-side identity term marks group 1.
    ex.z = aligned(rng) ? ex.y : 1 - ex.y;
    std::vector<std::string> body;
    body.push_back(ex.y == 1 ? pos_signals[pick_signal(rng)]
                             : neg_signals[pick_signal(rng)]);
    body.push_back(identity[ex.z]);
    for (int k = 0; k < kFillerPerExample; ++k) {
      body.push_back(fillers[pick_filler(rng)]);
    }
    std::shuffle(body.begin(), body.end(), rng);
    ex.tokens.push_back(kMarkerToken);
    ex.tokens.insert(ex.tokens.end(), body.begin(), body.end());
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();
  return ds;
}

}  // namespace fairtext
