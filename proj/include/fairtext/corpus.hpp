#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace fairtext {

// Reserved tokens.  User text is lowercased and punctuation-split before
// lookup, so none of these can collide with a real input token.
inline constexpr const char* kMarkerToken = "[CLS]";
inline constexpr const char* kMaskToken = "[MASK]";
inline constexpr const char* kUnkToken = "[UNK]";

struct LabeledExample {
  std::string id;
  std::vector<std::string> tokens;  // marker token first
  int y = 0;                        // task label, {0,1}
  int z = 0;                        // sensitive-group label, {0,1}
  std::optional<std::string> counterfactual_of;
};

// Symmetric pairs of single-token identity terms; side a is group z=0,
// side b is group z=1.
class IdentityLexicon {
 public:
  void add_pair(const std::string& a, const std::string& b);
  // Paired counterpart of `term`, or nullopt if not a lexicon term.
  std::optional<std::string> counterpart(const std::string& term) const;
  bool contains(const std::string& term) const;
  // 0 if `term` is an a-side term, 1 if b-side, nullopt otherwise.
  std::optional<int> group_of(const std::string& term) const;
  std::size_t size() const { return pairs_.size(); }
  const std::vector<std::pair<std::string, std::string>>& pairs() const {
    return pairs_;
  }

  static IdentityLexicon load(const std::string& path);
  // Twelve gender pairs; used when no lexicon file is given.
  static IdentityLexicon default_gender();

 private:
  std::vector<std::pair<std::string, std::string>> pairs_;
  std::unordered_map<std::string, std::string> counterpart_;
  std::unordered_map<std::string, int> group_;
};

enum class Split { kTrain, kTest };

struct Dataset {
  std::string name;
  std::vector<LabeledExample> examples;
  Split split = Split::kTrain;

  void validate() const;  // unique ids, labels in range, resolvable refs
};

// JSON Lines loader; keys "id", "text", "label", "sensitive".
Dataset load_dataset(const std::string& path, Split split);
void save_dataset(const Dataset& dataset, const std::string& path);

// Lowercased, punctuation-separated word tokens with the marker prepended.
std::vector<std::string> tokenize(const std::string& text);
// Inverse convenience for display; drops the marker.
std::string detokenize(const std::vector<std::string>& tokens);

std::vector<std::string> swap_identity_terms(
    const std::vector<std::string>& tokens, const IdentityLexicon& lexicon);
std::vector<std::string> mask_identity_terms(
    const std::vector<std::string>& tokens, const IdentityLexicon& lexicon);

// Adds, for every example containing at least one lexicon term, a copy with
// swapped terms, flipped z, preserved y, and counterfactual_of set.
Dataset counterfactual_augment(const Dataset& dataset,
                               const IdentityLexicon& lexicon);

// (original tokens, counterfactual tokens) pairs as produced by
// counterfactual_augment; originals without lexicon terms contribute none.
std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
counterfactual_pairs(const Dataset& dataset, const IdentityLexicon& lexicon);

// Synthetic corpus with a tunable spurious y<->z correlation.  Each example
// carries one class-signal token that determines y and one identity token;
// the identity token's group is g(y) with probability bias_rate and the
// opposite group otherwise, so bias_rate=0.5 makes y and z independent and
// bias_rate=1.0 makes them perfectly correlated.  z is the group of the
// inserted identity token.
Dataset make_synthetic_biased_corpus(int vocab_size, int n_examples,
                                     double bias_rate, unsigned seed);

// The identity pair used by the synthetic corpus generator.
IdentityLexicon synthetic_lexicon();

}  // namespace fairtext
