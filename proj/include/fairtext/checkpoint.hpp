#pragma once

#include <memory>
#include <string>

#include "fairtext/baselines.hpp"
#include "fairtext/debias.hpp"

namespace fairtext {

inline constexpr const char* kCheckpointFormat = "fairtext-checkpoint";
inline constexpr int kCheckpointVersion = 1;

// A loaded model of either family.
struct Checkpoint {
  std::string kind;  // "fairberts", "vanilla", "ftu1", "ftu2", "clp"
  std::unique_ptr<DebiasModel> debias;
  std::unique_ptr<BaselineModel> baseline;

  bool is_debias() const { return debias != nullptr; }
  Prediction predict(const std::vector<std::string>& tokens) const;
  const TransformerEncoder& encoder() const;
  int dim() const;
};

void save_checkpoint(const DebiasModel& model, const std::string& path);
void save_checkpoint(const BaselineModel& model, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fairtext
