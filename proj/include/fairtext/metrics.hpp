#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fairtext/corpus.hpp"

namespace fairtext {

struct PredictionRecord {
  std::string id;
  int y_hat = 0;
  int y = 0;
  int z = 0;
};

// Per-model metric values; aggregation across seeds adds mean/std.
struct MetricValues {
  double acc = 0.0;
  double dpd = 0.0;
  double eod = 0.0;
  double dir = 0.0;
  double ctf = 0.0;
};

struct MetricsReport {
  std::vector<MetricValues> per_seed;
  MetricValues mean;
  MetricValues stddev;  // population standard deviation over seeds
};

double accuracy(const std::vector<PredictionRecord>& records);
// |P(y_hat=1 | z=0) - P(y_hat=1 | z=1)|
double dpd(const std::vector<PredictionRecord>& records);
// |TPR(z=0) - TPR(z=1)|
double eod(const std::vector<PredictionRecord>& records);
// min(p0,p1)/max(p0,p1); 1.0 when both group rates are zero, 0.0 when
// exactly one is zero.
double dir(const std::vector<PredictionRecord>& records);

using PredictFn = std::function<int(const std::vector<std::string>&)>;
using TokenPair = std::pair<std::vector<std::string>, std::vector<std::string>>;

// Fraction of counterfactual pairs receiving identical predictions.
double ctf(const PredictFn& predict, const std::vector<TokenPair>& pairs);

MetricsReport aggregate_seeds(const std::vector<MetricValues>& per_seed);

void save_predictions(const std::vector<PredictionRecord>& records,
                      const std::string& path);
std::vector<PredictionRecord> load_predictions(const std::string& path);

}  // namespace fairtext
