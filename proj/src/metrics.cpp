#include "fairtext/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fairtext/errors.hpp"

namespace fairtext {

using nlohmann::json;

namespace {

struct GroupRates {
  double p0 = 0.0;  // P(y_hat=1 | z=0)
  double p1 = 0.0;
};

GroupRates positive_rates(const std::vector<PredictionRecord>& records) {
  int n0 = 0, n1 = 0, pos0 = 0, pos1 = 0;
  for (const auto& r : records) {
    if (r.z == 0) {
      ++n0;
      pos0 += r.y_hat;
    } else {
      ++n1;
      pos1 += r.y_hat;
    }
  }
  if (n0 == 0) throw UndefinedMetricError("no records with group z=0");
  if (n1 == 0) throw UndefinedMetricError("no records with group z=1");
  return {static_cast<double>(pos0) / n0, static_cast<double>(pos1) / n1};
}

}  // namespace

double accuracy(const std::vector<PredictionRecord>& records) {
  if (records.empty()) throw ParameterError("accuracy: no records");
  int correct = 0;
  for (const auto& r : records) correct += (r.y_hat == r.y);
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

double dpd(const std::vector<PredictionRecord>& records) {
  GroupRates rates = positive_rates(records);
  return std::abs(rates.p0 - rates.p1);
}

double eod(const std::vector<PredictionRecord>& records) {
  int n0 = 0, n1 = 0, tp0 = 0, tp1 = 0;
  for (const auto& r : records) {
    if (r.y != 1) continue;
    if (r.z == 0) {
      ++n0;
      tp0 += r.y_hat;
    } else {
      ++n1;
      tp1 += r.y_hat;
    }
  }
  if (n0 == 0) throw UndefinedMetricError("no positive records with z=0");
  if (n1 == 0) throw UndefinedMetricError("no positive records with z=1");
  return std::abs(static_cast<double>(tp0) / n0 -
                  static_cast<double>(tp1) / n1);
}

double dir(const std::vector<PredictionRecord>& records) {
  GroupRates rates = positive_rates(records);
  double lo = std::min(rates.p0, rates.p1);
  double hi = std::max(rates.p0, rates.p1);
  if (hi == 0.0) return 1.0;  // both rates zero
  return lo / hi;
}

double ctf(const PredictFn& predict, const std::vector<TokenPair>& pairs) {
  if (pairs.empty()) throw ParameterError("ctf: empty pair list");
  int held = 0;
  for (const auto& [a, b] : pairs) {
    held += (predict(a) == predict(b));
  }
  return static_cast<double>(held) / static_cast<double>(pairs.size());
}

MetricsReport aggregate_seeds(const std::vector<MetricValues>& per_seed) {
  if (per_seed.empty()) throw ParameterError("aggregate_seeds: no reports");
  MetricsReport out;
  out.per_seed = per_seed;
  const double n = static_cast<double>(per_seed.size());
  auto fields = {&MetricValues::acc, &MetricValues::dpd, &MetricValues::eod,
                 &MetricValues::dir, &MetricValues::ctf};
  for (auto field : fields) {
    double sum = 0.0;
    for (const auto& v : per_seed) sum += v.*field;
    double mean = sum / n;
    double var = 0.0;
    for (const auto& v : per_seed) var += (v.*field - mean) * (v.*field - mean);
    out.mean.*field = mean;
    out.stddev.*field = std::sqrt(var / n);
  }
  return out;
}

void save_predictions(const std::vector<PredictionRecord>& records,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write prediction file: " + path);
  for (const auto& r : records) {
    out << json{{"id", r.id}, {"y_hat", r.y_hat}, {"y", r.y}, {"z", r.z}}
               .dump()
        << "\n";
  }
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open prediction file: " + path);
  std::vector<PredictionRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError("predictions " + path + " line " +
                        std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(PredictionRecord{rec.at("id").get<std::string>(),
                                   rec.at("y_hat").get<int>(),
                                   rec.at("y").get<int>(),
                                   rec.at("z").get<int>()});
  }
  return out;
}

}  // namespace fairtext
