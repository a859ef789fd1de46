#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ensgan {

inline constexpr const char* kRocAuc = "roc_auc";
inline constexpr const char* kAccuracy = "accuracy";
inline constexpr const char* kPrecision = "precision";
inline constexpr const char* kRecall = "recall";
inline constexpr const char* kPrAuc = "pr_auc";

const std::vector<std::string>& metric_names();
bool is_metric_name(const std::string& name);

// Mann-Whitney estimate of P(score_pos > score_neg); tied pairs count 1/2.
// Throws MetricUndefinedError unless both classes are present.
double roc_auc(std::span<const int> labels, std::span<const double> scores);

// Average precision: sum over distinct score thresholds of
// (recall_k - recall_{k-1}) * precision_k. Tied scores form one threshold.
double average_precision(std::span<const int> labels, std::span<const double> scores);

// Value nullopt marks a metric that is undefined on this input (precision
// with no predicted positives).
struct MetricReport {
  std::map<std::string, std::optional<double>> values;
  std::size_t n_test = 0;
  std::size_t positives_in_test = 0;
  double threshold = 0.5;

  std::optional<double> get(const std::string& name) const;
  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& doc);
  bool operator==(const MetricReport&) const = default;
};

// Predictions are positive where score >= threshold.
MetricReport metric_suite(std::span<const int> labels, std::span<const double> scores,
                          double threshold = 0.5);

}  // namespace ensgan
