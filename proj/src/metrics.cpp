#include "ensgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ensgan/common.hpp"

namespace ensgan {
namespace {

void check_inputs(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw DataError("labels and scores differ in length (" + std::to_string(labels.size()) +
                    " vs " + std::to_string(scores.size()) + ")");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("labels must be 0/1");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw DataError("NaN score");
  }
}

// Row indices sorted by descending score.
std::vector<std::size_t> order_desc(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{kRocAuc, kAccuracy, kPrecision, kRecall, kPrAuc};
  return names;
}

bool is_metric_name(const std::string& name) {
  const auto& n = metric_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

double roc_auc(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels, scores);
  const auto positives =
      static_cast<std::uint64_t>(std::count(labels.begin(), labels.end(), 1));
  const std::uint64_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricUndefinedError("ROCAUC needs both classes (positives=" +
                               std::to_string(positives) +
                               ", negatives=" + std::to_string(negatives) + ")");
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the number of correctly ordered pairs, counted exactly in integers.
  std::uint64_t twice_correct = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1 ? pos : neg) += 1;
      ++j;
    }
    twice_correct += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    i = j;
  }
  return static_cast<double>(twice_correct) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double average_precision(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels, scores);
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) throw MetricUndefinedError("PRAUC needs at least one positive");
  const std::vector<std::size_t> idx = order_desc(scores);
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  std::size_t predicted = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      tp += static_cast<std::size_t>(labels[idx[j]]);
      ++predicted;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

std::optional<double> MetricReport::get(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) return std::nullopt;
  return it->second;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json v = nlohmann::json::object();
  for (const auto& [name, value] : values) {
    v[name] = value ? nlohmann::json(*value) : nlohmann::json(nullptr);
  }
  return {{"metrics", v},
          {"n_test", n_test},
          {"positives_in_test", positives_in_test},
          {"threshold", threshold}};
}

MetricReport MetricReport::from_json(const nlohmann::json& doc) {
  MetricReport r;
  for (const auto& [name, value] : doc.at("metrics").items()) {
    r.values[name] = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
  }
  r.n_test = doc.at("n_test").get<std::size_t>();
  r.positives_in_test = doc.at("positives_in_test").get<std::size_t>();
  r.threshold = doc.at("threshold").get<double>();
  return r;
}

MetricReport metric_suite(std::span<const int> labels, std::span<const double> scores,
                          double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must be in [0, 1]");
  MetricReport report;
  report.threshold = threshold;
  report.n_test = labels.size();
  report.values[kRocAuc] = roc_auc(labels, scores);

  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? tp : fn) += 1;
    } else {
      (predicted ? fp : tn) += 1;
    }
  }
  report.positives_in_test = tp + fn;
  report.values[kAccuracy] =
      static_cast<double>(tp + tn) / static_cast<double>(labels.size());
  report.values[kPrecision] =
      tp + fp == 0 ? std::nullopt
                   : std::optional<double>(static_cast<double>(tp) / static_cast<double>(tp + fp));
  report.values[kRecall] = static_cast<double>(tp) / static_cast<double>(tp + fn);
  report.values[kPrAuc] = average_precision(labels, scores);
  return report;
}

}  // namespace ensgan
