#pragma once

// Binary outcome classifiers: gradient-boosted regression trees on the
// logistic loss (second-order leaf values, histogram split search), and an
// L2-regularised logistic regression used for fast pipeline tests.

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "ensgan/dataset.hpp"
#include "json.hpp"

namespace ensgan {

enum class PredictorKind { kGradientBoosting, kLogistic };

struct PredictorConfig {
  PredictorKind kind = PredictorKind::kGradientBoosting;
  std::size_t n_trees = 200;
  std::size_t max_depth = 3;
  double learning_rate = 0.1;
  double l2 = 1.0;
  double min_child_weight = 1.0;
  // Row subsampling per tree; 1.0 uses every row and makes the seed inert.
  double subsample = 1.0;
  std::size_t max_bins = 64;
  // Feed the population-marker code to the model alongside feature columns.
  bool include_population_marker = true;
  std::uint64_t seed = 0;

  void validate() const;
  static PredictorConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when value < threshold
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct BoostedTrees {
  double base_margin = 0.0;
  std::vector<std::vector<TreeNode>> trees;
};

struct LogisticWeights {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<double> coef;
  double intercept = 0.0;
};

struct TrainingProvenance {
  std::size_t real_rows = 0;
  std::size_t synthetic_rows = 0;
  std::string source;  // provenance string of the training dataset
  std::vector<RowId> real_row_ids;  // sorted
};

class TrainedModel {
 public:
  PredictorConfig config;
  std::string schema_fingerprint;
  std::vector<std::size_t> input_columns;
  std::variant<BoostedTrees, LogisticWeights> ensemble;
  TrainingProvenance provenance;

  double margin(std::span<const double> row) const;
};

// `context` names the subpopulation/sweep point in error messages.
TrainedModel train_classifier(const Dataset& train, const PredictorConfig& cfg,
                              const std::string& context = "");

// One P(label = 1) per row. Label cells are ignored.
std::vector<double> predict_scores(const TrainedModel& model, const Dataset& data);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace ensgan
