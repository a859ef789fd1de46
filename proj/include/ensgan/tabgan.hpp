#pragma once

// Conditional tabular GAN for one subpopulation's training rows.
//
// Continuous columns are encoded by mode-specific normalisation: a 1-D
// Gaussian mixture is fitted per column, each value is assigned a mode drawn
// from its posterior, and represented as (alpha, one-hot mode) with
// alpha = (v - mean_k) / (4 std_k). Categorical columns are one-hot.
// A conditional vector selects one category of one discrete column per
// sample (training-by-sampling with log-frequency weights); the generator
// is penalised by cross-entropy when its output for that column disagrees.
// The discriminator takes k updates per generator update and scores packs of
// `pac` samples at once, which discourages mode collapse.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ensgan/dataset.hpp"
#include "ensgan/nn.hpp"
#include "json.hpp"

namespace ensgan {

struct GanConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 50;
  double gen_lr = 2e-4;
  double dis_lr = 2e-6;
  std::size_t dis_steps = 5;
  // Samples per discriminator input; the batch is rounded down to a multiple.
  std::size_t pac = 10;
  std::size_t latent_dim = 128;
  std::size_t hidden_dim = 256;
  std::size_t mixture_modes = 10;
  double gumbel_tau = 0.2;
  // Include the outcome label among the conditioned discrete columns.
  bool condition_on_label = true;
  // Clamp generated continuous values to the training range.
  bool clip_to_training_range = true;
  std::uint64_t seed = 0;

  void validate() const;
  static GanConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct ModeTransform {
  std::size_t column = 0;
  std::vector<double> means;
  std::vector<double> stds;
  std::vector<double> weights;
  double min = 0.0;
  double max = 0.0;
};

struct DiscreteTransform {
  std::size_t column = 0;
  std::vector<int> codes;  // dataset codes present in training data
  std::vector<double> frequencies;
  bool conditioned = true;
};

struct LossRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double dis_loss = 0.0;
  double gen_loss = 0.0;
};

// Fits a Gaussian mixture with at most max_modes components to 1-D data by
// EM, seeded at quantiles. Components with weight < 0.005 are dropped.
ModeTransform fit_mode_transform(std::span<const double> values, std::size_t max_modes);

class GeneratorModel {
 public:
  const Schema& schema() const { return schema_; }
  const CategoryTables& categories() const { return categories_; }
  std::string fingerprint() const { return schema_.fingerprint(); }
  const GanConfig& config() const { return config_; }
  const std::vector<ModeTransform>& continuous_transforms() const { return continuous_; }
  const std::vector<DiscreteTransform>& discrete_transforms() const { return discrete_; }
  const std::vector<LossRecord>& loss_trace() const { return loss_trace_; }
  std::size_t training_rows() const { return training_rows_; }
  const std::string& training_source() const { return training_source_; }

  // Delimited text: epoch,step,dis_loss,gen_loss
  std::string loss_trace_csv() const;

 private:
  friend GeneratorModel fit_generator(const Dataset&, const GanConfig&);
  friend Dataset generate(const GeneratorModel&, long long, std::uint64_t);
  friend void save_generator(const GeneratorModel&, const std::filesystem::path&);
  friend GeneratorModel load_generator(const std::filesystem::path&);

  Schema schema_;
  CategoryTables categories_;
  GanConfig config_;
  std::vector<ModeTransform> continuous_;
  std::vector<DiscreteTransform> discrete_;
  nn::ResidualGenerator generator_;
  std::vector<LossRecord> loss_trace_;
  std::size_t training_rows_ = 0;
  std::string training_source_;
};

class TrainingDivergenceError : public TrainingError {
 public:
  TrainingDivergenceError(const std::string& what, std::vector<LossRecord> trace)
      : TrainingError(what), trace_(std::move(trace)) {}
  const std::vector<LossRecord>& loss_trace() const { return trace_; }

 private:
  std::vector<LossRecord> trace_;
};

// Trains on every row of `train_sp`. Refuses datasets tagged as a test split.
GeneratorModel fit_generator(const Dataset& train_sp, const GanConfig& cfg);

// Exactly n rows in the model's schema and code tables; ids are synthetic.
Dataset generate(const GeneratorModel& model, long long n, std::uint64_t seed);

void save_generator(const GeneratorModel& model, const std::filesystem::path& path);
GeneratorModel load_generator(const std::filesystem::path& path);
// As above, and raises ArtifactError unless the stored schema fingerprint
// equals expected.fingerprint().
GeneratorModel load_generator(const std::filesystem::path& path, const Schema& expected);

}  // namespace ensgan
