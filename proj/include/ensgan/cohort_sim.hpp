#pragma once

// Simulated EHR-like cohorts with known per-subpopulation distributions and
// a logistic outcome concept, so that the Bayes-optimal score is available
// in closed form.
//
// Each subpopulation draws its continuous features independently from
// N(mean_j, spread_j^2) and each categorical feature from its own level
// probabilities. The outcome is Bernoulli(sigmoid(logit)) with
//   logit = w . x + bias + sum_c effect_c[level_c] + noise_scale * N(0, 1).
// The weights and bias are shared across subpopulations unless a
// subpopulation overrides them.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ensgan/dataset.hpp"
#include "json.hpp"

namespace ensgan {

struct SubpopSpec {
  std::string pm_value;
  std::size_t size = 0;
  std::vector<double> feature_means;
  std::vector<double> feature_spreads;
  std::optional<std::vector<double>> concept_weights;
  std::optional<double> concept_bias;
};

struct CategoricalSpec {
  std::size_t levels = 2;
  // pm_value -> probability per level.
  std::map<std::string, std::vector<double>> probabilities;
  // Logit contribution per level; zeros when empty.
  std::vector<double> effects;
};

struct SimConfig {
  std::vector<SubpopSpec> subpops;
  std::size_t n_continuous = 0;
  std::vector<CategoricalSpec> categoricals;
  std::vector<double> concept_weights;
  double concept_bias = 0.0;
  double noise_scale = 0.0;
  std::uint64_t seed = 0;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;
  const SubpopSpec& subpop(const std::string& pm_value) const;

  static SimConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

inline constexpr const char* kSimPmColumn = "subpop";
inline constexpr const char* kSimLabelColumn = "outcome";

// Columns x0..x{n-1}, c0..c{m-1}, subpop, outcome.
Schema sim_schema(const SimConfig& cfg);
CategoryTables sim_category_tables(const SimConfig& cfg);

Dataset simulate_cohort(const SimConfig& cfg);

// n fresh rows from the true distribution of one subpopulation. Row ids are
// marked synthetic.
Dataset oracle_sample(const SimConfig& cfg, const std::string& pm_value, std::size_t n,
                      std::uint64_t seed);

// Noise-free logit of the concept for a row laid out as sim_schema; strictly
// monotone in the true P(outcome = 1 | x).
double true_logit(const SimConfig& cfg, const std::string& pm_value,
                  std::span<const double> row);

// ROCAUC of the true score on n_mc Monte Carlo rows (n_mc >= 10,000).
double bayes_auc(const SimConfig& cfg, const std::string& pm_value, std::size_t n_mc,
                 std::uint64_t seed);

}  // namespace ensgan
