#pragma once

// Pluggable synthetic-row source for the augmentation sweep. The tabular GAN
// is the production implementation; the simulator's true-distribution
// sampler plugs in through the same interface for pipeline testing.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ensgan/cohort_sim.hpp"
#include "ensgan/dataset.hpp"
#include "ensgan/tabgan.hpp"

namespace ensgan {

class SyntheticGenerator {
 public:
  virtual ~SyntheticGenerator() = default;

  // Exactly n rows, expressed in the code tables of the data it was fitted
  // on. Must be safe to call concurrently with distinct seeds.
  virtual Dataset generate(std::size_t n, std::uint64_t seed) const = 0;
  virtual std::string name() const = 0;
  // Sorted ids of the real rows this generator was fitted on.
  virtual const std::vector<RowId>& training_row_ids() const = 0;
};

using GeneratorFactory = std::function<std::shared_ptr<const SyntheticGenerator>(
    const Dataset& train_sp, const std::string& sp, std::uint64_t seed)>;

class TabGanGenerator final : public SyntheticGenerator {
 public:
  TabGanGenerator(GeneratorModel model, std::vector<RowId> training_ids);

  Dataset generate(std::size_t n, std::uint64_t seed) const override;
  std::string name() const override { return "tabgan"; }
  const std::vector<RowId>& training_row_ids() const override { return training_ids_; }
  const GeneratorModel& model() const { return model_; }

 private:
  GeneratorModel model_;
  std::vector<RowId> training_ids_;
};

// Ignores the training rows beyond recording their ids and draws from the
// simulator's true distribution for the subpopulation.
class OracleGenerator final : public SyntheticGenerator {
 public:
  OracleGenerator(SimConfig sim, std::string pm_value, CategoryTables target_tables,
                  std::vector<RowId> training_ids);

  Dataset generate(std::size_t n, std::uint64_t seed) const override;
  std::string name() const override { return "oracle"; }
  const std::vector<RowId>& training_row_ids() const override { return training_ids_; }

 private:
  SimConfig sim_;
  std::string pm_value_;
  CategoryTables tables_;
  std::vector<RowId> training_ids_;
};

// The GAN seed is the per-subpopulation seed passed in by the pipeline.
GeneratorFactory tabgan_factory(GanConfig cfg);
GeneratorFactory oracle_factory(SimConfig sim);

std::vector<RowId> sorted_real_ids(const Dataset& d);

}  // namespace ensgan
