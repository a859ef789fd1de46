#pragma once

// Baseline rebalancers keyed on a categorical class column (the population
// marker in the comparison protocol).

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ensgan/dataset.hpp"
#include "json.hpp"

namespace ensgan {

enum class ResampleMethod { kSmote, kRus };

struct ResampleReport {
  std::map<std::string, std::size_t> before;
  std::map<std::string, std::size_t> after;
  ResampleMethod method = ResampleMethod::kSmote;
  std::size_t k_neighbors = 0;  // SMOTE only
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

// Parent and neighbor row indices (into the input dataset) and the
// interpolation weight of one synthetic SMOTE row.
struct SmoteLineage {
  std::size_t parent = 0;
  std::size_t neighbor = 0;
  double lambda = 0.0;
};

struct SmoteResult {
  Dataset data;  // input rows first, synthetic rows appended
  ResampleReport report;
  std::vector<SmoteLineage> lineage;  // one per synthetic row, in order
};

inline constexpr std::size_t kDefaultSmoteNeighbors = 5;

// Oversamples every class up to the majority count. Neighbors are found by
// Euclidean distance on continuous features standardized over the input;
// synthetic continuous values are parent + lambda * (neighbor - parent),
// categorical cells are copied from the parent.
SmoteResult smote_oversample(const Dataset& train, std::string_view class_column,
                             std::size_t k = kDefaultSmoteNeighbors, std::uint64_t seed = 0);

struct RusResult {
  Dataset data;
  ResampleReport report;
};

// "all" strategy: every class reduced to the minority count by sampling
// without replacement. Kept rows stay in input order.
RusResult random_undersample(const Dataset& d, std::string_view class_column,
                             std::uint64_t seed = 0);

}  // namespace ensgan
