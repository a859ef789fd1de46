#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "ensgan/cohort_sim.hpp"
#include "ensgan/common.hpp"
#include "ensgan/dataset.hpp"

namespace testing_support {

using namespace ensgan;

// Columns f0..f{n_cont-1} (continuous), "cat" (categorical, optional),
// "pm" (population marker), "y" (label).
inline Schema toy_schema(std::size_t n_cont, bool with_cat = false) {
  std::vector<ColumnSpec> cols;
  for (std::size_t j = 0; j < n_cont; ++j) {
    cols.push_back({"f" + std::to_string(j), ColumnKind::kContinuous, ColumnRole::kFeature});
  }
  if (with_cat) cols.push_back({"cat", ColumnKind::kCategorical, ColumnRole::kFeature});
  cols.push_back({"pm", ColumnKind::kCategorical, ColumnRole::kPopulationMarker});
  cols.push_back({"y", ColumnKind::kCategorical, ColumnRole::kLabel});
  return Schema(cols);
}

struct ToyRow {
  std::vector<double> x;
  int cat = 0;
  int pm = 0;
  int y = 0;
};

inline Dataset toy_dataset(const std::vector<ToyRow>& rows, std::size_t n_cont, bool with_cat,
                           std::size_t n_pm, std::size_t n_cat = 3,
                           const std::string& provenance = "toy") {
  CategoryTables tables(n_cont + (with_cat ? 1 : 0) + 2);
  if (with_cat) {
    for (std::size_t c = 0; c < n_cat; ++c) tables[n_cont].push_back("k" + std::to_string(c));
  }
  for (std::size_t p = 0; p < n_pm; ++p) tables[tables.size() - 2].push_back("P" + std::to_string(p));
  tables.back() = {"0", "1"};
  Dataset d(toy_schema(n_cont, with_cat), tables, provenance);
  RowId id = 0;
  for (const auto& r : rows) {
    std::vector<double> v = r.x;
    if (with_cat) v.push_back(r.cat);
    v.push_back(r.pm);
    v.push_back(r.y);
    d.append_row(v, id++);
  }
  return d;
}

// Random toy data: features N(0,1) shifted by pm, label from a logistic
// concept on f0.
inline Dataset random_toy(Rng& rng, std::size_t n, std::size_t n_cont, std::size_t n_pm,
                          bool with_cat = false, double signal = 2.0) {
  std::vector<ToyRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    ToyRow r;
    r.pm = static_cast<int>(rng.index(n_pm));
    for (std::size_t j = 0; j < n_cont; ++j) r.x.push_back(rng.normal() + 0.3 * r.pm);
    r.cat = static_cast<int>(rng.index(3));
    r.y = rng.bernoulli(sigmoid(signal * (n_cont ? r.x[0] : 0.0))) ? 1 : 0;
    rows.push_back(r);
  }
  return toy_dataset(rows, n_cont, with_cat, n_pm);
}

// Two-subpopulation simulator config with a shared logistic concept.
inline SimConfig two_group_sim(std::size_t major, std::size_t minor, std::uint64_t seed) {
  SimConfig c;
  c.n_continuous = 2;
  c.concept_weights = {1.0, -1.0};
  c.concept_bias = 0.0;
  c.seed = seed;
  c.subpops.push_back({"A", major, {0.0, 0.0}, {1.0, 1.0}, std::nullopt, std::nullopt});
  c.subpops.push_back({"B", minor, {1.0, -0.5}, {1.0, 1.0}, std::nullopt, std::nullopt});
  CategoricalSpec cat;
  cat.levels = 3;
  cat.probabilities["A"] = {0.5, 0.3, 0.2};
  cat.probabilities["B"] = {0.2, 0.3, 0.5};
  cat.effects = {0.0, 0.5, -0.5};
  c.categoricals.push_back(cat);
  return c;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("ensgan_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_support
