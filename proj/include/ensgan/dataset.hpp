#pragma once

// Typed tabular datasets: schema, ingestion, preprocessing, subpopulation
// partitioning and stratified splitting.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ensgan {

enum class ColumnKind { kContinuous, kCategorical };
enum class ColumnRole { kFeature, kLabel, kPopulationMarker };

std::string to_string(ColumnKind kind);
std::string to_string(ColumnRole role);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  ColumnRole role = ColumnRole::kFeature;

  bool operator==(const ColumnSpec&) const = default;
};

// Ordered column list with exactly one label and one population-marker
// column, both categorical. Validated on construction.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnSpec> columns,
                  std::optional<std::string> positive_label = std::nullopt);

  static Schema from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  const ColumnSpec& column(std::size_t i) const { return columns_.at(i); }
  std::size_t size() const { return columns_.size(); }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws SchemaError when absent.
  std::size_t index_of(std::string_view name) const;

  std::size_t label_index() const { return label_; }
  std::size_t pm_index() const { return pm_; }
  std::vector<std::size_t> feature_indices() const;

  // Category of the label column treated as the positive outcome. When unset
  // "1" is used if present, else the last category of a binary table.
  const std::optional<std::string>& positive_label() const { return positive_label_; }

  // Stable hex digest of (name, kind, role) triples.
  std::string fingerprint() const;

  bool operator==(const Schema& other) const {
    return columns_ == other.columns_ && positive_label_ == other.positive_label_;
  }

 private:
  std::vector<ColumnSpec> columns_;
  std::optional<std::string> positive_label_;
  std::size_t label_ = 0;
  std::size_t pm_ = 0;
};

using RowId = std::uint64_t;
// Rows produced by a generator or resampler carry this bit in their id, so
// they can never collide with ingested rows.
inline constexpr RowId kSyntheticRowBit = RowId{1} << 63;
inline bool is_synthetic(RowId id) { return (id & kSyntheticRowBit) != 0; }

// Per-column code tables: categories[c][code] is the category string. Empty
// for continuous columns.
using CategoryTables = std::vector<std::vector<std::string>>;

// Column-major table. Categorical cells hold integer codes into the column's
// category table; missing cells are NaN. Row ids identify rows across
// subsets, splits and resampling. Treat as immutable once built.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Schema schema, CategoryTables categories, std::string provenance);

  const Schema& schema() const { return schema_; }
  const CategoryTables& categories() const { return categories_; }
  const std::vector<std::string>& categories(std::size_t col) const {
    return categories_.at(col);
  }
  const std::string& provenance() const { return provenance_; }

  std::size_t num_rows() const { return row_ids_.size(); }
  std::size_t num_columns() const { return schema_.size(); }
  bool empty() const { return row_ids_.empty(); }

  double at(std::size_t row, std::size_t col) const { return columns_[col][row]; }
  std::span<const double> column(std::size_t col) const { return columns_.at(col); }
  std::span<const RowId> row_ids() const { return row_ids_; }
  std::vector<double> row(std::size_t r) const;

  // Category string of a categorical cell. Throws on missing cells.
  const std::string& category_at(std::size_t row, std::size_t col) const;
  std::optional<int> code_of(std::size_t col, std::string_view category) const;

  // Builder interface.
  void reserve(std::size_t rows);
  void append_row(std::span<const double> values, RowId id);

  Dataset select(std::span<const std::size_t> rows, std::string provenance) const;
  Dataset with_provenance(std::string provenance) const;
  // Rows of this followed by rows of other. Schemas and category tables must
  // match exactly.
  Dataset concat(const Dataset& other, std::string provenance) const;
  // Re-expresses categorical codes against another set of tables by category
  // name. Throws SchemaError if a category is not present in the target.
  Dataset recode_to(const CategoryTables& target) const;

  bool has_missing() const;
  std::size_t count_synthetic() const;

  // Label code treated as positive; nullopt if no category qualifies.
  std::optional<int> positive_code() const;
  // 0/1 outcome per row. Throws DataError unless the label is binary.
  std::vector<int> binary_labels() const;

  bool operator==(const Dataset& other) const = default;

 private:
  Schema schema_;
  CategoryTables categories_;
  std::string provenance_;
  std::vector<std::vector<double>> columns_;
  std::vector<RowId> row_ids_;
};

struct LoadOptions {
  char delimiter = ',';
  // Cell texts treated as missing, after trimming whitespace.
  std::vector<std::string> missing_markers{""};
};

// Schema document: {"columns": [{"name","kind","role"}...], "positive_label",
// "delimiter", "missing"}.
struct SchemaDocument {
  Schema schema;
  LoadOptions options;
};
SchemaDocument load_schema_document(const std::filesystem::path& path);
SchemaDocument parse_schema_document(const nlohmann::json& doc);
nlohmann::json schema_document_json(const Schema& schema, const LoadOptions& options);

Dataset load_dataset(const std::filesystem::path& path, const Schema& schema,
                     const LoadOptions& options = {});
Dataset parse_dataset(std::string_view text, const Schema& schema,
                      const LoadOptions& options, std::string provenance);
std::string format_dataset(const Dataset& d, char delimiter = ',');
void save_dataset(const Dataset& d, const std::filesystem::path& path, char delimiter = ',');

// Drops rows with any missing cell and re-encodes every categorical column
// with codes assigned in lexicographic category order.
Dataset preprocess(const Dataset& d);
// Code-table sidecar: {"column": ["cat0", "cat1", ...], ...}.
nlohmann::json code_tables_json(const Dataset& d);

struct SubpopulationPartition {
  std::map<std::string, Dataset> subsets;
  std::set<std::string> excluded;
  // Rows whose population marker is in `excluded`.
  Dataset excluded_rows;
};

SubpopulationPartition partition_by_pm(const Dataset& d,
                                       const std::set<std::string>& excluded);

struct SplitPair {
  Dataset train;
  Dataset test;
  double train_fraction = 0.65;
  std::string stratify_column;
};

inline constexpr double kDefaultTrainFraction = 0.65;

// Per stratum: floor(fraction * n_s) rows to train, then the remaining
// round(fraction * n) - sum(floors) rows go to the strata with the largest
// fractional remainders. A single-row stratum goes to train with a warning.
SplitPair stratified_split(const Dataset& d, double train_fraction,
                           std::string_view stratify_column, std::uint64_t seed);

// Per-stratum train counts for the allocation above, in stratum-key order.
// Exposed for testing.
std::vector<std::size_t> allocate_stratified(std::span<const std::size_t> stratum_sizes,
                                             double train_fraction);

}  // namespace ensgan
