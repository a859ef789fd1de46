#include "ensgan/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ensgan/artifact.hpp"
#include "ensgan/common.hpp"

namespace ensgan {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

ColumnKind parse_kind(const std::string& s) {
  if (s == "continuous") return ColumnKind::kContinuous;
  if (s == "categorical") return ColumnKind::kCategorical;
  throw SchemaError("unknown column kind '" + s + "'");
}

ColumnRole parse_role(const std::string& s) {
  if (s == "feature") return ColumnRole::kFeature;
  if (s == "label") return ColumnRole::kLabel;
  if (s == "population_marker" || s == "pm") return ColumnRole::kPopulationMarker;
  throw SchemaError("unknown column role '" + s + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// Splits one record. Fields may be double-quoted with "" as an escaped quote.
std::vector<std::string> split_record(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string quote_if_needed(const std::string& s, char delimiter) {
  if (s.find(delimiter) == std::string::npos && s.find('"') == std::string::npos &&
      s.find('\n') == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string to_string(ColumnKind kind) {
  return kind == ColumnKind::kContinuous ? "continuous" : "categorical";
}

std::string to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::kFeature: return "feature";
    case ColumnRole::kLabel: return "label";
    case ColumnRole::kPopulationMarker: return "population_marker";
  }
  return "feature";
}

// ---------------------------------------------------------------------------
// Schema

Schema::Schema(std::vector<ColumnSpec> columns, std::optional<std::string> positive_label)
    : columns_(std::move(columns)), positive_label_(std::move(positive_label)) {
  std::set<std::string> names;
  std::optional<std::size_t> label;
  std::optional<std::size_t> pm;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const ColumnSpec& c = columns_[i];
    if (c.name.empty()) throw SchemaError("empty column name");
    if (!names.insert(c.name).second) throw SchemaError("duplicate column '" + c.name + "'");
    if (c.role == ColumnRole::kLabel) {
      if (label) throw SchemaError("more than one label column");
      label = i;
    } else if (c.role == ColumnRole::kPopulationMarker) {
      if (pm) throw SchemaError("more than one population-marker column");
      pm = i;
    }
    if (c.role != ColumnRole::kFeature && c.kind != ColumnKind::kCategorical) {
      throw SchemaError("column '" + c.name + "' must be categorical");
    }
  }
  if (!label) throw SchemaError("no label column");
  if (!pm) throw SchemaError("no population-marker column");
  label_ = *label;
  pm_ = *pm;
}

Schema Schema::from_json(const nlohmann::json& doc) {
  if (!doc.contains("columns") || !doc["columns"].is_array()) {
    throw SchemaError("schema document needs a 'columns' array");
  }
  std::vector<ColumnSpec> cols;
  try {
    for (const auto& c : doc["columns"]) {
      cols.push_back({c.at("name").get<std::string>(),
                      parse_kind(c.at("kind").get<std::string>()),
                      parse_role(c.value("role", std::string("feature")))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed column entry: ") + e.what());
  }
  std::optional<std::string> positive;
  if (doc.contains("positive_label") && !doc["positive_label"].is_null()) {
    positive = doc["positive_label"].get<std::string>();
  }
  return Schema(std::move(cols), std::move(positive));
}

nlohmann::json Schema::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns_) {
    cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}, {"role", to_string(c.role)}});
  }
  nlohmann::json doc{{"columns", cols}};
  if (positive_label_) doc["positive_label"] = *positive_label_;
  return doc;
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  auto i = find(name);
  if (!i) throw SchemaError("no column named '" + std::string(name) + "'");
  return *i;
}

std::vector<std::size_t> Schema::feature_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].role == ColumnRole::kFeature) out.push_back(i);
  }
  return out;
}

std::string Schema::fingerprint() const {
  std::string canon;
  for (const auto& c : columns_) {
    canon += c.name + '\x1f' + to_string(c.kind) + '\x1f' + to_string(c.role) + '\x1e';
  }
  if (positive_label_) canon += "+" + *positive_label_;
  return sha256_hex(canon).substr(0, 16);
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(Schema schema, CategoryTables categories, std::string provenance)
    : schema_(std::move(schema)),
      categories_(std::move(categories)),
      provenance_(std::move(provenance)),
      columns_(schema_.size()) {
  categories_.resize(schema_.size());
  for (std::size_t c = 0; c < schema_.size(); ++c) {
    if (schema_.column(c).kind == ColumnKind::kContinuous && !categories_[c].empty()) {
      throw SchemaError("continuous column '" + schema_.column(c).name + "' has a code table");
    }
  }
}

std::vector<double> Dataset::row(std::size_t r) const {
  std::vector<double> out(columns_.size());
  for (std::size_t c = 0; c < columns_.size(); ++c) out[c] = columns_[c][r];
  return out;
}

const std::string& Dataset::category_at(std::size_t row, std::size_t col) const {
  const double v = columns_[col][row];
  if (std::isnan(v)) throw DataError("missing cell at row " + std::to_string(row));
  return categories_[col].at(static_cast<std::size_t>(v));
}

std::optional<int> Dataset::code_of(std::size_t col, std::string_view category) const {
  const auto& table = categories_.at(col);
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i] == category) return static_cast<int>(i);
  }
  return std::nullopt;
}

void Dataset::reserve(std::size_t rows) {
  for (auto& col : columns_) col.reserve(rows);
  row_ids_.reserve(rows);
}

void Dataset::append_row(std::span<const double> values, RowId id) {
  if (values.size() != columns_.size()) {
    throw SchemaError("row has " + std::to_string(values.size()) + " cells, schema has " +
                      std::to_string(columns_.size()));
  }
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const double v = values[c];
    if (schema_.column(c).kind == ColumnKind::kCategorical && !std::isnan(v)) {
      if (v < 0 || v >= static_cast<double>(categories_[c].size()) || v != std::floor(v)) {
        throw SchemaError("code " + format_double(v) + " outside table of column '" +
                          schema_.column(c).name + "'");
      }
    }
    columns_[c].push_back(v);
  }
  row_ids_.push_back(id);
}

Dataset Dataset::select(std::span<const std::size_t> rows, std::string provenance) const {
  Dataset out(schema_, categories_, std::move(provenance));
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    auto& dst = out.columns_[c];
    dst.reserve(rows.size());
    for (std::size_t r : rows) dst.push_back(columns_[c].at(r));
  }
  out.row_ids_.reserve(rows.size());
  for (std::size_t r : rows) out.row_ids_.push_back(row_ids_.at(r));
  return out;
}

Dataset Dataset::with_provenance(std::string provenance) const {
  Dataset out = *this;
  out.provenance_ = std::move(provenance);
  return out;
}

Dataset Dataset::concat(const Dataset& other, std::string provenance) const {
  if (!(schema_ == other.schema_)) throw SchemaError("concat of datasets with different schemas");
  if (categories_ != other.categories_) {
    throw SchemaError("concat of datasets with different category tables");
  }
  Dataset out = *this;
  out.provenance_ = std::move(provenance);
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    out.columns_[c].insert(out.columns_[c].end(), other.columns_[c].begin(),
                           other.columns_[c].end());
  }
  out.row_ids_.insert(out.row_ids_.end(), other.row_ids_.begin(), other.row_ids_.end());
  return out;
}

Dataset Dataset::recode_to(const CategoryTables& target) const {
  if (target.size() != categories_.size()) throw SchemaError("recode: table count mismatch");
  if (target == categories_) return *this;
  Dataset out = *this;
  out.categories_ = target;
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (schema_.column(c).kind != ColumnKind::kCategorical) continue;
    std::vector<double> mapping(categories_[c].size(), kMissing);
    for (std::size_t k = 0; k < categories_[c].size(); ++k) {
      auto it = std::find(target[c].begin(), target[c].end(), categories_[c][k]);
      if (it != target[c].end()) mapping[k] = static_cast<double>(it - target[c].begin());
    }
    for (double& v : out.columns_[c]) {
      if (std::isnan(v)) continue;
      const double mapped = mapping[static_cast<std::size_t>(v)];
      if (std::isnan(mapped)) {
        throw SchemaError("category '" + categories_[c][static_cast<std::size_t>(v)] +
                          "' of column '" + schema_.column(c).name +
                          "' is not in the target code table");
      }
      v = mapped;
    }
  }
  return out;
}

bool Dataset::has_missing() const {
  for (const auto& col : columns_) {
    for (double v : col) {
      if (std::isnan(v)) return true;
    }
  }
  return false;
}

std::size_t Dataset::count_synthetic() const {
  return static_cast<std::size_t>(std::count_if(row_ids_.begin(), row_ids_.end(), is_synthetic));
}

std::optional<int> Dataset::positive_code() const {
  const auto& table = categories_[schema_.label_index()];
  if (schema_.positive_label()) return code_of(schema_.label_index(), *schema_.positive_label());
  if (auto one = code_of(schema_.label_index(), "1")) return one;
  if (table.size() == 2) return 1;
  return std::nullopt;
}

std::vector<int> Dataset::binary_labels() const {
  const std::size_t li = schema_.label_index();
  if (categories_[li].size() > 2) {
    throw DataError("label column '" + schema_.column(li).name + "' has " +
                    std::to_string(categories_[li].size()) + " categories; binary required");
  }
  const std::optional<int> pos = positive_code();
  std::vector<int> out;
  out.reserve(num_rows());
  for (double v : columns_[li]) {
    if (std::isnan(v)) throw DataError("missing label");
    out.push_back(pos && static_cast<int>(v) == *pos ? 1 : 0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// I/O

SchemaDocument parse_schema_document(const nlohmann::json& doc) {
  SchemaDocument out{Schema::from_json(doc), {}};
  if (doc.contains("delimiter")) {
    const auto d = doc["delimiter"].get<std::string>();
    if (d.size() != 1) throw SchemaError("delimiter must be one character");
    out.options.delimiter = d[0];
  }
  if (doc.contains("missing")) {
    out.options.missing_markers = doc["missing"].get<std::vector<std::string>>();
  }
  return out;
}

SchemaDocument load_schema_document(const std::filesystem::path& path) {
  try {
    return parse_schema_document(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

nlohmann::json schema_document_json(const Schema& schema, const LoadOptions& options) {
  nlohmann::json doc = schema.to_json();
  doc["delimiter"] = std::string(1, options.delimiter);
  doc["missing"] = options.missing_markers;
  return doc;
}

Dataset parse_dataset(std::string_view text, const Schema& schema, const LoadOptions& options,
                      std::string provenance) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw SchemaError(provenance + ": no header row");

  const std::vector<std::string> header = split_record(lines[0], options.delimiter);
  std::vector<std::size_t> source(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) {
      return trim(h) == schema.column(c).name;
    });
    if (it == header.end()) {
      throw SchemaError(provenance + ": header lacks column '" + schema.column(c).name + "'");
    }
    source[c] = static_cast<std::size_t>(it - header.begin());
  }

  auto is_missing = [&](std::string_view cell) {
    return std::find(options.missing_markers.begin(), options.missing_markers.end(), cell) !=
           options.missing_markers.end();
  };

  // Pass 1: collect cells and discover category sets.
  std::vector<std::vector<std::string>> cells;
  cells.reserve(lines.size() - 1);
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (trim(lines[l]).empty()) continue;
    std::vector<std::string> rec = split_record(lines[l], options.delimiter);
    if (rec.size() < header.size()) {
      throw ParseError(provenance + ": line " + std::to_string(l + 1) + " has " +
                       std::to_string(rec.size()) + " fields, header has " +
                       std::to_string(header.size()));
    }
    cells.push_back(std::move(rec));
  }

  CategoryTables tables(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema.column(c).kind != ColumnKind::kCategorical) continue;
    std::set<std::string> values;
    for (const auto& rec : cells) {
      const std::string_view cell = trim(rec[source[c]]);
      if (!is_missing(cell)) values.emplace(cell);
    }
    tables[c].assign(values.begin(), values.end());
  }

  Dataset out(schema, tables, std::move(provenance));
  out.reserve(cells.size());
  std::vector<double> values(schema.size());
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const std::string_view cell = trim(cells[r][source[c]]);
      if (is_missing(cell)) {
        values[c] = kMissing;
      } else if (schema.column(c).kind == ColumnKind::kCategorical) {
        const auto& t = tables[c];
        values[c] = static_cast<double>(std::lower_bound(t.begin(), t.end(), cell) - t.begin());
      } else {
        double v = 0;
        const char* first = cell.data();
        const char* last = cell.data() + cell.size();
        if (!cell.empty() && *first == '+') ++first;
        auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
          throw ParseError(out.provenance() + ": row " + std::to_string(r + 1) + ", column '" +
                           schema.column(c).name + "': cannot parse '" + std::string(cell) +
                           "' as a number");
        }
        values[c] = v;
      }
    }
    out.append_row(values, static_cast<RowId>(r));
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, const Schema& schema,
                     const LoadOptions& options) {
  return parse_dataset(read_text_file(path), schema, options, path.string());
}

std::string format_dataset(const Dataset& d, char delimiter) {
  std::ostringstream out;
  const Schema& s = d.schema();
  for (std::size_t c = 0; c < s.size(); ++c) {
    if (c) out << delimiter;
    out << quote_if_needed(s.column(c).name, delimiter);
  }
  out << '\n';
  for (std::size_t r = 0; r < d.num_rows(); ++r) {
    for (std::size_t c = 0; c < s.size(); ++c) {
      if (c) out << delimiter;
      const double v = d.at(r, c);
      if (std::isnan(v)) continue;
      if (s.column(c).kind == ColumnKind::kCategorical) {
        out << quote_if_needed(d.category_at(r, c), delimiter);
      } else {
        out << format_double(v);
      }
    }
    out << '\n';
  }
  return out.str();
}

void save_dataset(const Dataset& d, const std::filesystem::path& path, char delimiter) {
  write_text_file(path, format_dataset(d, delimiter));
}

// ---------------------------------------------------------------------------
// Preprocessing

Dataset preprocess(const Dataset& d) {
  const Schema& s = d.schema();
  std::vector<std::size_t> keep;
  keep.reserve(d.num_rows());
  for (std::size_t r = 0; r < d.num_rows(); ++r) {
    bool complete = true;
    for (std::size_t c = 0; c < s.size() && complete; ++c) complete = !std::isnan(d.at(r, c));
    if (complete) keep.push_back(r);
  }
  if (keep.empty()) throw EmptyDatasetError(d.provenance() + ": every row has a missing cell");

  CategoryTables tables(s.size());
  for (std::size_t c = 0; c < s.size(); ++c) {
    if (s.column(c).kind != ColumnKind::kCategorical) continue;
    std::set<std::string> present;
    for (std::size_t r : keep) present.insert(d.category_at(r, c));
    tables[c].assign(present.begin(), present.end());
  }
  Dataset dropped = d.select(keep, d.provenance());
  return dropped.recode_to(tables);
}

nlohmann::json code_tables_json(const Dataset& d) {
  nlohmann::json doc = nlohmann::json::object();
  for (std::size_t c = 0; c < d.num_columns(); ++c) {
    if (d.schema().column(c).kind == ColumnKind::kCategorical) {
      doc[d.schema().column(c).name] = d.categories(c);
    }
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Partitioning

SubpopulationPartition partition_by_pm(const Dataset& d, const std::set<std::string>& excluded) {
  const std::size_t pm = d.schema().pm_index();
  std::map<std::string, std::vector<std::size_t>> groups;
  std::vector<std::size_t> excluded_rows;
  for (std::size_t r = 0; r < d.num_rows(); ++r) {
    const std::string& value = d.category_at(r, pm);
    if (excluded.count(value)) {
      excluded_rows.push_back(r);
    } else {
      groups[value].push_back(r);
    }
  }
  SubpopulationPartition out;
  out.excluded = excluded;
  for (const auto& [value, rows] : groups) {
    out.subsets.emplace(value, d.select(rows, d.provenance() + "|sp=" + value));
  }
  out.excluded_rows = d.select(excluded_rows, d.provenance() + "|sp=<excluded>");
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

std::vector<std::size_t> allocate_stratified(std::span<const std::size_t> stratum_sizes,
                                             double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  const std::size_t total = std::accumulate(stratum_sizes.begin(), stratum_sizes.end(),
                                            std::size_t{0});
  std::vector<std::size_t> alloc(stratum_sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < stratum_sizes.size(); ++s) {
    const std::size_t n = stratum_sizes[s];
    if (n == 1) {
      alloc[s] = 1;
    } else {
      const double exact = train_fraction * static_cast<double>(n);
      alloc[s] = static_cast<std::size_t>(floor_tol(exact));
      const double rem = exact - static_cast<double>(alloc[s]);
      if (rem > 1e-9) remainders.emplace_back(rem, s);
    }
    assigned += alloc[s];
  }
  const long long target = round_half_up(train_fraction * static_cast<double>(total));
  long long extra = target - static_cast<long long>(assigned);
  extra = std::clamp<long long>(extra, 0, static_cast<long long>(remainders.size()));
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (long long i = 0; i < extra; ++i) ++alloc[remainders[static_cast<std::size_t>(i)].second];
  return alloc;
}

SplitPair stratified_split(const Dataset& d, double train_fraction,
                           std::string_view stratify_column, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  const std::size_t col = d.schema().index_of(stratify_column);
  if (d.schema().column(col).kind != ColumnKind::kCategorical) {
    throw SchemaError("stratify column '" + std::string(stratify_column) + "' is not categorical");
  }
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t r = 0; r < d.num_rows(); ++r) {
    const double v = d.at(r, col);
    if (std::isnan(v)) throw DataError("missing value in stratify column");
    strata[static_cast<int>(v)].push_back(r);
  }
  std::vector<std::size_t> sizes;
  for (const auto& [code, rows] : strata) {
    sizes.push_back(rows.size());
    if (rows.size() == 1) {
      warn("stratum '" + d.categories(col)[static_cast<std::size_t>(code)] + "' of column '" +
           std::string(stratify_column) + "' has a single row; assigned to train");
    }
  }
  const std::vector<std::size_t> alloc = allocate_stratified(sizes, train_fraction);

  Rng rng(seed);
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  std::size_t s = 0;
  for (auto& [code, rows] : strata) {
    std::shuffle(rows.begin(), rows.end(), rng.engine());
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<long>(alloc[s]));
    test_rows.insert(test_rows.end(), rows.begin() + static_cast<long>(alloc[s]), rows.end());
    ++s;
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return SplitPair{d.select(train_rows, d.provenance() + "|split=train"),
                   d.select(test_rows, d.provenance() + "|split=test"), train_fraction,
                   std::string(stratify_column)};
}

}  // namespace ensgan
