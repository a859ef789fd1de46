#include "ensgan/resamplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ensgan/common.hpp"

namespace ensgan {
namespace {

std::map<int, std::vector<std::size_t>> group_rows(const Dataset& d, std::size_t col) {
  if (d.schema().column(col).kind != ColumnKind::kCategorical) {
    throw ResampleError("class column '" + d.schema().column(col).name + "' is not categorical");
  }
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < d.num_rows(); ++r) {
    const double v = d.at(r, col);
    if (std::isnan(v)) throw ResampleError("missing class value at row " + std::to_string(r));
    groups[static_cast<int>(v)].push_back(r);
  }
  return groups;
}

std::map<std::string, std::size_t> counts_by_name(const Dataset& d, std::size_t col,
                                                  const std::map<int, std::vector<std::size_t>>& g) {
  std::map<std::string, std::size_t> out;
  for (const auto& [code, rows] : g) out[d.categories(col)[static_cast<std::size_t>(code)]] = rows.size();
  return out;
}

std::string method_name(ResampleMethod m) { return m == ResampleMethod::kSmote ? "smote" : "rus"; }

}  // namespace

nlohmann::json ResampleReport::to_json() const {
  nlohmann::json doc{{"method", method_name(method)}, {"before", before}, {"after", after},
                     {"seed", seed}};
  if (method == ResampleMethod::kSmote) doc["k_neighbors"] = k_neighbors;
  return doc;
}

SmoteResult smote_oversample(const Dataset& train, std::string_view class_column, std::size_t k,
                             std::uint64_t seed) {
  if (k < 1) throw ConfigError("SMOTE needs k >= 1");
  const Schema& schema = train.schema();
  const std::size_t class_col = schema.index_of(class_column);
  const auto groups = group_rows(train, class_col);
  if (groups.empty()) throw ResampleError("SMOTE on an empty dataset");
  for (const auto& [code, rows] : groups) {
    if (rows.size() < 2) {
      throw ResampleError("class '" + train.categories(class_col)[static_cast<std::size_t>(code)] +
                          "' has " + std::to_string(rows.size()) + " row; SMOTE needs >= 2");
    }
  }

  std::vector<std::size_t> continuous;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema.column(c).kind == ColumnKind::kContinuous) continuous.push_back(c);
  }
  if (continuous.empty()) throw ResampleError("SMOTE needs at least one continuous column");

  // Standardized copy of the continuous block, row-major.
  const std::size_t n = train.num_rows();
  const std::size_t dims = continuous.size();
  std::vector<double> z(n * dims);
  for (std::size_t j = 0; j < dims; ++j) {
    auto col = train.column(continuous[j]);
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    double sd = std::sqrt(var / static_cast<double>(n));
    if (!(sd > 0.0)) sd = 1.0;
    for (std::size_t r = 0; r < n; ++r) z[r * dims + j] = (col[r] - mean) / sd;
  }
  auto dist2 = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < dims; ++j) {
      const double d = z[a * dims + j] - z[b * dims + j];
      s += d * d;
    }
    return s;
  };

  std::size_t majority = 0;
  for (const auto& [code, rows] : groups) majority = std::max(majority, rows.size());

  SmoteResult result{train, {}, {}};
  result.report.method = ResampleMethod::kSmote;
  result.report.before = counts_by_name(train, class_col, groups);
  result.report.seed = seed;
  result.report.k_neighbors = k;

  const RowId id_base =
      kSyntheticRowBit | ((derive_seed(seed, {"smote-ids"}) & 0x7fffffffull) << 32);
  RowId next_id = 0;
  for (const auto& [code, rows] : groups) {
    const std::size_t deficit = majority - rows.size();
    if (deficit == 0) continue;
    const std::string& cls = train.categories(class_col)[static_cast<std::size_t>(code)];
    std::size_t k_eff = k;
    if (rows.size() <= k) {
      k_eff = rows.size() - 1;
      warn("SMOTE: class '" + cls + "' has " + std::to_string(rows.size()) +
           " rows; k reduced to " + std::to_string(k_eff));
    }

    // k nearest same-class neighbors of every member, ties broken by row index.
    std::vector<std::vector<std::size_t>> neighbors(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::vector<std::pair<double, std::size_t>> cand;
      cand.reserve(rows.size() - 1);
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (j != i) cand.emplace_back(dist2(rows[i], rows[j]), rows[j]);
      }
      std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(k_eff), cand.end());
      for (std::size_t m = 0; m < k_eff; ++m) neighbors[i].push_back(cand[m].second);
    }

    Rng rng(derive_seed(seed, {"smote", cls}));
    for (std::size_t s = 0; s < deficit; ++s) {
      const std::size_t i = rng.index(rows.size());
      const std::size_t parent = rows[i];
      const std::size_t nn = neighbors[i][rng.index(k_eff)];
      const double lambda = rng.uniform();
      std::vector<double> values = train.row(parent);
      for (std::size_t c : continuous) {
        values[c] = train.at(parent, c) + lambda * (train.at(nn, c) - train.at(parent, c));
      }
      result.data.append_row(values, id_base | next_id++);
      result.lineage.push_back({parent, nn, lambda});
    }
  }
  result.data = result.data.with_provenance(train.provenance() + "|smote");
  result.report.after = counts_by_name(result.data, class_col, group_rows(result.data, class_col));
  return result;
}

RusResult random_undersample(const Dataset& d, std::string_view class_column,
                             std::uint64_t seed) {
  const std::size_t class_col = d.schema().index_of(class_column);
  const auto groups = group_rows(d, class_col);
  if (groups.size() < 2) {
    throw ResampleError("random under-sampling needs >= 2 classes, found " +
                        std::to_string(groups.size()));
  }
  std::size_t minority = d.num_rows();
  for (const auto& [code, rows] : groups) minority = std::min(minority, rows.size());

  std::vector<std::size_t> keep;
  for (const auto& [code, rows] : groups) {
    std::vector<std::size_t> pool = rows;
    Rng rng(derive_seed(seed, {"rus", d.categories(class_col)[static_cast<std::size_t>(code)]}));
    // Partial Fisher-Yates: the first `minority` slots are a uniform sample.
    for (std::size_t i = 0; i < minority; ++i) {
      const std::size_t j = i + rng.index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    keep.insert(keep.end(), pool.begin(), pool.begin() + static_cast<long>(minority));
  }
  std::sort(keep.begin(), keep.end());

  RusResult result{d.select(keep, d.provenance() + "|rus"), {}};
  result.report.method = ResampleMethod::kRus;
  result.report.seed = seed;
  result.report.before = counts_by_name(d, class_col, groups);
  result.report.after =
      counts_by_name(result.data, class_col, group_rows(result.data, class_col));
  return result;
}

}  // namespace ensgan
