#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ensgan/resamplers.hpp"
#include "test_support.hpp"

using namespace ensgan;
using testing_support::ToyRow;
using testing_support::toy_dataset;

namespace {

Dataset classes_of_sizes(Rng& rng, const std::vector<std::size_t>& sizes, std::size_t dims = 2) {
  std::vector<ToyRow> rows;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    for (std::size_t i = 0; i < sizes[c]; ++i) {
      ToyRow r;
      for (std::size_t j = 0; j < dims; ++j) r.x.push_back(rng.normal() * (1.0 + j) + static_cast<double>(c));
      r.cat = static_cast<int>(rng.index(3));
      r.pm = static_cast<int>(c);
      r.y = static_cast<int>(rng.index(2));
      rows.push_back(r);
    }
  }
  return toy_dataset(rows, dims, true, sizes.size());
}

std::map<std::string, std::size_t> counts(const Dataset& d) {
  std::map<std::string, std::size_t> out;
  for (std::size_t r = 0; r < d.num_rows(); ++r) out[d.category_at(r, d.schema().pm_index())] += 1;
  return out;
}

// Brute-force k nearest same-class neighbors on continuous columns
// standardized over the whole input (population sd).
std::set<std::size_t> knn_oracle(const Dataset& d, std::size_t parent, std::size_t k) {
  std::vector<std::size_t> cont;
  for (std::size_t c = 0; c < d.num_columns(); ++c) {
    if (d.schema().column(c).kind == ColumnKind::kContinuous) cont.push_back(c);
  }
  std::vector<double> mean(cont.size()), sd(cont.size());
  const double n = static_cast<double>(d.num_rows());
  for (std::size_t j = 0; j < cont.size(); ++j) {
    for (double v : d.column(cont[j])) mean[j] += v / n;
    for (double v : d.column(cont[j])) sd[j] += (v - mean[j]) * (v - mean[j]) / n;
    sd[j] = std::sqrt(sd[j]);
  }
  const std::size_t pm = d.schema().pm_index();
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t r = 0; r < d.num_rows(); ++r) {
    if (r == parent || d.at(r, pm) != d.at(parent, pm)) continue;
    double s = 0;
    for (std::size_t j = 0; j < cont.size(); ++j) {
      const double diff = (d.at(r, cont[j]) - d.at(parent, cont[j])) / sd[j];
      s += diff * diff;
    }
    cand.emplace_back(s, r);
  }
  std::sort(cand.begin(), cand.end());
  std::set<std::size_t> out;
  for (std::size_t m = 0; m < std::min(k, cand.size()); ++m) out.insert(cand[m].second);
  return out;
}

}  // namespace

TEST(Smote, BalancesToMajorityCount) {
  Rng rng(1);
  const Dataset d = classes_of_sizes(rng, {10, 4});
  const SmoteResult r = smote_oversample(d, "pm", 5, 3);
  EXPECT_EQ(counts(r.data), (std::map<std::string, std::size_t>{{"P0", 10}, {"P1", 10}}));
  EXPECT_EQ(r.report.before.at("P1"), 4u);
  EXPECT_EQ(r.report.after.at("P1"), 10u);
  EXPECT_EQ(r.lineage.size(), 6u);
}

TEST(Smote, BalancedInputIsUnchanged) {
  Rng rng(2);
  const Dataset d = classes_of_sizes(rng, {7, 7, 7});
  const SmoteResult r = smote_oversample(d, "pm", 5, 3);
  EXPECT_EQ(r.data.num_rows(), d.num_rows());
  EXPECT_EQ(r.data.count_synthetic(), 0u);
  EXPECT_TRUE(r.lineage.empty());
}

TEST(Smote, ClassWithOneRowIsResampleError) {
  Rng rng(3);
  EXPECT_THROW(smote_oversample(classes_of_sizes(rng, {10, 1}), "pm", 5, 1), ResampleError);
}

TEST(Smote, SmallClassReducesKWithWarning) {
  Rng rng(4);
  std::vector<std::string> warnings;
  auto prev = set_warning_sink([&](std::string_view m) { warnings.emplace_back(m); });
  const SmoteResult r = smote_oversample(classes_of_sizes(rng, {20, 3}), "pm", 5, 1);
  set_warning_sink(prev);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_EQ(counts(r.data).at("P1"), 20u);
}

TEST(Smote, SyntheticRowsLieOnSegmentsToVerifiedNeighbors) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> sizes(2 + rng.index(3));
    for (auto& s : sizes) s = 2 + rng.index(25);
    const Dataset d = classes_of_sizes(rng, sizes, 1 + rng.index(3));
    const std::size_t k = 1 + rng.index(6);
    const SmoteResult r = smote_oversample(d, "pm", k, 100 + trial);

    const auto c = counts(r.data);
    const std::size_t majority = *std::max_element(sizes.begin(), sizes.end());
    for (const auto& [cls, n] : c) EXPECT_EQ(n, majority);
    EXPECT_EQ(r.data.num_rows(), sizes.size() * majority);

    for (std::size_t i = 0; i < d.num_rows(); ++i) {
      ASSERT_EQ(r.data.row(i), d.row(i));
      ASSERT_EQ(r.data.row_ids()[i], d.row_ids()[i]);
    }
    ASSERT_EQ(r.lineage.size(), r.data.num_rows() - d.num_rows());
    for (std::size_t s = 0; s < r.lineage.size(); ++s) {
      const auto& lin = r.lineage[s];
      const std::size_t row = d.num_rows() + s;
      const std::size_t cls_size = sizes[static_cast<std::size_t>(d.at(lin.parent, d.schema().pm_index()))];
      const auto allowed = knn_oracle(d, lin.parent, std::min(k, cls_size - 1));
      EXPECT_TRUE(allowed.count(lin.neighbor)) << "trial " << trial;
      EXPECT_GE(lin.lambda, 0.0);
      EXPECT_LE(lin.lambda, 1.0);
      EXPECT_TRUE(is_synthetic(r.data.row_ids()[row]));
      for (std::size_t col = 0; col < d.num_columns(); ++col) {
        const double p = d.at(lin.parent, col);
        const double q = d.at(lin.neighbor, col);
        const double v = r.data.at(row, col);
        if (d.schema().column(col).kind == ColumnKind::kContinuous) {
          EXPECT_NEAR(v, p + lin.lambda * (q - p), 1e-12);
          EXPECT_GE(v, std::min(p, q) - 1e-12);
          EXPECT_LE(v, std::max(p, q) + 1e-12);
        } else {
          EXPECT_EQ(v, p);
        }
      }
    }
  }
}

TEST(Smote, DeterministicGivenSeed) {
  Rng rng(6);
  const Dataset d = classes_of_sizes(rng, {15, 5});
  EXPECT_EQ(smote_oversample(d, "pm", 5, 9).data, smote_oversample(d, "pm", 5, 9).data);
  EXPECT_NE(smote_oversample(d, "pm", 5, 9).data, smote_oversample(d, "pm", 5, 10).data);
}

TEST(Rus, ReducesEveryClassToTheMinimum) {
  Rng rng(7);
  const Dataset d = classes_of_sizes(rng, {100, 20, 5});
  const RusResult r = random_undersample(d, "pm", 1);
  EXPECT_EQ(counts(r.data),
            (std::map<std::string, std::size_t>{{"P0", 5}, {"P1", 5}, {"P2", 5}}));
  EXPECT_EQ(r.report.before.at("P0"), 100u);
}

TEST(Rus, EqualCountsKeepEveryRow) {
  Rng rng(8);
  const Dataset d = classes_of_sizes(rng, {6, 6});
  const RusResult r = random_undersample(d, "pm", 1);
  EXPECT_EQ(r.data.num_rows(), d.num_rows());
  EXPECT_EQ(std::set<RowId>(r.data.row_ids().begin(), r.data.row_ids().end()),
            std::set<RowId>(d.row_ids().begin(), d.row_ids().end()));
}

TEST(Rus, SingleClassIsResampleError) {
  Rng rng(9);
  EXPECT_THROW(random_undersample(classes_of_sizes(rng, {10}), "pm", 1), ResampleError);
}

TEST(Rus, OutputIsASubsetWithoutDuplicates) {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> sizes(2 + rng.index(4));
    for (auto& s : sizes) s = 1 + rng.index(40);
    const Dataset d = classes_of_sizes(rng, sizes);
    const RusResult r = random_undersample(d, "pm", trial);
    std::map<RowId, std::vector<double>> input;
    for (std::size_t i = 0; i < d.num_rows(); ++i) input[d.row_ids()[i]] = d.row(i);
    std::set<RowId> seen;
    for (std::size_t i = 0; i < r.data.num_rows(); ++i) {
      const RowId id = r.data.row_ids()[i];
      ASSERT_TRUE(input.count(id));
      EXPECT_EQ(input[id], r.data.row(i));
      EXPECT_TRUE(seen.insert(id).second);
    }
    const std::size_t minimum = *std::min_element(sizes.begin(), sizes.end());
    for (const auto& [cls, n] : counts(r.data)) EXPECT_EQ(n, minimum);
  }
}

TEST(Rus, DeterministicGivenSeed) {
  Rng rng(11);
  const Dataset d = classes_of_sizes(rng, {50, 10});
  EXPECT_EQ(random_undersample(d, "pm", 4).data, random_undersample(d, "pm", 4).data);
}
