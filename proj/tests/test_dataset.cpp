#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "ensgan/artifact.hpp"
#include "ensgan/dataset.hpp"
#include "test_support.hpp"

using namespace ensgan;
using testing_support::random_toy;
using testing_support::temp_dir;

namespace {

Schema clinical_schema() {
  return Schema({{"age", ColumnKind::kContinuous, ColumnRole::kFeature},
                 {"sex", ColumnKind::kCategorical, ColumnRole::kFeature},
                 {"died", ColumnKind::kCategorical, ColumnRole::kLabel},
                 {"ethnicity", ColumnKind::kCategorical, ColumnRole::kPopulationMarker}});
}

const char* kThreeRows =
    "age,sex,died,ethnicity\n"
    "71.5,F,1,White\n"
    "64,M,0,Black\n"
    "80.25,F,0,Asian\n";

}  // namespace

TEST(Schema, RejectsInvalidRoleLayouts) {
  EXPECT_THROW(Schema({{"a", ColumnKind::kCategorical, ColumnRole::kLabel}}), SchemaError);
  EXPECT_THROW(Schema({{"a", ColumnKind::kCategorical, ColumnRole::kLabel},
                       {"b", ColumnKind::kContinuous, ColumnRole::kPopulationMarker}}),
               SchemaError);
  EXPECT_THROW(Schema({{"a", ColumnKind::kCategorical, ColumnRole::kLabel},
                       {"a", ColumnKind::kCategorical, ColumnRole::kPopulationMarker}}),
               SchemaError);
  EXPECT_THROW(Schema({{"a", ColumnKind::kCategorical, ColumnRole::kLabel},
                       {"b", ColumnKind::kCategorical, ColumnRole::kLabel},
                       {"c", ColumnKind::kCategorical, ColumnRole::kPopulationMarker}}),
               SchemaError);
}

TEST(Schema, JsonRoundTripAndFingerprint) {
  const Schema s = clinical_schema();
  EXPECT_EQ(Schema::from_json(s.to_json()), s);
  EXPECT_EQ(s.fingerprint(), Schema::from_json(s.to_json()).fingerprint());
  const Schema other({{"age", ColumnKind::kContinuous, ColumnRole::kFeature},
                      {"died", ColumnKind::kCategorical, ColumnRole::kLabel},
                      {"ethnicity", ColumnKind::kCategorical, ColumnRole::kPopulationMarker}});
  EXPECT_NE(s.fingerprint(), other.fingerprint());
}

TEST(LoadDataset, ThreeRowFile) {
  const auto dir = temp_dir("load3");
  write_text_file(dir / "d.csv", kThreeRows);
  const Dataset d = load_dataset(dir / "d.csv", clinical_schema());
  EXPECT_EQ(d.num_rows(), 3u);
  EXPECT_DOUBLE_EQ(d.at(2, 0), 80.25);
  EXPECT_EQ(d.category_at(1, 3), "Black");
  EXPECT_EQ(d.categories(3), (std::vector<std::string>{"Asian", "Black", "White"}));
  EXPECT_EQ(d.binary_labels(), (std::vector<int>{1, 0, 0}));
}

TEST(LoadDataset, HeaderColumnOrderIsFree) {
  const Dataset d = parse_dataset("ethnicity,died,age,sex\nWhite,1,50,F\n", clinical_schema(), {}, "t");
  EXPECT_DOUBLE_EQ(d.at(0, 0), 50.0);
  EXPECT_EQ(d.category_at(0, 1), "F");
}

TEST(LoadDataset, QuotedFieldsAndDelimiter) {
  LoadOptions opt;
  opt.delimiter = ';';
  const Dataset d = parse_dataset("age;sex;died;ethnicity\n1;\"F;x\";0;\"Other or \"\"Unknown\"\"\"\n",
                                  clinical_schema(), opt, "t");
  EXPECT_EQ(d.category_at(0, 1), "F;x");
  EXPECT_EQ(d.category_at(0, 3), "Other or \"Unknown\"");
}

TEST(LoadDataset, MissingHeaderColumnIsSchemaError) {
  EXPECT_THROW(parse_dataset("age,sex,died\n1,F,0\n", clinical_schema(), {}, "t"), SchemaError);
}

TEST(LoadDataset, UnparseableNumberNamesRowAndColumn) {
  try {
    parse_dataset("age,sex,died,ethnicity\n1,F,0,W\nold,F,0,W\n", clinical_schema(), {}, "t");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("row 2"), std::string::npos) << what;
    EXPECT_NE(what.find("'age'"), std::string::npos) << what;
  }
}

TEST(LoadDataset, FormatRoundTrip) {
  const Dataset d = parse_dataset(kThreeRows, clinical_schema(), {}, "t");
  const Dataset again = parse_dataset(format_dataset(d), clinical_schema(), {}, "t");
  EXPECT_EQ(again, d);
}

TEST(Preprocess, DropsRowsWithMissingCells) {
  LoadOptions opt;
  opt.missing_markers = {"", "NA"};
  const Dataset raw = parse_dataset(
      "age,sex,died,ethnicity\n1,F,0,W\n2,,1,B\n3,M,NA,W\n4,M,1,B\n5,F,0,A\n6,F,1,W\n",
      clinical_schema(), opt, "t");
  EXPECT_TRUE(raw.has_missing());
  EXPECT_EQ(raw.num_rows(), 6u);
  const Dataset d = preprocess(raw);
  EXPECT_EQ(d.num_rows(), 4u);
  EXPECT_FALSE(d.has_missing());
}

TEST(Preprocess, FiveRowsOneMissingGivesFour) {
  const Dataset raw = parse_dataset("age,sex,died,ethnicity\n1,F,0,W\n,F,1,B\n3,M,0,W\n4,M,1,B\n5,F,0,A\n",
                                    clinical_schema(), {}, "t");
  EXPECT_EQ(preprocess(raw).num_rows(), 4u);
}

TEST(Preprocess, CodesAreABijectionWithTheRecordedTable) {
  const Dataset d = preprocess(parse_dataset(kThreeRows, clinical_schema(), {}, "t"));
  const auto& table = d.categories(3);
  EXPECT_EQ(table.size(), 3u);
  std::set<double> codes;
  for (std::size_t r = 0; r < d.num_rows(); ++r) {
    codes.insert(d.at(r, 3));
    EXPECT_EQ(table.at(static_cast<std::size_t>(d.at(r, 3))), d.category_at(r, 3));
  }
  EXPECT_EQ(codes.size(), 3u);
  const nlohmann::json sidecar = code_tables_json(d);
  EXPECT_EQ(sidecar["ethnicity"], nlohmann::json({"Asian", "Black", "White"}));
  EXPECT_FALSE(sidecar.contains("age"));
}

TEST(Preprocess, DropsCategoriesThatOnlyOccurredOnDroppedRows) {
  const Dataset raw = parse_dataset("age,sex,died,ethnicity\n1,F,0,W\n,X,1,B\n3,M,1,W\n",
                                    clinical_schema(), {}, "t");
  const Dataset d = preprocess(raw);
  EXPECT_EQ(d.categories(1), (std::vector<std::string>{"F", "M"}));
  EXPECT_EQ(d.categories(3), (std::vector<std::string>{"W"}));
}

TEST(Preprocess, IsIdempotent) {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Dataset d = preprocess(random_toy(rng, 60, 2, 3, true));
    EXPECT_EQ(preprocess(d), d);
  }
}

TEST(Preprocess, AllRowsDroppedIsEmptyDatasetError) {
  const Dataset raw = parse_dataset("age,sex,died,ethnicity\n,F,0,W\n2,,1,B\n", clinical_schema(), {}, "t");
  EXPECT_THROW(preprocess(raw), EmptyDatasetError);
}

TEST(Partition, ExcludingOneOfFiveValuesLeavesFourSubsets) {
  Rng rng(9);
  const Dataset d = random_toy(rng, 400, 1, 5);
  const auto part = partition_by_pm(d, {"P4"});
  EXPECT_EQ(part.subsets.size(), 4u);
  EXPECT_FALSE(part.subsets.count("P4"));
  std::size_t total = part.excluded_rows.num_rows();
  for (const auto& [k, v] : part.subsets) total += v.num_rows();
  EXPECT_EQ(total, d.num_rows());
}

TEST(Partition, SingleValueGivesOneSubsetEqualToInput) {
  Rng rng(3);
  const Dataset d = random_toy(rng, 50, 2, 1);
  const auto part = partition_by_pm(d, {});
  ASSERT_EQ(part.subsets.size(), 1u);
  const Dataset& only = part.subsets.begin()->second;
  EXPECT_EQ(only.num_rows(), d.num_rows());
  EXPECT_TRUE(std::equal(only.row_ids().begin(), only.row_ids().end(), d.row_ids().begin()));
  EXPECT_EQ(part.excluded_rows.num_rows(), 0u);
}

TEST(Partition, MatchesBruteForceGrouping) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(500);
    const std::size_t n_pm = 1 + rng.index(6);
    const Dataset d = random_toy(rng, n, 2, n_pm);
    std::set<std::string> excluded;
    if (n_pm > 1 && rng.bernoulli(0.5)) excluded.insert("P0");

    std::map<std::string, std::set<RowId>> oracle;
    std::set<RowId> oracle_excluded;
    for (std::size_t r = 0; r < d.num_rows(); ++r) {
      const std::string pm = d.categories(d.schema().pm_index())[static_cast<std::size_t>(d.at(r, d.schema().pm_index()))];
      (excluded.count(pm) ? oracle_excluded : oracle[pm]).insert(d.row_ids()[r]);
    }
    const auto part = partition_by_pm(d, excluded);
    ASSERT_EQ(part.subsets.size(), oracle.size());
    for (const auto& [pm, ids] : oracle) {
      const auto& sub = part.subsets.at(pm);
      EXPECT_FALSE(sub.empty());
      EXPECT_EQ(std::set<RowId>(sub.row_ids().begin(), sub.row_ids().end()), ids);
    }
    EXPECT_EQ(std::set<RowId>(part.excluded_rows.row_ids().begin(), part.excluded_rows.row_ids().end()),
              oracle_excluded);
  }
}

TEST(StratifiedSplit, HundredRowsTwentyPositives) {
  std::vector<testing_support::ToyRow> rows;
  for (int i = 0; i < 100; ++i) rows.push_back({{double(i)}, 0, 0, i < 20 ? 1 : 0});
  const Dataset d = testing_support::toy_dataset(rows, 1, false, 1);
  const SplitPair s = stratified_split(d, 0.65, "y", 17);
  EXPECT_EQ(s.train.num_rows(), 65u);
  EXPECT_EQ(s.test.num_rows(), 35u);
  auto positives = [](const Dataset& x) {
    const auto l = x.binary_labels();
    return std::count(l.begin(), l.end(), 1);
  };
  EXPECT_EQ(positives(s.train), 13);
  EXPECT_EQ(positives(s.test), 7);
  EXPECT_NE(s.train.provenance().find("split=train"), std::string::npos);
  EXPECT_NE(s.test.provenance().find("split=test"), std::string::npos);
}

TEST(StratifiedSplit, SingleClassDatasetSplitsPlainly) {
  std::vector<testing_support::ToyRow> rows;
  for (int i = 0; i < 40; ++i) rows.push_back({{double(i)}, 0, 0, 0});
  const SplitPair s = stratified_split(testing_support::toy_dataset(rows, 1, false, 1), 0.65, "y", 1);
  EXPECT_EQ(s.train.num_rows(), 26u);
  EXPECT_EQ(s.test.num_rows(), 14u);
}

TEST(StratifiedSplit, SingletonStratumGoesToTrainWithWarning) {
  std::vector<testing_support::ToyRow> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({{double(i)}, 0, 0, i == 0 ? 1 : 0});
  std::vector<std::string> warnings;
  auto prev = set_warning_sink([&](std::string_view m) { warnings.emplace_back(m); });
  const SplitPair s = stratified_split(testing_support::toy_dataset(rows, 1, false, 1), 0.65, "y", 1);
  set_warning_sink(prev);
  EXPECT_EQ(warnings.size(), 1u);
  const auto labels = s.train.binary_labels();
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 1), 1);
}

TEST(StratifiedSplit, FractionOutsideUnitIntervalIsConfigError) {
  Rng rng(1);
  const Dataset d = random_toy(rng, 20, 1, 1);
  EXPECT_THROW(stratified_split(d, 0.0, "y", 1), ConfigError);
  EXPECT_THROW(stratified_split(d, 1.0, "y", 1), ConfigError);
  EXPECT_THROW(stratified_split(d, 1.5, "y", 1), ConfigError);
}

TEST(StratifiedSplit, DeterministicGivenSeedAndDisjointCover) {
  Rng rng(2);
  const Dataset d = random_toy(rng, 200, 2, 3);
  const SplitPair a = stratified_split(d, 0.65, "y", 99);
  const SplitPair b = stratified_split(d, 0.65, "y", 99);
  const SplitPair c = stratified_split(d, 0.65, "y", 100);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(a.train, c.train);
  std::set<RowId> train(a.train.row_ids().begin(), a.train.row_ids().end());
  std::set<RowId> all(d.row_ids().begin(), d.row_ids().end());
  for (RowId id : a.test.row_ids()) {
    EXPECT_FALSE(train.count(id));
    train.insert(id);
  }
  EXPECT_EQ(train, all);
}

TEST(StratifiedSplit, AllocationMatchesProportionalOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> sizes(1 + rng.index(6));
    std::size_t total = 0;
    for (auto& s : sizes) {
      s = 2 + rng.index(300);
      total += s;
    }
    const double f = trial % 2 ? 0.65 : 0.05 + 0.9 * rng.uniform();
    const auto alloc = allocate_stratified(sizes, f);
    std::size_t sum = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      EXPECT_LT(std::abs(static_cast<double>(alloc[i]) - f * static_cast<double>(sizes[i])), 1.0);
      sum += alloc[i];
    }
    EXPECT_EQ(static_cast<long long>(sum), round_half_up(f * static_cast<double>(total)));
  }
}
