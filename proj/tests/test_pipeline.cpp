#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "ensgan/cohort_sim.hpp"
#include "ensgan/pipeline.hpp"
#include "test_support.hpp"

using namespace ensgan;
using testing_support::two_group_sim;

namespace {

PredictorConfig small_predictor() {
  PredictorConfig p;
  p.n_trees = 30;
  p.max_depth = 2;
  return p;
}

SimConfig three_group_sim(std::uint64_t seed) {
  SimConfig c = two_group_sim(600, 120, seed);
  c.subpops.push_back({"C", 90, {-0.5, 1.0}, {1.0, 1.0}, std::nullopt, std::nullopt});
  c.categoricals[0].probabilities["C"] = {0.3, 0.4, 0.3};
  return c;
}

SweepConfig sweep_config(std::vector<double> fractions, std::uint64_t seed = 3) {
  SweepConfig s;
  s.fractions = std::move(fractions);
  s.master_seed = seed;
  s.normalize();
  return s;
}

std::set<RowId> ids(const Dataset& d) { return {d.row_ids().begin(), d.row_ids().end()}; }

// Draws training rows with replacement and reports whatever ids it is told
// it trained on.
class BootstrapGenerator final : public SyntheticGenerator {
 public:
  BootstrapGenerator(Dataset train, std::vector<RowId> claimed)
      : train_(std::move(train)), claimed_(std::move(claimed)) {}

  Dataset generate(std::size_t n, std::uint64_t seed) const override {
    Rng rng(seed);
    Dataset out(train_.schema(), train_.categories(), "bootstrap");
    for (std::size_t i = 0; i < n; ++i) out.append_row(train_.row(rng.index(train_.num_rows())), kSyntheticRowBit | i);
    return out;
  }
  std::string name() const override { return "bootstrap"; }
  const std::vector<RowId>& training_row_ids() const override { return claimed_; }

 private:
  Dataset train_;
  std::vector<RowId> claimed_;
};

GeneratorFactory bootstrap_factory() {
  return [](const Dataset& train, const std::string&, std::uint64_t) {
    return std::make_shared<BootstrapGenerator>(train, sorted_real_ids(train));
  };
}

}  // namespace

TEST(Splits, EverySubpopulationIsSplitSeparately) {
  SimConfig cfg = three_group_sim(1);
  const Dataset d = preprocess(simulate_cohort(cfg));
  SweepConfig s = sweep_config({0.0});
  s.excluded_pms = {"C"};
  const StudySplits splits = prepare_splits(d, s);
  EXPECT_EQ(splits.sp_splits.size(), 2u);
  EXPECT_FALSE(splits.sp_splits.count("C"));
  ASSERT_TRUE(splits.excluded_split.has_value());
  std::set<RowId> train_union, test_union;
  for (const auto& [sp, pair] : splits.sp_splits) {
    const std::size_t n = pair.train.num_rows() + pair.test.num_rows();
    EXPECT_NEAR(static_cast<double>(pair.train.num_rows()), 0.65 * static_cast<double>(n), 1.0) << sp;
    for (RowId id : pair.train.row_ids()) train_union.insert(id);
    for (RowId id : pair.test.row_ids()) test_union.insert(id);
    EXPECT_NE(pair.train.provenance().find("split=train"), std::string::npos);
    EXPECT_NE(pair.test.provenance().find("split=test"), std::string::npos);
  }
  for (RowId id : splits.excluded_split->train.row_ids()) train_union.insert(id);
  for (RowId id : splits.excluded_split->test.row_ids()) test_union.insert(id);
  EXPECT_EQ(ids(splits.full_train), train_union);
  EXPECT_EQ(ids(splits.full_test), test_union);
  EXPECT_EQ(splits.full_train.num_rows() + splits.full_test.num_rows(), d.num_rows());
}

TEST(Augment, SyntheticCountIsRoundedFractionOfTrainingSize) {
  const SimConfig cfg = two_group_sim(300, 100, 2);
  const Dataset d = preprocess(simulate_cohort(cfg));
  const auto part = partition_by_pm(d, {});
  const Dataset b = part.subsets.at("B").with_provenance("sim|sp=B|split=train");
  const auto gen = oracle_factory(cfg)(b, "B", 1);
  const Dataset half = augment_training_set(b, *gen, 0.5, 7);
  EXPECT_EQ(half.num_rows(), 150u);
  EXPECT_EQ(half.count_synthetic(), 50u);
  for (std::size_t r = 0; r < b.num_rows(); ++r) EXPECT_EQ(half.row(r), b.row(r));
  EXPECT_EQ(augment_training_set(b, *gen, 10.0, 7).num_rows(), 1100u);
  EXPECT_EQ(augment_training_set(b, *gen, 0.0, 7), b);
  EXPECT_EQ(augment_training_set(b, *gen, 0.015, 7).num_rows(), 102u);
}

TEST(Identify, SubpopulationEqualToFullPopulationIsNotFlagged) {
  SimConfig cfg = two_group_sim(400, 10, 4);
  cfg.subpops.pop_back();
  cfg.categoricals[0].probabilities.erase("B");
  const Dataset d = preprocess(simulate_cohort(cfg));
  const SweepConfig s = sweep_config({0.0});
  const IdentifyResult r = identify_underperforming(prepare_splits(d, s), s, small_predictor());
  EXPECT_DOUBLE_EQ(r.sp_auc.at("A"), r.full_auc);
  EXPECT_TRUE(r.underperforming.empty());
  EXPECT_EQ(IdentifyResult::from_json(r.to_json()).to_json(), r.to_json());
}

TEST(Identify, TinySubpopulationIsUnassessableWithWarning) {
  SimConfig cfg = two_group_sim(400, 2, 5);
  const Dataset d = preprocess(simulate_cohort(cfg));
  const SweepConfig s = sweep_config({0.0});
  std::vector<std::string> warnings;
  auto prev = set_warning_sink([&](std::string_view m) { warnings.emplace_back(m); });
  const IdentifyResult r = identify_underperforming(prepare_splits(d, s), s, small_predictor());
  set_warning_sink(prev);
  EXPECT_TRUE(r.unassessable.count("B"));
  EXPECT_FALSE(r.sp_auc.count("B"));
  EXPECT_FALSE(std::find(r.underperforming.begin(), r.underperforming.end(), "B") != r.underperforming.end());
}

TEST(Sweep, ZeroOnlySweepMatchesVanillaEnsemble) {
  const SimConfig cfg = two_group_sim(500, 100, 6);
  const Dataset d = preprocess(simulate_cohort(cfg));
  const SweepConfig s = sweep_config({0.0});
  const StudySplits splits = prepare_splits(d, s);
  const SweepOutcome out = run_sweep(splits, {"A", "B"}, s, oracle_factory(cfg), small_predictor());
  ASSERT_EQ(out.result.points.size(), 2u);
  EXPECT_TRUE(out.generators.empty());
  const IdentifyResult id = identify_underperforming(splits, s, small_predictor());
  for (const auto& p : out.result.points) {
    EXPECT_EQ(p.synthetic_rows, 0u);
    EXPECT_EQ(p.sp_model_seed, seeds::sp_model(s.master_seed, p.sp, 0.0));
    EXPECT_EQ(*p.sp_model->get(kRocAuc), id.sp_auc.at(p.sp));
  }
  const ComparisonOutcome cmp = run_baseline_comparison(d, splits, {"A", "B"}, s, small_predictor(), out.result);
  for (const auto& row : cmp.table.rows) {
    EXPECT_EQ(row.ensemble, row.ensemble_gan) << row.sp;
    EXPECT_EQ(*row.ensemble, *out.result.find(row.sp, 0.0)->sp_model->get(kRocAuc));
    EXPECT_EQ(row.selected_fraction, 0.0);
  }
}

TEST(Sweep, ThreeSubpopulationsByTwentyFractionsGiveSixtyPoints) {
  const SimConfig cfg = three_group_sim(7);
  const Dataset d = preprocess(simulate_cohort(cfg));
  const SweepConfig s = sweep_config(default_fractions());
  const StudySplits splits = prepare_splits(d, s);
  PredictorConfig p = small_predictor();
  p.n_trees = 10;
  const SweepOutcome out = run_sweep(splits, {"A", "B", "C"}, s, oracle_factory(cfg), p);
  EXPECT_EQ(out.result.points.size(), 60u);
  EXPECT_EQ(out.result.failed_count(), 0u);
  const auto curves = build_curves(out.result);
  ASSERT_EQ(curves.size(), 3u);
  for (const auto& c : curves) EXPECT_EQ(c.points.size(), 20u);
  for (const auto& pt : out.result.points) {
    const std::size_t train = splits.sp_splits.at(pt.sp).train.num_rows();
    EXPECT_EQ(pt.real_train_rows, train);
    EXPECT_EQ(pt.synthetic_rows, round_half_up(pt.fraction * static_cast<double>(train)));
    EXPECT_TRUE(pt.fullpop_on_sp.has_value());
  }
  const AuditVerdict v = check_leakage(out.audit);
  EXPECT_TRUE(v.clean);
  EXPECT_EQ(v.generators_checked, 3u);
  EXPECT_EQ(v.models_checked, 120u);
}

TEST(Sweep, ResultsDoNotDependOnWorkerCount) {
  const SimConfig cfg = two_group_sim(400, 80, 8);
  const Dataset d = preprocess(simulate_cohort(cfg));
  SweepConfig s = sweep_config({0.0, 0.5, 2.0});
  const StudySplits splits = prepare_splits(d, s);
  PredictorConfig p = small_predictor();
  p.subsample = 0.8;
  const auto one = run_sweep(splits, {"A", "B"}, s, oracle_factory(cfg), p).result.to_json();
  s.workers = 3;
  const auto three = run_sweep(splits, {"A", "B"}, s, oracle_factory(cfg), p).result.to_json();
  EXPECT_EQ(one.dump(), three.dump());
  s.master_seed += 1;
  const StudySplits other = prepare_splits(d, s);
  EXPECT_NE(run_sweep(other, {"A", "B"}, s, oracle_factory(cfg), p).result.to_json().dump(), one.dump());
}

TEST(Sweep, GeneratorFailureMarksPointsAndRaisesPastTheThreshold) {
  const SimConfig cfg = two_group_sim(400, 80, 9);
  const Dataset d = preprocess(simulate_cohort(cfg));
  SweepConfig s = sweep_config({0.0, 1.0});
  const StudySplits splits = prepare_splits(d, s);
  const GeneratorFactory failing = [&](const Dataset& train, const std::string& sp, std::uint64_t seed) {
    if (sp == "B") throw TrainingError("generator diverged");
    return oracle_factory(cfg)(train, sp, seed);
  };
  std::vector<std::string> warnings;
  auto prev = set_warning_sink([&](std::string_view m) { warnings.emplace_back(m); });
  const SweepOutcome out = run_sweep(splits, {"A", "B"}, s, failing, small_predictor());
  EXPECT_EQ(out.result.failed_count(), 1u);
  EXPECT_FALSE(out.result.find("B", 1.0)->ok());
  EXPECT_TRUE(out.result.find("B", 0.0)->ok());
  EXPECT_FALSE(warnings.empty());

  s.max_failed_share = 0.1;
  try {
    run_sweep(splits, {"A", "B"}, s, failing, small_predictor());
    set_warning_sink(prev);
    FAIL() << "expected PartialSweepError";
  } catch (const PartialSweepError& e) {
    set_warning_sink(prev);
    EXPECT_EQ(e.outcome().result.points.size(), 4u);
    EXPECT_EQ(e.outcome().result.failed_count(), 1u);
  }
}

TEST(Sweep, UnknownTargetIsConfigError) {
  const SimConfig cfg = two_group_sim(100, 40, 10);
  const Dataset d = preprocess(simulate_cohort(cfg));
  const SweepConfig s = sweep_config({0.0});
  EXPECT_THROW(run_sweep(prepare_splits(d, s), {"Z"}, s, oracle_factory(cfg), small_predictor()), ConfigError);
}

TEST(Audit, GeneratorThatSawTestRowsIsReported) {
  const SimConfig cfg = two_group_sim(300, 80, 11);
  const Dataset d = preprocess(simulate_cohort(cfg));
  const SweepConfig s = sweep_config({0.0, 0.5});
  const StudySplits splits = prepare_splits(d, s);
  const GeneratorFactory leaky = [&](const Dataset& train, const std::string& sp, std::uint64_t) {
    std::vector<RowId> claimed = sorted_real_ids(train);
    claimed.push_back(splits.sp_splits.at(sp).test.row_ids()[0]);
    std::sort(claimed.begin(), claimed.end());
    return std::make_shared<BootstrapGenerator>(train, claimed);
  };
  const SweepOutcome out = run_sweep(splits, {"B"}, s, leaky, small_predictor());
  const AuditVerdict v = check_leakage(out.audit);
  EXPECT_FALSE(v.clean);
  ASSERT_FALSE(v.violations.empty());

  const SweepOutcome ok = run_sweep(splits, {"B"}, s, bootstrap_factory(), small_predictor());
  EXPECT_TRUE(check_leakage(ok.audit).clean);
}

TEST(Audit, ModelEvaluatedOnItsTrainingRowsIsReported) {
  const SimConfig cfg = two_group_sim(200, 50, 12);
  const Dataset d = preprocess(simulate_cohort(cfg));
  const TrainedModel m = train_classifier(d, small_predictor());
  LeakageAudit audit;
  auto overlap = std::make_shared<const std::vector<RowId>>(std::vector<RowId>{d.row_ids()[3]});
  audit.add_model("m", m, overlap);
  const AuditVerdict v = check_leakage(audit);
  EXPECT_FALSE(v.clean);
  EXPECT_EQ(v.models_checked, 1u);
}

TEST(Comparison, RowsAreOrderedBySubpopulationSize) {
  const SimConfig cfg = three_group_sim(13);
  const Dataset d = preprocess(simulate_cohort(cfg));
  const SweepConfig s = sweep_config({0.0, 1.0});
  const StudySplits splits = prepare_splits(d, s);
  const SweepOutcome sw = run_sweep(splits, {"C", "B"}, s, oracle_factory(cfg), small_predictor());
  const ComparisonOutcome cmp =
      run_baseline_comparison(d, splits, {"C", "B"}, s, small_predictor(), sw.result, "toy");
  ASSERT_EQ(cmp.table.rows.size(), 2u);
  EXPECT_EQ(cmp.table.rows[0].sp, "B");
  EXPECT_EQ(cmp.table.rows[1].sp, "C");
  for (const auto& row : cmp.table.rows) {
    EXPECT_EQ(row.use_case, "toy");
    EXPECT_TRUE(row.smote.has_value());
    EXPECT_TRUE(row.rus.has_value());
    EXPECT_EQ(row.n_test, splits.sp_splits.at(row.sp).test.num_rows());
  }
  EXPECT_TRUE(check_leakage(cmp.audit).clean);
  EXPECT_EQ(ComparisonTable::from_json(cmp.table.to_json()).to_json(), cmp.table.to_json());
}

TEST(Identify, SmallShiftedSubpopulationIsFlaggedAcrossSeeds) {
  int flagged = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SimConfig cfg = two_group_sim(1000, 1000, 100 + seed);
    cfg.subpops.push_back({"C", 50, {1.5, 1.0}, {1.0, 1.0}, std::nullopt, std::nullopt});
    cfg.categoricals[0].probabilities["C"] = {0.3, 0.4, 0.3};
    const Dataset d = preprocess(simulate_cohort(cfg));
    const SweepConfig s = sweep_config({0.0}, seed);
    const IdentifyResult r = identify_underperforming(prepare_splits(d, s), s, PredictorConfig{});
    flagged += std::find(r.underperforming.begin(), r.underperforming.end(), "C") != r.underperforming.end();
  }
  EXPECT_GE(flagged, 8);
}

TEST(Comparison, OracleAugmentationHelpsTheMinorityAcrossSeeds) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SimConfig cfg = two_group_sim(2000, 80, 200 + seed);
    const Dataset d = preprocess(simulate_cohort(cfg));
    const SweepConfig s = sweep_config({0.0, 0.5, 1.0, 2.0, 5.0}, seed);
    const StudySplits splits = prepare_splits(d, s);
    const SweepOutcome sw = run_sweep(splits, {"B"}, s, oracle_factory(cfg), small_predictor());
    const ComparisonOutcome cmp = run_baseline_comparison(d, splits, {"B"}, s, small_predictor(), sw.result);
    wins += *cmp.table.rows[0].ensemble_gan >= *cmp.table.rows[0].ensemble;
  }
  EXPECT_GE(wins, 8);
}
