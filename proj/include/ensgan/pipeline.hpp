#pragma once

// The five-step study: identify under-performing subpopulations, split,
// fit one generator per subpopulation, sweep augmentation fractions for the
// subpopulation and full-population models, and compare against the
// resampling baselines.
//
// Seeds: every random choice is keyed by derive_seed(master, tags...), with
// (subpopulation, fraction) in the tags of per-point work, so results do not
// depend on worker count or scheduling.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ensgan/dataset.hpp"
#include "ensgan/generator.hpp"
#include "ensgan/predictors.hpp"
#include "ensgan/resamplers.hpp"
#include "ensgan/sweep.hpp"
#include "json.hpp"

namespace ensgan {

namespace seeds {
std::uint64_t split(std::uint64_t master, const std::string& sp);
std::uint64_t generator(std::uint64_t master, const std::string& sp);
std::uint64_t synthetic(std::uint64_t master, const std::string& sp, double fraction);
std::uint64_t sp_model(std::uint64_t master, const std::string& sp, double fraction);
std::uint64_t fullpop_model(std::uint64_t master, const std::string& sp, double fraction);
std::uint64_t fullpop_baseline(std::uint64_t master);
}  // namespace seeds

inline constexpr const char* kExcludedSplitKey = "<excluded>";

// Every subpopulation split independently, 65/35 stratified by outcome.
// Rows of excluded markers get their own split and join the full-population
// train/test sets only.
struct StudySplits {
  SubpopulationPartition partition;
  std::map<std::string, SplitPair> sp_splits;
  std::optional<SplitPair> excluded_split;
  Dataset full_train;
  Dataset full_test;
};

StudySplits prepare_splits(const Dataset& d, const SweepConfig& cfg);

// ---------------------------------------------------------------------------
// Provenance audit

struct AuditEntry {
  std::string subject;
  bool is_generator = false;
  std::vector<RowId> trained_on;  // sorted real ids
  std::shared_ptr<const std::vector<RowId>> evaluated_on;  // sorted; must be disjoint
  std::shared_ptr<const std::vector<RowId>> allowed;  // generators: trained_on must be a subset
};

class LeakageAudit {
 public:
  void add_model(std::string subject, const TrainedModel& model,
                 std::shared_ptr<const std::vector<RowId>> evaluated_on);
  void add_generator(std::string subject, const SyntheticGenerator& gen,
                     std::shared_ptr<const std::vector<RowId>> test_ids,
                     std::shared_ptr<const std::vector<RowId>> train_ids);
  void merge(const LeakageAudit& other);
  const std::vector<AuditEntry>& entries() const { return entries_; }

 private:
  std::vector<AuditEntry> entries_;
};

struct AuditVerdict {
  bool clean = true;
  std::size_t models_checked = 0;
  std::size_t generators_checked = 0;
  std::vector<std::string> violations;
  nlohmann::json to_json() const;
};

AuditVerdict check_leakage(const LeakageAudit& audit);

// ---------------------------------------------------------------------------
// Step 1

struct IdentifyResult {
  std::vector<std::string> underperforming;
  std::map<std::string, double> sp_auc;
  double full_auc = 0.0;
  double margin = 0.0;
  std::map<std::string, std::string> unassessable;

  nlohmann::json to_json() const;
  static IdentifyResult from_json(const nlohmann::json& doc);
};

// Flags subpopulations whose baseline (real rows only) test ROCAUC is below
// the full-population baseline ROCAUC minus the margin.
IdentifyResult identify_underperforming(const StudySplits& splits, const SweepConfig& cfg,
                                        const PredictorConfig& pred_cfg);

// ---------------------------------------------------------------------------
// Steps 3-5

// train_sp plus round_half_up(fraction * |train_sp|) generated rows.
Dataset augment_training_set(const Dataset& train_sp, const SyntheticGenerator& gen,
                             double fraction, std::uint64_t seed);

struct SweepOutcome {
  SweepResult result;
  LeakageAudit audit;
  std::map<std::string, std::shared_ptr<const SyntheticGenerator>> generators;
};

// Raised when more than cfg.max_failed_share of the points failed; carries
// the completed result.
class PartialSweepError : public SweepError {
 public:
  PartialSweepError(const std::string& what, SweepOutcome outcome)
      : SweepError(what), outcome_(std::make_shared<SweepOutcome>(std::move(outcome))) {}
  const SweepOutcome& outcome() const { return *outcome_; }

 private:
  std::shared_ptr<SweepOutcome> outcome_;
};

SweepOutcome run_sweep(const StudySplits& splits, const std::vector<std::string>& targets,
                       const SweepConfig& cfg, const GeneratorFactory& factory,
                       const PredictorConfig& pred_cfg);

// ---------------------------------------------------------------------------
// Baselines

struct ComparisonRow {
  std::string use_case;
  std::string sp;
  std::size_t n_test = 0;
  std::optional<double> smote;
  std::optional<double> rus;
  std::optional<double> ensemble;
  std::optional<double> ensemble_gan;
  std::optional<double> selected_fraction;
  std::map<std::string, std::string> notes;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  nlohmann::json to_json() const;
  static ComparisonTable from_json(const nlohmann::json& doc);
};

struct ComparisonOutcome {
  ComparisonTable table;
  nlohmann::json details;  // resample reports and per-protocol test sizes
  LeakageAudit audit;
};

// SMOTE: 65/35 split stratified by population marker, SMOTE on train with
// the marker as class, per-subpopulation models. RUS: undersample the whole
// dataset with the marker as class, then per-subpopulation 65/35 splits
// stratified by outcome. Ens.: subpopulation model on real rows (same seed as
// the 0-fraction sweep point). Ens. GAN: best sweep point.
ComparisonOutcome run_baseline_comparison(const Dataset& d, const StudySplits& splits,
                                          const std::vector<std::string>& targets,
                                          const SweepConfig& cfg, const PredictorConfig& pred_cfg,
                                          const SweepResult& sweep,
                                          const std::string& use_case = "");

// ---------------------------------------------------------------------------
// Whole study

enum class TargetMode { kUnderperforming, kAll, kExplicit };

struct StudyOptions {
  std::string use_case;
  TargetMode target_mode = TargetMode::kUnderperforming;
  std::vector<std::string> explicit_targets;
};

struct StudyResult {
  IdentifyResult identify;
  std::vector<std::string> targets;
  SweepResult sweep;
  ComparisonTable table;
  nlohmann::json comparison_details;
  LeakageAudit audit;
  std::map<std::string, std::shared_ptr<const SyntheticGenerator>> generators;
};

StudyResult run_study(const Dataset& preprocessed, const SweepConfig& cfg,
                      const GeneratorFactory& factory, const PredictorConfig& pred_cfg,
                      const StudyOptions& options);

}  // namespace ensgan
