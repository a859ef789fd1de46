#pragma once

// Augmentation-sweep records and the curves built from them.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ensgan/metrics.hpp"
#include "json.hpp"

namespace ensgan {

// 0% to 1000% of the subpopulation's training size.
const std::vector<double>& default_fractions();

struct SweepConfig {
  std::vector<double> fractions = default_fractions();
  std::uint64_t master_seed = 0;
  std::set<std::string> excluded_pms;
  double underperformance_margin = 0.0;
  double train_fraction = 0.65;
  double threshold = 0.5;
  std::size_t workers = 1;
  // A sweep with a larger share of failed points raises SweepError.
  double max_failed_share = 0.5;

  // Sorts and deduplicates fractions and inserts 0 when absent.
  void normalize();
  void validate() const;
  static SweepConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

enum class PointStatus { kOk, kFailed };

struct SweepPoint {
  std::string sp;
  double fraction = 0.0;
  PointStatus status = PointStatus::kOk;
  std::string error;
  std::size_t real_train_rows = 0;
  std::size_t synthetic_rows = 0;
  std::uint64_t synth_seed = 0;
  std::uint64_t sp_model_seed = 0;
  std::uint64_t fullpop_seed = 0;
  std::optional<MetricReport> sp_model;       // SP model on the SP test split
  std::optional<MetricReport> fullpop_model;  // full-population model on the full test split
  std::optional<MetricReport> fullpop_on_sp;  // full-population model on the SP test split

  bool ok() const { return status == PointStatus::kOk; }
};

struct SubpopSummary {
  std::string sp;
  std::size_t total_rows = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::uint64_t split_seed = 0;
  std::uint64_t generator_seed = 0;
  std::string generator;
  std::string generator_error;
};

struct SweepResult {
  std::vector<double> fractions;
  std::vector<SubpopSummary> subpops;
  std::vector<SweepPoint> points;  // ordered by (subpopulation, fraction)

  const SweepPoint* find(const std::string& sp, double fraction) const;
  std::vector<const SweepPoint*> points_for(const std::string& sp) const;
  std::size_t failed_count() const;

  nlohmann::json to_json() const;
  static SweepResult from_json(const nlohmann::json& doc);
};

struct CurvePoint {
  double fraction = 0.0;
  MetricReport sp_model;
  MetricReport fullpop_model;
  std::optional<MetricReport> fullpop_on_sp;
};

struct Curve {
  std::string sp;
  std::vector<CurvePoint> points;  // strictly increasing fraction, first is 0
};

// One curve per subpopulation from the successful points. Throws
// PipelineError when a subpopulation lacks a successful 0-fraction point.
std::vector<Curve> build_curves(const SweepResult& sweep);

// Columns: sp,fraction,model_scope,metric,value. Undefined values are "NA".
std::string curves_csv(const std::vector<Curve>& curves);

// Fraction maximising SP-model test ROCAUC; ties go to the smaller fraction.
std::pair<double, MetricReport> select_best_fraction(const SweepResult& sweep,
                                                     const std::string& sp);

}  // namespace ensgan
