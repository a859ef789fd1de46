#pragma once

// End-to-end runs driven by one JSON config, and the on-disk results layout:
//
//   manifest.json      input hash, configs, seeds, point statuses, timings,
//                      and a sha256 for every other file listed here
//   identify.json      baseline ROCAUC per subpopulation and the flagged set
//   sp_sizes.csv       sp,total,train,test,excluded
//   sweep.json         every (sp, fraction) point with its metric reports
//   curves.csv         sp,fraction,model_scope,metric,value
//   comparison.json    comparison table plus resampler reports
//   comparison.csv / comparison.txt
//   audit.json         leakage audit verdict
//   generators/<sp>.gen
//   report/            written by emit_report

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ensgan/cohort_sim.hpp"
#include "ensgan/pipeline.hpp"
#include "ensgan/predictors.hpp"
#include "ensgan/sweep.hpp"
#include "ensgan/tabgan.hpp"
#include "json.hpp"

namespace ensgan {

enum class RunStage { kIdentify, kSweep, kCompare };

struct RunConfig {
  // Either a dataset plus schema document, or a simulator config.
  std::optional<std::filesystem::path> dataset_path;
  std::optional<std::filesystem::path> schema_path;
  std::optional<SimConfig> simulator;

  SweepConfig sweep;
  GanConfig gan;
  PredictorConfig predictor;
  std::string generator = "tabgan";  // or "oracle" (simulator runs only)
  std::vector<std::string> metrics = metric_names();
  std::string plot_metric = kRocAuc;
  bool plots = false;
  std::string use_case;
  TargetMode target_mode = TargetMode::kUnderperforming;
  std::vector<std::string> targets;
  std::filesystem::path out_dir = "results";

  void validate() const;
  // Relative paths in the document resolve against base_dir.
  static RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// Loads (or simulates) and preprocesses the input. input_hash receives the
// sha256 of the raw bytes the dataset was parsed from.
Dataset load_run_input(const RunConfig& cfg, std::string* input_hash = nullptr);

GeneratorFactory make_generator_factory(const RunConfig& cfg);

struct RunSummary {
  int exit_code = 0;
  std::string status;  // "complete", "partial" or "failed"
  std::string message;
  std::vector<std::string> targets;
};

// Runs up to `last` and writes the results layout. Module errors are caught,
// recorded in the manifest with status "failed", and mapped to an exit code;
// whatever was completed before the failure stays on disk.
RunSummary run_end_to_end(const RunConfig& cfg, RunStage last = RunStage::kCompare);

// Files listed in the manifest that are missing or fail their hash.
std::vector<std::string> verify_manifest(const std::filesystem::path& results_dir);

// Writes report/report.txt, report/comparison.txt, report/comparison.csv and,
// with plots, report/plots/*.svg. Reads only the results directory.
void emit_report(const std::filesystem::path& results_dir, const std::string& metric, bool plots);

}  // namespace ensgan
