#include "ensgan/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <thread>

#include "ensgan/common.hpp"
#include "ensgan/metrics.hpp"

namespace ensgan {
namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// by index is rethrown after all threads finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(workers, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::shared_ptr<const std::vector<RowId>> ids_of(const Dataset& d) {
  return std::make_shared<const std::vector<RowId>>(sorted_real_ids(d));
}

PredictorConfig with_seed(PredictorConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

MetricReport evaluate(const TrainedModel& model, const Dataset& test, double threshold) {
  const std::vector<double> scores = predict_scores(model, test);
  return metric_suite(test.binary_labels(), scores, threshold);
}

std::string point_label(const std::string& sp, double fraction) {
  return "sp '" + sp + "', fraction " + std::to_string(fraction);
}

Dataset rows_with_pm(const Dataset& d, const std::string& pm, const std::string& tag) {
  const std::size_t col = d.schema().pm_index();
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < d.num_rows(); ++r) {
    if (d.category_at(r, col) == pm) rows.push_back(r);
  }
  return d.select(rows, d.provenance() + tag);
}

// Synthetic rows for one sweep point, in the training set's code tables.
Dataset synthesize(const Dataset& train_sp, const SyntheticGenerator& gen, double fraction,
                   std::uint64_t seed) {
  if (!(fraction >= 0.0)) throw ConfigError("augmentation fraction must be >= 0");
  const auto n = static_cast<std::size_t>(
      round_half_up(fraction * static_cast<double>(train_sp.num_rows())));
  Dataset syn = gen.generate(n, seed);
  if (!(syn.schema() == train_sp.schema())) {
    throw SchemaError("generator '" + gen.name() + "' produced a different schema");
  }
  if (syn.num_rows() != n) {
    throw PipelineError("generator '" + gen.name() + "' returned " +
                        std::to_string(syn.num_rows()) + " rows, asked for " + std::to_string(n));
  }
  return syn.recode_to(train_sp.categories());
}

}  // namespace

namespace seeds {
std::uint64_t split(std::uint64_t master, const std::string& sp) {
  return derive_seed(master, {"split", sp});
}
std::uint64_t generator(std::uint64_t master, const std::string& sp) {
  return derive_seed(master, {"generator", sp});
}
std::uint64_t synthetic(std::uint64_t master, const std::string& sp, double fraction) {
  return derive_seed(master, {"synthetic", sp, fraction_key(fraction)});
}
std::uint64_t sp_model(std::uint64_t master, const std::string& sp, double fraction) {
  return derive_seed(master, {"sp_model", sp, fraction_key(fraction)});
}
std::uint64_t fullpop_model(std::uint64_t master, const std::string& sp, double fraction) {
  return derive_seed(master, {"fullpop_model", sp, fraction_key(fraction)});
}
std::uint64_t fullpop_baseline(std::uint64_t master) {
  return derive_seed(master, {"fullpop_baseline"});
}
}  // namespace seeds

// ---------------------------------------------------------------------------

StudySplits prepare_splits(const Dataset& d, const SweepConfig& cfg) {
  cfg.validate();
  StudySplits out;
  out.partition = partition_by_pm(d, cfg.excluded_pms);
  if (out.partition.subsets.empty()) throw DataError("no subpopulations left after exclusion");
  const std::string label = d.schema().column(d.schema().label_index()).name;

  std::optional<Dataset> train, test;
  auto append = [](std::optional<Dataset>& acc, const Dataset& part) {
    acc = acc ? acc->concat(part, acc->provenance()) : part;
  };
  for (const auto& [sp, subset] : out.partition.subsets) {
    SplitPair split =
        stratified_split(subset, cfg.train_fraction, label, seeds::split(cfg.master_seed, sp));
    append(train, split.train);
    append(test, split.test);
    out.sp_splits.emplace(sp, std::move(split));
  }
  if (!out.partition.excluded_rows.empty()) {
    out.excluded_split = stratified_split(out.partition.excluded_rows, cfg.train_fraction, label,
                                          seeds::split(cfg.master_seed, kExcludedSplitKey));
    append(train, out.excluded_split->train);
    append(test, out.excluded_split->test);
  }
  out.full_train = train->with_provenance(d.provenance() + "|fullpop|split=train");
  out.full_test = test->with_provenance(d.provenance() + "|fullpop|split=test");
  return out;
}

// ---------------------------------------------------------------------------

void LeakageAudit::add_model(std::string subject, const TrainedModel& model,
                             std::shared_ptr<const std::vector<RowId>> evaluated_on) {
  entries_.push_back({std::move(subject), false, model.provenance.real_row_ids,
                      std::move(evaluated_on), nullptr});
}

void LeakageAudit::add_generator(std::string subject, const SyntheticGenerator& gen,
                                 std::shared_ptr<const std::vector<RowId>> test_ids,
                                 std::shared_ptr<const std::vector<RowId>> train_ids) {
  entries_.push_back({std::move(subject), true, gen.training_row_ids(), std::move(test_ids),
                      std::move(train_ids)});
}

void LeakageAudit::merge(const LeakageAudit& other) {
  entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

nlohmann::json AuditVerdict::to_json() const {
  return {{"clean", clean},
          {"models_checked", models_checked},
          {"generators_checked", generators_checked},
          {"violations", violations}};
}

AuditVerdict check_leakage(const LeakageAudit& audit) {
  AuditVerdict v;
  for (const AuditEntry& e : audit.entries()) {
    (e.is_generator ? v.generators_checked : v.models_checked) += 1;
    if (!std::is_sorted(e.trained_on.begin(), e.trained_on.end())) {
      v.violations.push_back(e.subject + ": training ids not sorted");
      continue;
    }
    if (e.evaluated_on) {
      std::vector<RowId> overlap;
      std::set_intersection(e.trained_on.begin(), e.trained_on.end(), e.evaluated_on->begin(),
                            e.evaluated_on->end(), std::back_inserter(overlap));
      if (!overlap.empty()) {
        v.violations.push_back(e.subject + ": " + std::to_string(overlap.size()) +
                               " training rows also in its evaluation set");
      }
    }
    if (e.allowed && !std::includes(e.allowed->begin(), e.allowed->end(), e.trained_on.begin(),
                                    e.trained_on.end())) {
      v.violations.push_back(e.subject + ": trained on rows outside its training split");
    }
  }
  v.clean = v.violations.empty();
  return v;
}

// ---------------------------------------------------------------------------

nlohmann::json IdentifyResult::to_json() const {
  return {{"underperforming", underperforming},
          {"sp_auc", sp_auc},
          {"full_auc", full_auc},
          {"margin", margin},
          {"unassessable", unassessable}};
}

IdentifyResult IdentifyResult::from_json(const nlohmann::json& doc) {
  IdentifyResult r;
  r.underperforming = doc.at("underperforming").get<std::vector<std::string>>();
  r.sp_auc = doc.at("sp_auc").get<std::map<std::string, double>>();
  r.full_auc = doc.at("full_auc").get<double>();
  r.margin = doc.at("margin").get<double>();
  r.unassessable = doc.at("unassessable").get<std::map<std::string, std::string>>();
  return r;
}

IdentifyResult identify_underperforming(const StudySplits& splits, const SweepConfig& cfg,
                                        const PredictorConfig& pred_cfg) {
  IdentifyResult out;
  out.margin = cfg.underperformance_margin;
  const TrainedModel full = train_classifier(
      splits.full_train, with_seed(pred_cfg, seeds::fullpop_baseline(cfg.master_seed)),
      "full-population baseline");
  out.full_auc = roc_auc(splits.full_test.binary_labels(), predict_scores(full, splits.full_test));

  std::vector<std::string> names;
  for (const auto& [sp, split] : splits.sp_splits) names.push_back(sp);
  std::vector<std::optional<double>> aucs(names.size());
  std::vector<std::string> reasons(names.size());
  parallel_for(names.size(), cfg.workers, [&](std::size_t i) {
    const SplitPair& split = splits.sp_splits.at(names[i]);
    try {
      const TrainedModel m = train_classifier(
          split.train, with_seed(pred_cfg, seeds::sp_model(cfg.master_seed, names[i], 0.0)),
          point_label(names[i], 0.0));
      aucs[i] = roc_auc(split.test.binary_labels(), predict_scores(m, split.test));
    } catch (const TrainingError& e) {
      reasons[i] = e.what();
    } catch (const MetricUndefinedError& e) {
      reasons[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!aucs[i]) {
      warn("subpopulation '" + names[i] + "' is unassessable: " + reasons[i]);
      out.unassessable[names[i]] = reasons[i];
      continue;
    }
    out.sp_auc[names[i]] = *aucs[i];
    if (*aucs[i] < out.full_auc - cfg.underperformance_margin) {
      out.underperforming.push_back(names[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Dataset augment_training_set(const Dataset& train_sp, const SyntheticGenerator& gen,
                             double fraction, std::uint64_t seed) {
  const Dataset syn = synthesize(train_sp, gen, fraction, seed);
  if (syn.empty()) return train_sp;
  return train_sp.concat(syn, train_sp.provenance() + "|augmented=" + fraction_key(fraction));
}

SweepOutcome run_sweep(const StudySplits& splits, const std::vector<std::string>& targets,
                       const SweepConfig& cfg, const GeneratorFactory& factory,
                       const PredictorConfig& pred_cfg) {
  cfg.validate();
  if (targets.empty()) throw ConfigError("run_sweep needs at least one target subpopulation");
  for (const auto& sp : targets) {
    if (!splits.sp_splits.count(sp)) {
      throw ConfigError("target '" + sp + "' is not a subpopulation of the dataset");
    }
  }
  std::vector<double> fractions = cfg.fractions;
  std::sort(fractions.begin(), fractions.end());
  const bool needs_generator = fractions.back() > 0.0;

  SweepOutcome outcome;
  outcome.result.fractions = fractions;

  auto full_test_ids = ids_of(splits.full_test);
  std::vector<RowId> all_test;
  for (const auto& [sp, split] : splits.sp_splits) {
    for (RowId id : split.test.row_ids()) all_test.push_back(id);
  }
  if (splits.excluded_split) {
    for (RowId id : splits.excluded_split->test.row_ids()) all_test.push_back(id);
  }
  std::sort(all_test.begin(), all_test.end());
  auto all_test_ids = std::make_shared<const std::vector<RowId>>(std::move(all_test));

  // Step 3: one generator per target.
  std::vector<std::shared_ptr<const SyntheticGenerator>> gens(targets.size());
  std::vector<std::string> gen_errors(targets.size());
  if (needs_generator) {
    parallel_for(targets.size(), cfg.workers, [&](std::size_t i) {
      try {
        gens[i] = factory(splits.sp_splits.at(targets[i]).train, targets[i],
                          seeds::generator(cfg.master_seed, targets[i]));
      } catch (const LeakageError&) {
        throw;
      } catch (const Error& e) {
        gen_errors[i] = e.what();
      }
    });
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const SplitPair& split = splits.sp_splits.at(targets[i]);
    outcome.result.subpops.push_back(
        {targets[i], split.train.num_rows() + split.test.num_rows(), split.train.num_rows(),
         split.test.num_rows(), seeds::split(cfg.master_seed, targets[i]),
         seeds::generator(cfg.master_seed, targets[i]), gens[i] ? gens[i]->name() : "",
         gen_errors[i]});
    if (gens[i]) {
      outcome.generators[targets[i]] = gens[i];
      outcome.audit.add_generator("generator[" + targets[i] + "]", *gens[i], all_test_ids,
                                  ids_of(split.train));
    } else if (!gen_errors[i].empty()) {
      warn("generator for '" + targets[i] + "' failed: " + gen_errors[i]);
    }
  }

  // Steps 4-5: every (sp, fraction) point is independent.
  struct Task {
    std::size_t target;
    double fraction;
  };
  std::vector<Task> tasks;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (double f : fractions) tasks.push_back({t, f});
  }
  std::vector<SweepPoint> points(tasks.size());
  std::vector<LeakageAudit> audits(tasks.size());
  parallel_for(tasks.size(), cfg.workers, [&](std::size_t i) {
    const std::string& sp = targets[tasks[i].target];
    const double f = tasks[i].fraction;
    const SplitPair& split = splits.sp_splits.at(sp);
    SweepPoint& p = points[i];
    p.sp = sp;
    p.fraction = f;
    p.real_train_rows = split.train.num_rows();
    p.synth_seed = seeds::synthetic(cfg.master_seed, sp, f);
    p.sp_model_seed = seeds::sp_model(cfg.master_seed, sp, f);
    p.fullpop_seed = seeds::fullpop_model(cfg.master_seed, sp, f);
    const std::string where = point_label(sp, f);
    try {
      Dataset sp_train = split.train;
      Dataset fullpop_train = splits.full_train;
      if (f > 0.0) {
        const auto& gen = gens[tasks[i].target];
        if (!gen) throw TrainingError(where + ": no generator (" + gen_errors[tasks[i].target] + ")");
        const Dataset syn = synthesize(split.train, *gen, f, p.synth_seed);
        p.synthetic_rows = syn.num_rows();
        if (!syn.empty()) {
          sp_train = split.train.concat(syn, split.train.provenance() + "|augmented=" + fraction_key(f));
          fullpop_train =
              splits.full_train.concat(syn, splits.full_train.provenance() + "|augmented[" + sp + "]");
        }
      }
      const TrainedModel sp_model =
          train_classifier(sp_train, with_seed(pred_cfg, p.sp_model_seed), where + " (SP model)");
      p.sp_model = evaluate(sp_model, split.test, cfg.threshold);
      const TrainedModel fp_model = train_classifier(
          fullpop_train, with_seed(pred_cfg, p.fullpop_seed), where + " (full-population model)");
      p.fullpop_model = evaluate(fp_model, splits.full_test, cfg.threshold);
      p.fullpop_on_sp = evaluate(fp_model, split.test, cfg.threshold);

      audits[i].add_model("sp_model[" + sp + "," + fraction_key(f) + "]", sp_model,
                          ids_of(split.test));
      audits[i].add_model("fullpop_model[" + sp + "," + fraction_key(f) + "]", fp_model,
                          full_test_ids);
    } catch (const LeakageError&) {
      throw;
    } catch (const Error& e) {
      p.status = PointStatus::kFailed;
      p.error = e.what();
      p.sp_model.reset();
      p.fullpop_model.reset();
      p.fullpop_on_sp.reset();
    }
  });
  outcome.result.points = std::move(points);
  for (const auto& a : audits) outcome.audit.merge(a);

  const std::size_t failed = outcome.result.failed_count();
  if (static_cast<double>(failed) > cfg.max_failed_share * static_cast<double>(tasks.size())) {
    const std::string msg = std::to_string(failed) + " of " + std::to_string(tasks.size()) +
                            " sweep points failed";
    throw PartialSweepError(msg, std::move(outcome));
  }
  for (const auto& p : outcome.result.points) {
    if (!p.ok()) warn("sweep point failed: " + p.error);
  }
  return outcome;
}

// ---------------------------------------------------------------------------

nlohmann::json ComparisonTable::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"use_case", r.use_case},
                         {"sp", r.sp},
                         {"n", r.n_test},
                         {"smote", opt(r.smote)},
                         {"rus", opt(r.rus)},
                         {"ensemble", opt(r.ensemble)},
                         {"ensemble_gan", opt(r.ensemble_gan)},
                         {"selected_fraction", opt(r.selected_fraction)},
                         {"notes", r.notes}});
  }
  return {{"rows", rows_json}};
}

ComparisonTable ComparisonTable::from_json(const nlohmann::json& doc) {
  auto opt = [](const nlohmann::json& row, const char* key) -> std::optional<double> {
    if (!row.contains(key) || row[key].is_null()) return std::nullopt;
    return row[key].get<double>();
  };
  ComparisonTable t;
  try {
    for (const auto& r : doc.at("rows")) {
      ComparisonRow row;
      row.use_case = r.value("use_case", std::string());
      row.sp = r.at("sp").get<std::string>();
      row.n_test = r.at("n").get<std::size_t>();
      row.smote = opt(r, "smote");
      row.rus = opt(r, "rus");
      row.ensemble = opt(r, "ensemble");
      row.ensemble_gan = opt(r, "ensemble_gan");
      row.selected_fraction = opt(r, "selected_fraction");
      if (r.contains("notes")) row.notes = r["notes"].get<std::map<std::string, std::string>>();
      t.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed comparison table: ") + e.what());
  }
  return t;
}

ComparisonOutcome run_baseline_comparison(const Dataset& d, const StudySplits& splits,
                                          const std::vector<std::string>& targets,
                                          const SweepConfig& cfg, const PredictorConfig& pred_cfg,
                                          const SweepResult& sweep, const std::string& use_case) {
  ComparisonOutcome out;
  const std::uint64_t master = cfg.master_seed;
  const std::string pm_name = d.schema().column(d.schema().pm_index()).name;
  const std::string label_name = d.schema().column(d.schema().label_index()).name;

  // SMOTE protocol.
  std::optional<SmoteResult> smote;
  std::optional<SplitPair> smote_split;
  std::string smote_error;
  try {
    smote_split = stratified_split(d, cfg.train_fraction, pm_name, derive_seed(master, {"smote_split"}));
    smote = smote_oversample(smote_split->train, pm_name, kDefaultSmoteNeighbors,
                             derive_seed(master, {"smote"}));
    out.details["smote"] = smote->report.to_json();
  } catch (const DataError& e) {
    smote_error = e.what();
    out.details["smote"] = {{"error", smote_error}};
  }

  // RUS protocol.
  std::optional<RusResult> rus;
  std::string rus_error;
  try {
    rus = random_undersample(d, pm_name, derive_seed(master, {"rus"}));
    out.details["rus"] = rus->report.to_json();
  } catch (const DataError& e) {
    rus_error = e.what();
    out.details["rus"] = {{"error", rus_error}};
  }

  std::vector<ComparisonRow> rows(targets.size());
  std::vector<LeakageAudit> audits(targets.size());
  std::vector<nlohmann::json> sizes(targets.size());
  parallel_for(targets.size(), cfg.workers, [&](std::size_t i) {
    const std::string& sp = targets[i];
    const SplitPair& split = splits.sp_splits.at(sp);
    ComparisonRow& row = rows[i];
    row.use_case = use_case;
    row.sp = sp;
    row.n_test = split.test.num_rows();

    try {
      const TrainedModel m = train_classifier(
          split.train, with_seed(pred_cfg, seeds::sp_model(master, sp, 0.0)), point_label(sp, 0.0));
      row.ensemble = roc_auc(split.test.binary_labels(), predict_scores(m, split.test));
      audits[i].add_model("ensemble[" + sp + "]", m, ids_of(split.test));
    } catch (const LeakageError&) {
      throw;
    } catch (const Error& e) {
      row.notes["ensemble"] = e.what();
    }

    if (smote) {
      try {
        const Dataset train = rows_with_pm(smote->data, sp, "|sp=" + sp);
        const Dataset test = rows_with_pm(smote_split->test, sp, "|sp=" + sp);
        sizes[i]["smote_test"] = test.num_rows();
        const TrainedModel m = train_classifier(
            train, with_seed(pred_cfg, derive_seed(master, {"smote_model", sp})), "SMOTE " + sp);
        row.smote = roc_auc(test.binary_labels(), predict_scores(m, test));
        audits[i].add_model("smote[" + sp + "]", m, ids_of(test));
      } catch (const LeakageError&) {
        throw;
      } catch (const Error& e) {
        row.notes["smote"] = e.what();
      }
    } else {
      row.notes["smote"] = smote_error;
    }

    if (rus) {
      try {
        const Dataset sp_rows = rows_with_pm(rus->data, sp, "|sp=" + sp);
        const SplitPair rs = stratified_split(sp_rows, cfg.train_fraction, label_name,
                                              derive_seed(master, {"rus_split", sp}));
        sizes[i]["rus_test"] = rs.test.num_rows();
        const TrainedModel m = train_classifier(
            rs.train, with_seed(pred_cfg, derive_seed(master, {"rus_model", sp})), "RUS " + sp);
        row.rus = roc_auc(rs.test.binary_labels(), predict_scores(m, rs.test));
        audits[i].add_model("rus[" + sp + "]", m, ids_of(rs.test));
      } catch (const LeakageError&) {
        throw;
      } catch (const Error& e) {
        row.notes["rus"] = e.what();
      }
    } else {
      row.notes["rus"] = rus_error;
    }

    try {
      const auto [fraction, report] = select_best_fraction(sweep, sp);
      row.ensemble_gan = report.get(kRocAuc);
      row.selected_fraction = fraction;
    } catch (const Error& e) {
      row.notes["ensemble_gan"] = e.what();
    }
  });

  std::vector<std::size_t> order(targets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto total = [&](std::size_t i) { return splits.partition.subsets.at(targets[i]).num_rows(); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (total(a) != total(b)) return total(a) > total(b);
    return targets[a] < targets[b];
  });
  for (std::size_t i : order) {
    out.table.rows.push_back(rows[i]);
    out.details["test_sizes"][targets[i]] = sizes[i];
    out.audit.merge(audits[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

StudyResult run_study(const Dataset& preprocessed, const SweepConfig& cfg,
                      const GeneratorFactory& factory, const PredictorConfig& pred_cfg,
                      const StudyOptions& options) {
  StudyResult out;
  const StudySplits splits = prepare_splits(preprocessed, cfg);
  out.identify = identify_underperforming(splits, cfg, pred_cfg);
  switch (options.target_mode) {
    case TargetMode::kUnderperforming:
      out.targets = out.identify.underperforming;
      break;
    case TargetMode::kAll:
      for (const auto& [sp, auc] : out.identify.sp_auc) out.targets.push_back(sp);
      break;
    case TargetMode::kExplicit:
      out.targets = options.explicit_targets;
      break;
  }
  if (out.targets.empty()) return out;

  SweepOutcome sweep = run_sweep(splits, out.targets, cfg, factory, pred_cfg);
  ComparisonOutcome cmp = run_baseline_comparison(preprocessed, splits, out.targets, cfg, pred_cfg,
                                                  sweep.result, options.use_case);
  out.sweep = std::move(sweep.result);
  out.generators = std::move(sweep.generators);
  out.audit = std::move(sweep.audit);
  out.audit.merge(cmp.audit);
  out.table = std::move(cmp.table);
  out.comparison_details = std::move(cmp.details);
  return out;
}

}  // namespace ensgan
