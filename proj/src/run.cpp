#include "ensgan/run.hpp"

#include <cctype>
#include <chrono>
#include <fstream>
#include <sstream>

#include "ensgan/artifact.hpp"
#include "ensgan/common.hpp"
#include "ensgan/report.hpp"

namespace fs = std::filesystem;

namespace ensgan {
namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// Subpopulation value as a file-name component.
std::string file_stem(const std::string& sp) {
  std::string out;
  for (unsigned char c : sp) out += std::isalnum(c) || c == '-' || c == '.' ? static_cast<char>(c) : '_';
  return out.empty() ? "_" : out;
}

// Keeps the manifest's artifact list in step with what is on disk.
class ResultsWriter {
 public:
  explicit ResultsWriter(fs::path dir) : dir_(std::move(dir)) {}

  void text(const std::string& rel, std::string_view body) {
    write_text_file(dir_ / rel, body);
    files_.push_back(rel);
  }
  void adopt(const std::string& rel) { files_.push_back(rel); }
  const fs::path& dir() const { return dir_; }

  nlohmann::json hashes() const {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& rel : files_) out[rel] = sha256_file(dir_ / rel);
    return out;
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

class StageTimer {
 public:
  void start(std::string name) {
    name_ = std::move(name);
    t0_ = std::chrono::steady_clock::now();
  }
  void stop(nlohmann::json& timings) {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0_;
    timings[name_] = dt.count();
  }
  const std::string& stage() const { return name_; }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
};

std::string sizes_csv(const StudySplits& splits) {
  std::ostringstream out;
  out << "sp,total,train,test,excluded\n";
  for (const auto& [sp, split] : splits.sp_splits) {
    out << sp << ',' << split.train.num_rows() + split.test.num_rows() << ','
        << split.train.num_rows() << ',' << split.test.num_rows() << ",0\n";
  }
  if (splits.excluded_split) {
    const Dataset& ex = splits.partition.excluded_rows;
    const std::size_t pm = ex.schema().pm_index();
    std::map<std::string, std::size_t> counts;
    for (std::size_t r = 0; r < ex.num_rows(); ++r) counts[ex.category_at(r, pm)] += 1;
    for (const auto& [sp, n] : counts) out << sp << ',' << n << ",NA,NA,1\n";
  }
  return out.str();
}

std::string filtered_curves_csv(const std::vector<Curve>& curves,
                                const std::vector<std::string>& metrics) {
  std::vector<Curve> out = curves;
  for (auto& c : out) {
    for (auto& p : c.points) {
      auto keep = [&](MetricReport& r) {
        std::map<std::string, std::optional<double>> v;
        for (const auto& m : metrics) {
          if (r.values.count(m)) v[m] = r.values.at(m);
        }
        r.values = std::move(v);
      };
      keep(p.sp_model);
      keep(p.fullpop_model);
      if (p.fullpop_on_sp) keep(*p.fullpop_on_sp);
    }
  }
  return curves_csv(out);
}

// Curves for subpopulations that have a successful 0-fraction point; the
// others are reported in the returned gaps.
std::vector<Curve> curves_with_gaps(const SweepResult& sweep, std::vector<std::string>& gaps) {
  std::vector<Curve> out;
  for (const auto& sub : sweep.subpops) {
    SweepResult one;
    one.fractions = sweep.fractions;
    for (const auto& p : sweep.points) {
      if (p.sp == sub.sp) one.points.push_back(p);
    }
    try {
      for (auto& c : build_curves(one)) out.push_back(std::move(c));
    } catch (const PipelineError& e) {
      gaps.push_back(e.what());
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
  if (simulator.has_value() == dataset_path.has_value()) {
    throw ConfigError("give exactly one of 'dataset' or 'simulator'");
  }
  if (dataset_path && !schema_path) throw ConfigError("'dataset' needs 'schema'");
  if (simulator) simulator->validate();
  if (generator != "tabgan" && generator != "oracle") {
    throw ConfigError("generator must be 'tabgan' or 'oracle', got '" + generator + "'");
  }
  if (generator == "oracle" && !simulator) {
    throw ConfigError("the oracle generator needs a simulator input");
  }
  for (const auto& m : metrics) {
    if (!is_metric_name(m)) throw ConfigError("unknown metric '" + m + "'");
  }
  if (!is_metric_name(plot_metric)) throw ConfigError("unknown metric '" + plot_metric + "'");
  if (target_mode == TargetMode::kExplicit && targets.empty()) {
    throw ConfigError("explicit target list is empty");
  }
  if (out_dir.empty()) throw ConfigError("output directory not set");
  sweep.validate();
  gan.validate();
  predictor.validate();
}

RunConfig RunConfig::from_json(const nlohmann::json& doc, const fs::path& base_dir) {
  RunConfig c;
  try {
    if (doc.contains("dataset")) c.dataset_path = resolve(doc["dataset"].get<std::string>(), base_dir);
    if (doc.contains("schema")) c.schema_path = resolve(doc["schema"].get<std::string>(), base_dir);
    if (doc.contains("simulator")) {
      const auto& s = doc["simulator"];
      if (s.is_string()) {
        const fs::path p = resolve(s.get<std::string>(), base_dir);
        c.simulator = SimConfig::from_json(nlohmann::json::parse(read_text_file(p)));
      } else {
        c.simulator = SimConfig::from_json(s);
      }
    }
    if (doc.contains("sweep")) c.sweep = SweepConfig::from_json(doc["sweep"]);
    if (doc.contains("excluded_pms")) {
      c.sweep.excluded_pms = doc["excluded_pms"].get<std::set<std::string>>();
    }
    if (doc.contains("gan")) c.gan = GanConfig::from_json(doc["gan"]);
    if (doc.contains("predictor")) c.predictor = PredictorConfig::from_json(doc["predictor"]);
    c.generator = doc.value("generator", c.generator);
    if (doc.contains("metrics")) c.metrics = doc["metrics"].get<std::vector<std::string>>();
    c.plot_metric = doc.value("plot_metric", c.plot_metric);
    c.plots = doc.value("plots", c.plots);
    c.use_case = doc.value("use_case", c.use_case);
    if (doc.contains("targets")) {
      const auto& t = doc["targets"];
      if (t.is_array()) {
        c.target_mode = TargetMode::kExplicit;
        c.targets = t.get<std::vector<std::string>>();
      } else if (t == "all") {
        c.target_mode = TargetMode::kAll;
      } else if (t == "underperforming") {
        c.target_mode = TargetMode::kUnderperforming;
      } else {
        throw ConfigError("targets must be 'underperforming', 'all' or a list");
      }
    }
    if (doc.contains("out")) c.out_dir = resolve(doc["out"].get<std::string>(), base_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return from_json(doc, path.parent_path());
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  if (dataset_path) j["dataset"] = dataset_path->string();
  if (schema_path) j["schema"] = schema_path->string();
  if (simulator) j["simulator"] = simulator->to_json();
  j["sweep"] = sweep.to_json();
  j["gan"] = gan.to_json();
  j["predictor"] = predictor.to_json();
  j["generator"] = generator;
  j["metrics"] = metrics;
  j["plot_metric"] = plot_metric;
  j["plots"] = plots;
  j["use_case"] = use_case;
  switch (target_mode) {
    case TargetMode::kUnderperforming: j["targets"] = "underperforming"; break;
    case TargetMode::kAll: j["targets"] = "all"; break;
    case TargetMode::kExplicit: j["targets"] = targets; break;
  }
  j["out"] = out_dir.string();
  return j;
}

// ---------------------------------------------------------------------------

Dataset load_run_input(const RunConfig& cfg, std::string* input_hash) {
  if (cfg.simulator) {
    const Dataset raw = simulate_cohort(*cfg.simulator);
    if (input_hash) *input_hash = sha256_hex(format_dataset(raw));
    return preprocess(raw);
  }
  const SchemaDocument sd = load_schema_document(*cfg.schema_path);
  const std::string text = read_text_file(*cfg.dataset_path);
  if (input_hash) *input_hash = sha256_hex(text);
  return preprocess(parse_dataset(text, sd.schema, sd.options, "file:" + cfg.dataset_path->string()));
}

GeneratorFactory make_generator_factory(const RunConfig& cfg) {
  if (cfg.generator == "oracle") return oracle_factory(*cfg.simulator);
  return tabgan_factory(cfg.gan);
}

RunSummary run_end_to_end(const RunConfig& cfg, RunStage last) {
  cfg.validate();
  const fs::path out = cfg.out_dir;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw ConfigError("cannot create output directory " + out.string());
  }

  ResultsWriter writer(out);
  RunSummary summary;
  nlohmann::json manifest;
  manifest["format"] = "ensgan-results";
  manifest["version"] = 1;
  manifest["config"] = cfg.to_json();
  manifest["split_protocols"] = {
      {"study", "per subpopulation, stratified by outcome"},
      {"smote", "whole dataset, stratified by population marker"},
      {"rus", "after undersampling, per subpopulation, stratified by outcome"},
      {"train_fraction", cfg.sweep.train_fraction}};
  nlohmann::json timings = nlohmann::json::object();
  StageTimer timer;
  std::optional<std::string> partial_error;

  try {
    timer.start("load");
    std::string hash;
    const Dataset d = load_run_input(cfg, &hash);
    manifest["input"] = {{"sha256", hash},
                         {"rows_after_preprocess", d.num_rows()},
                         {"schema", d.schema().to_json()},
                         {"schema_fingerprint", d.schema().fingerprint()},
                         {"code_tables", code_tables_json(d)}};
    timer.stop(timings);

    timer.start("split");
    const StudySplits splits = prepare_splits(d, cfg.sweep);
    writer.text("sp_sizes.csv", sizes_csv(splits));
    nlohmann::json seeds_json;
    seeds_json["master"] = cfg.sweep.master_seed;
    seeds_json["fullpop_baseline"] = seeds::fullpop_baseline(cfg.sweep.master_seed);
    for (const auto& [sp, split] : splits.sp_splits) {
      seeds_json["split"][sp] = seeds::split(cfg.sweep.master_seed, sp);
      seeds_json["generator"][sp] = seeds::generator(cfg.sweep.master_seed, sp);
    }
    if (splits.excluded_split) {
      seeds_json["split"][kExcludedSplitKey] = seeds::split(cfg.sweep.master_seed, kExcludedSplitKey);
    }
    manifest["seeds"] = seeds_json;
    timer.stop(timings);

    timer.start("identify");
    const IdentifyResult identify = identify_underperforming(splits, cfg.sweep, cfg.predictor);
    writer.text("identify.json", dump(identify.to_json()));
    switch (cfg.target_mode) {
      case TargetMode::kUnderperforming: summary.targets = identify.underperforming; break;
      case TargetMode::kAll:
        for (const auto& [sp, auc] : identify.sp_auc) summary.targets.push_back(sp);
        break;
      case TargetMode::kExplicit:
        for (const auto& sp : cfg.targets) {
          if (!splits.sp_splits.count(sp)) {
            throw ConfigError("target '" + sp + "' is not a subpopulation of the dataset");
          }
        }
        summary.targets = cfg.targets;
        break;
    }
    manifest["targets"] = summary.targets;
    timer.stop(timings);

    if (last != RunStage::kIdentify) {
      timer.start("sweep");
      SweepOutcome sweep;
      if (!summary.targets.empty()) {
        try {
          sweep = run_sweep(splits, summary.targets, cfg.sweep, make_generator_factory(cfg),
                            cfg.predictor);
        } catch (const PartialSweepError& e) {
          sweep = e.outcome();
          partial_error = e.what();
        }
      } else {
        sweep.result.fractions = cfg.sweep.fractions;
      }
      for (const auto& [sp, gen] : sweep.generators) {
        if (const auto* tg = dynamic_cast<const TabGanGenerator*>(gen.get())) {
          const std::string rel = "generators/" + file_stem(sp) + ".gen";
          fs::create_directories(out / "generators");
          save_generator(tg->model(), out / rel);
          writer.adopt(rel);
          writer.text("generators/" + file_stem(sp) + ".loss.csv", tg->model().loss_trace_csv());
        }
      }
      writer.text("sweep.json", dump(sweep.result.to_json()));
      std::vector<std::string> gaps;
      const auto curves = curves_with_gaps(sweep.result, gaps);
      writer.text("curves.csv", filtered_curves_csv(curves, cfg.metrics));
      nlohmann::json points = nlohmann::json::array();
      for (const auto& p : sweep.result.points) {
        points.push_back({{"sp", p.sp},
                          {"fraction", p.fraction},
                          {"status", p.ok() ? "ok" : "failed"},
                          {"error", p.error}});
      }
      manifest["points"] = points;
      manifest["curve_gaps"] = gaps;
      timer.stop(timings);
      if (partial_error) throw SweepError(*partial_error);

      LeakageAudit audit = sweep.audit;
      if (last == RunStage::kCompare) {
        timer.start("compare");
        ComparisonOutcome cmp;
        if (!summary.targets.empty()) {
          cmp = run_baseline_comparison(d, splits, summary.targets, cfg.sweep, cfg.predictor,
                                        sweep.result, cfg.use_case);
        }
        nlohmann::json cj = cmp.table.to_json();
        cj["details"] = cmp.details;
        writer.text("comparison.json", dump(cj));
        writer.text("comparison.csv", comparison_table_csv(cmp.table));
        writer.text("comparison.txt", comparison_table_text(cmp.table));
        audit.merge(cmp.audit);
        timer.stop(timings);
      }

      const AuditVerdict verdict = check_leakage(audit);
      writer.text("audit.json", dump(verdict.to_json()));
      if (!verdict.clean) throw LeakageError(verdict.violations.front());
    }
    summary.status = "complete";
    if (summary.targets.empty()) summary.message = kNoTargetsMessage;
  } catch (const Error& e) {
    timer.stop(timings);
    summary.status = partial_error ? "partial" : "failed";
    summary.exit_code = exit_code_for(e.kind());
    summary.message = "[" + timer.stage() + "] " + e.what();
  }

  manifest["status"] = summary.status;
  manifest["message"] = summary.message;
  manifest["timings_seconds"] = timings;
  manifest["artifacts"] = writer.hashes();
  write_text_file(out / "manifest.json", dump(manifest));

  try {
    emit_report(out, cfg.plot_metric, cfg.plots);
  } catch (const Error& e) {
    warn(std::string("report not written: ") + e.what());
  }
  return summary;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> verify_manifest(const fs::path& results_dir) {
  const nlohmann::json manifest = read_json(results_dir / "manifest.json");
  std::vector<std::string> problems;
  const nlohmann::json artifacts = manifest.value("artifacts", nlohmann::json::object());
  for (const auto& [rel, hash] : artifacts.items()) {
    const fs::path p = results_dir / rel;
    if (!fs::exists(p)) {
      problems.push_back(rel + ": missing");
    } else if (sha256_file(p) != hash.get<std::string>()) {
      problems.push_back(rel + ": hash mismatch");
    }
  }
  return problems;
}

void emit_report(const fs::path& results_dir, const std::string& metric, bool plots) {
  if (!is_metric_name(metric)) throw ConfigError("unknown metric '" + metric + "'");
  const fs::path manifest_path = results_dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw DataError("no manifest.json in " + results_dir.string());
  }
  const nlohmann::json manifest = read_json(manifest_path);
  const std::vector<std::string> problems = verify_manifest(results_dir);
  const fs::path rdir = results_dir / "report";

  std::ostringstream txt;
  txt << "Run status: " << manifest.value("status", std::string("unknown")) << '\n';
  if (!manifest.value("message", std::string()).empty()) {
    txt << "Message: " << manifest["message"].get<std::string>() << '\n';
  }
  for (const auto& p : problems) txt << "Artifact problem: " << p << '\n';
  txt << '\n';

  if (fs::exists(results_dir / "identify.json")) {
    const IdentifyResult id = IdentifyResult::from_json(read_json(results_dir / "identify.json"));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", id.full_auc);
    txt << "Full-population baseline ROCAUC: " << buf << '\n';
    for (const auto& [sp, auc] : id.sp_auc) {
      std::snprintf(buf, sizeof(buf), "%.3f", auc);
      const bool flagged =
          std::find(id.underperforming.begin(), id.underperforming.end(), sp) != id.underperforming.end();
      txt << "  " << sp << ": " << buf << (flagged ? "  (underperforming)" : "") << '\n';
    }
    for (const auto& [sp, why] : id.unassessable) txt << "  " << sp << ": unassessable (" << why << ")\n";
    txt << '\n';
  }

  const std::vector<std::string> targets =
      manifest.value("targets", std::vector<std::string>{});
  if (manifest.contains("targets") && targets.empty()) txt << kNoTargetsMessage << "\n\n";

  std::optional<SweepResult> sweep;
  if (fs::exists(results_dir / "sweep.json")) {
    sweep = SweepResult::from_json(read_json(results_dir / "sweep.json"));
    if (!sweep->subpops.empty()) txt << sweep_report_text(*sweep, metric) << '\n';
  } else if (!targets.empty()) {
    txt << "Sweep: not completed\n\n";
  }

  if (fs::exists(results_dir / "comparison.json")) {
    const ComparisonTable table = ComparisonTable::from_json(read_json(results_dir / "comparison.json"));
    const std::string text = comparison_table_text(table);
    txt << "Comparison (ROCAUC, * = best)\n" << text;
    write_text_file(rdir / "comparison.txt", text);
    write_text_file(rdir / "comparison.csv", comparison_table_csv(table));
  } else {
    txt << "Comparison: not completed\n";
  }
  write_text_file(rdir / "report.txt", txt.str());

  if (!plots) return;
  if (sweep) {
    for (const auto& sub : sweep->subpops) {
      const auto series = curve_series(*sweep, sub.sp, metric);
      write_text_file(rdir / "plots" / ("curve_" + file_stem(sub.sp) + ".svg"),
                      curve_plot_svg(sub.sp + ": " + metric + " vs synthetic samples added",
                                     sweep->fractions, series, metric));
    }
  }
  if (fs::exists(results_dir / "sp_sizes.csv")) {
    std::vector<std::pair<std::string, std::size_t>> sizes;
    std::istringstream in(read_text_file(results_dir / "sp_sizes.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto c1 = line.find(',');
      const auto c2 = line.find(',', c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos) continue;
      sizes.emplace_back(line.substr(0, c1), std::stoull(line.substr(c1 + 1, c2 - c1 - 1)));
    }
    write_text_file(rdir / "plots" / "sp_sizes.svg", size_chart_svg("SP sizes", sizes));
  }
}

}  // namespace ensgan
