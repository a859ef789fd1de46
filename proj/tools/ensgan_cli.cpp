// ensgan command-line entry point.

#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ensgan/artifact.hpp"
#include "ensgan/cohort_sim.hpp"
#include "ensgan/common.hpp"
#include "ensgan/dataset.hpp"
#include "ensgan/generator.hpp"
#include "ensgan/pipeline.hpp"
#include "ensgan/report.hpp"
#include "ensgan/run.hpp"
#include "ensgan/tabgan.hpp"

namespace fs = std::filesystem;
using namespace ensgan;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out;
  std::string fractions;
  std::string metric;
  bool plots = false;
};

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad fraction '" + item + "' in --fractions");
    }
  }
  if (out.empty()) throw ConfigError("--fractions is empty");
  return out;
}

nlohmann::json load_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

RunConfig run_config(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  RunConfig cfg = RunConfig::load(c.config);
  if (c.seed) cfg.sweep.master_seed = *c.seed;
  if (c.workers) cfg.sweep.workers = *c.workers;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (!c.fractions.empty()) {
    cfg.sweep.fractions = parse_fractions(c.fractions);
    cfg.sweep.normalize();
  }
  if (!c.metric.empty()) cfg.plot_metric = c.metric;
  if (c.plots) cfg.plots = true;
  cfg.validate();
  return cfg;
}

SchemaDocument schema_doc(const std::string& path) {
  if (path.empty()) throw ConfigError("--schema is required");
  return load_schema_document(path);
}

Dataset load_data(const std::string& data, const SchemaDocument& sd) {
  if (data.empty()) throw ConfigError("--data is required");
  return load_dataset(data, sd.schema, sd.options);
}

void add_common(CLI::App* app, Common& c, bool with_config = true) {
  if (with_config) app->add_option("--config", c.config, "Config file (JSON)");
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--workers", c.workers, "Worker threads");
  app->add_option("--out", c.out, "Output path");
  app->add_option("--fractions", c.fractions, "Comma-separated augmentation fractions");
  app->add_option("--metric", c.metric, "Metric for reports and plots");
  app->add_flag("--plots", c.plots, "Write SVG plots");
}

int finish(const RunSummary& s) {
  if (!s.message.empty()) std::cerr << s.message << '\n';
  std::cout << "status: " << s.status << '\n';
  return s.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-subpopulation synthetic augmentation studies"};
  app.require_subcommand(1);
  Common c;
  std::string data, schema, generator_path, table_path, results, sp;
  double fraction = 0.0;
  long long count = -1;

  auto* simulate = app.add_subcommand("simulate", "Write a simulated cohort and its schema");
  add_common(simulate, c);
  auto* preprocess_cmd = app.add_subcommand("preprocess", "Drop incomplete rows and label-encode");
  add_common(preprocess_cmd, c, false);
  preprocess_cmd->add_option("--data", data, "CSV input");
  preprocess_cmd->add_option("--schema", schema, "Schema document");
  auto* split = app.add_subcommand("split", "Per-subpopulation 65/35 splits");
  add_common(split, c);
  split->add_option("--data", data, "CSV input");
  split->add_option("--schema", schema, "Schema document");
  auto* identify = app.add_subcommand("identify", "Flag underperforming subpopulations");
  add_common(identify, c);
  auto* train_gen = app.add_subcommand("train-gen", "Fit a tabular GAN on one training set");
  add_common(train_gen, c);
  train_gen->add_option("--data", data, "Training CSV");
  train_gen->add_option("--schema", schema, "Schema document");
  train_gen->add_option("--sp", sp, "Keep only rows of this subpopulation");
  auto* augment = app.add_subcommand("augment", "Append generated rows to a training set");
  add_common(augment, c, false);
  augment->add_option("--data", data, "Training CSV");
  augment->add_option("--schema", schema, "Schema document");
  augment->add_option("--generator", generator_path, "Generator artifact")->required();
  augment->add_option("--fraction", fraction, "Synthetic rows as a share of the training rows");
  augment->add_option("--count", count, "Exact number of rows to generate instead");
  auto* sweep = app.add_subcommand("sweep", "Identify, then sweep augmentation fractions");
  add_common(sweep, c);
  auto* compare = app.add_subcommand("compare", "Full study including resampling baselines");
  add_common(compare, c);
  compare->add_option("--table", table_path, "Render an existing comparison JSON and exit");
  auto* report = app.add_subcommand("report", "Render report and plots from a results directory");
  add_common(report, c, false);
  report->add_option("--results", results, "Results directory")->required();
  auto* run = app.add_subcommand("run", "Everything, end to end");
  add_common(run, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // usage problems are config errors; help and version exit cleanly
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) {
      if (c.config.empty()) throw ConfigError("--config is required");
      nlohmann::json doc = load_json(c.config);
      if (doc.contains("simulator")) doc = doc["simulator"];
      SimConfig sim = SimConfig::from_json(doc);
      if (c.seed) sim.seed = *c.seed;
      const fs::path out = c.out.empty() ? fs::path("cohort") : fs::path(c.out);
      const Dataset d = simulate_cohort(sim);
      save_dataset(d, out / "cohort.csv");
      write_text_file(out / "schema.json",
                      schema_document_json(d.schema(), LoadOptions{}).dump(2) + "\n");
      std::cout << "wrote " << d.num_rows() << " rows to " << (out / "cohort.csv").string() << '\n';
      return 0;
    }
    if (preprocess_cmd->parsed()) {
      const SchemaDocument sd = schema_doc(schema);
      const Dataset d = preprocess(load_data(data, sd));
      const fs::path out = c.out.empty() ? fs::path("preprocessed") : fs::path(c.out);
      save_dataset(d, out / "data.csv");
      write_text_file(out / "schema.json", schema_document_json(d.schema(), LoadOptions{}).dump(2) + "\n");
      write_text_file(out / "code_tables.json", code_tables_json(d).dump(2) + "\n");
      std::cout << "kept " << d.num_rows() << " rows\n";
      return 0;
    }
    if (split->parsed()) {
      SweepConfig cfg;
      if (!c.config.empty()) {
        const nlohmann::json doc = load_json(c.config);
        if (doc.contains("sweep")) cfg = SweepConfig::from_json(doc["sweep"]);
        if (doc.contains("excluded_pms")) cfg.excluded_pms = doc["excluded_pms"].get<std::set<std::string>>();
      }
      if (c.seed) cfg.master_seed = *c.seed;
      const SchemaDocument sd = schema_doc(schema);
      const StudySplits s = prepare_splits(preprocess(load_data(data, sd)), cfg);
      const fs::path out = c.out.empty() ? fs::path("splits") : fs::path(c.out);
      for (const auto& [name, pair] : s.sp_splits) {
        save_dataset(pair.train, out / (name + ".train.csv"));
        save_dataset(pair.test, out / (name + ".test.csv"));
      }
      save_dataset(s.full_train, out / "full.train.csv");
      save_dataset(s.full_test, out / "full.test.csv");
      write_text_file(out / "schema.json", schema_document_json(s.full_train.schema(), LoadOptions{}).dump(2) + "\n");
      std::cout << "wrote splits for " << s.sp_splits.size() << " subpopulations\n";
      return 0;
    }
    if (train_gen->parsed()) {
      GanConfig gan;
      if (!c.config.empty()) {
        const nlohmann::json doc = load_json(c.config);
        gan = GanConfig::from_json(doc.contains("gan") ? doc["gan"] : doc);
      }
      if (c.seed) gan.seed = *c.seed;
      const SchemaDocument sd = schema_doc(schema);
      Dataset d = preprocess(load_data(data, sd));
      if (!sp.empty()) {
        auto part = partition_by_pm(d, {});
        if (!part.subsets.count(sp)) throw ConfigError("no subpopulation '" + sp + "' in " + data);
        d = part.subsets.at(sp);
      }
      const GeneratorModel model = fit_generator(d, gan);
      const fs::path out = c.out.empty() ? fs::path("generator.gen") : fs::path(c.out);
      save_generator(model, out);
      write_text_file(fs::path(out).replace_extension(".loss.csv"), model.loss_trace_csv());
      std::cout << "wrote " << out.string() << '\n';
      return 0;
    }
    if (augment->parsed()) {
      const SchemaDocument sd = schema_doc(schema);
      const Dataset d = preprocess(load_data(data, sd));
      const GeneratorModel model = load_generator(generator_path, d.schema());
      const std::uint64_t seed = c.seed.value_or(0);
      const long long n =
          count >= 0 ? count : round_half_up(fraction * static_cast<double>(d.num_rows()));
      const Dataset syn = generate(model, n, seed).recode_to(d.categories());
      const Dataset out_data = syn.empty() ? d : d.concat(syn, d.provenance() + "|augmented");
      const fs::path out = c.out.empty() ? fs::path("augmented.csv") : fs::path(c.out);
      save_dataset(out_data, out);
      std::cout << "wrote " << d.num_rows() << " real + " << syn.num_rows() << " synthetic rows\n";
      return 0;
    }
    if (report->parsed()) {
      emit_report(results, c.metric.empty() ? std::string(kRocAuc) : c.metric, c.plots);
      std::cout << read_text_file(fs::path(results) / "report" / "report.txt");
      return 0;
    }
    if (compare->parsed() && !table_path.empty()) {
      const ComparisonTable table = ComparisonTable::from_json(load_json(table_path));
      if (!c.out.empty()) {
        write_text_file(fs::path(c.out) / "comparison.txt", comparison_table_text(table));
        write_text_file(fs::path(c.out) / "comparison.csv", comparison_table_csv(table));
      }
      std::cout << comparison_table_text(table);
      return 0;
    }
    RunStage stage = RunStage::kCompare;
    if (identify->parsed()) stage = RunStage::kIdentify;
    if (sweep->parsed()) stage = RunStage::kSweep;
    const RunSummary s = run_end_to_end(run_config(c), stage);
    if (identify->parsed()) {
      for (const auto& t : s.targets) std::cout << t << '\n';
    }
    return finish(s);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::out_of_range& e) {
    std::cerr << "config error: unknown subpopulation '" << sp << "'\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
