#include "ensgan/generator.hpp"

#include <algorithm>

#include "ensgan/common.hpp"

namespace ensgan {

std::vector<RowId> sorted_real_ids(const Dataset& d) {
  std::vector<RowId> ids;
  for (RowId id : d.row_ids()) {
    if (!is_synthetic(id)) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

TabGanGenerator::TabGanGenerator(GeneratorModel model, std::vector<RowId> training_ids)
    : model_(std::move(model)), training_ids_(std::move(training_ids)) {}

Dataset TabGanGenerator::generate(std::size_t n, std::uint64_t seed) const {
  return ensgan::generate(model_, static_cast<long long>(n), seed);
}

OracleGenerator::OracleGenerator(SimConfig sim, std::string pm_value, CategoryTables target_tables,
                                 std::vector<RowId> training_ids)
    : sim_(std::move(sim)),
      pm_value_(std::move(pm_value)),
      tables_(std::move(target_tables)),
      training_ids_(std::move(training_ids)) {}

Dataset OracleGenerator::generate(std::size_t n, std::uint64_t seed) const {
  return oracle_sample(sim_, pm_value_, n, seed).recode_to(tables_);
}

GeneratorFactory tabgan_factory(GanConfig cfg) {
  return [cfg](const Dataset& train_sp, const std::string& /*sp*/, std::uint64_t seed) {
    GanConfig c = cfg;
    c.seed = seed;
    return std::make_shared<const TabGanGenerator>(fit_generator(train_sp, c),
                                                   sorted_real_ids(train_sp));
  };
}

GeneratorFactory oracle_factory(SimConfig sim) {
  sim.validate();
  return [sim](const Dataset& train_sp, const std::string& sp, std::uint64_t) {
    if (train_sp.provenance().find("split=test") != std::string::npos) {
      throw LeakageError("generator asked to fit on a test split");
    }
    if (!(train_sp.schema() == sim_schema(sim))) {
      throw SchemaError("oracle generator: dataset schema differs from the simulator schema");
    }
    return std::make_shared<const OracleGenerator>(sim, sp, train_sp.categories(),
                                                   sorted_real_ids(train_sp));
  };
}

}  // namespace ensgan
