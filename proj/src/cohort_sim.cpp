#include "ensgan/cohort_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ensgan/common.hpp"
#include "ensgan/metrics.hpp"

namespace ensgan {
namespace {

std::string level_name(std::size_t level, std::size_t levels) {
  // Zero-padded so lexicographic order equals level order.
  std::string digits = std::to_string(level);
  const std::size_t width = std::to_string(levels == 0 ? 0 : levels - 1).size();
  return "L" + std::string(width - digits.size(), '0') + digits;
}

const std::vector<double>& weights_for(const SimConfig& cfg, const SubpopSpec& sp) {
  return sp.concept_weights ? *sp.concept_weights : cfg.concept_weights;
}

double bias_for(const SimConfig& cfg, const SubpopSpec& sp) {
  return sp.concept_bias ? *sp.concept_bias : cfg.concept_bias;
}

// Draws one row in sim_schema layout (codes in sim_category_tables) and
// returns it with its noise-free logit.
struct DrawnRow {
  std::vector<double> values;
  double logit = 0.0;
};

class RowSampler {
 public:
  RowSampler(const SimConfig& cfg, const SubpopSpec& sp, int pm_code)
      : cfg_(cfg), sp_(sp), pm_code_(pm_code) {
    for (const auto& cat : cfg.categoricals) {
      const auto& p = cat.probabilities.at(sp.pm_value);
      std::vector<double> cdf(p.size());
      std::partial_sum(p.begin(), p.end(), cdf.begin());
      cdfs_.push_back(std::move(cdf));
    }
  }

  DrawnRow draw(Rng& rng) const {
    const std::size_t nc = cfg_.n_continuous;
    const std::size_t nk = cfg_.categoricals.size();
    DrawnRow out;
    out.values.resize(nc + nk + 2);
    const auto& w = weights_for(cfg_, sp_);
    double logit = bias_for(cfg_, sp_);
    for (std::size_t j = 0; j < nc; ++j) {
      const double x = sp_.feature_means[j] + sp_.feature_spreads[j] * rng.normal();
      out.values[j] = x;
      logit += w[j] * x;
    }
    for (std::size_t k = 0; k < nk; ++k) {
      const double u = rng.uniform() * cdfs_[k].back();
      auto it = std::upper_bound(cdfs_[k].begin(), cdfs_[k].end(), u);
      std::size_t level = static_cast<std::size_t>(it - cdfs_[k].begin());
      level = std::min(level, cdfs_[k].size() - 1);
      out.values[nc + k] = static_cast<double>(level);
      const auto& effects = cfg_.categoricals[k].effects;
      if (!effects.empty()) logit += effects[level];
    }
    out.values[nc + nk] = static_cast<double>(pm_code_);
    const double noisy = logit + (cfg_.noise_scale > 0 ? cfg_.noise_scale * rng.normal() : 0.0);
    out.values[nc + nk + 1] = rng.bernoulli(sigmoid(noisy)) ? 1.0 : 0.0;
    out.logit = logit;
    return out;
  }

 private:
  const SimConfig& cfg_;
  const SubpopSpec& sp_;
  int pm_code_;
  std::vector<std::vector<double>> cdfs_;
};

int pm_code(const SimConfig& cfg, const std::string& pm_value) {
  const auto tables = sim_category_tables(cfg);
  const auto& pm = tables[cfg.n_continuous + cfg.categoricals.size()];
  return static_cast<int>(std::find(pm.begin(), pm.end(), pm_value) - pm.begin());
}

}  // namespace

void SimConfig::validate() const {
  if (subpops.empty()) throw ConfigError("simulator needs at least one subpopulation");
  if (concept_weights.size() != n_continuous) {
    throw ConfigError("concept_weights needs " + std::to_string(n_continuous) + " entries");
  }
  if (!(noise_scale >= 0.0)) throw ConfigError("noise_scale must be >= 0");
  std::set<std::string> seen;
  for (const auto& sp : subpops) {
    if (sp.pm_value.empty()) throw ConfigError("empty subpopulation name");
    if (!seen.insert(sp.pm_value).second) {
      throw ConfigError("duplicate subpopulation '" + sp.pm_value + "'");
    }
    if (sp.size < 1) throw ConfigError("subpopulation '" + sp.pm_value + "' has size 0");
    if (sp.feature_means.size() != n_continuous || sp.feature_spreads.size() != n_continuous) {
      throw ConfigError("subpopulation '" + sp.pm_value + "' needs " +
                        std::to_string(n_continuous) + " means and spreads");
    }
    for (double s : sp.feature_spreads) {
      if (!(s > 0.0)) throw ConfigError("spreads must be > 0 in '" + sp.pm_value + "'");
    }
    if (sp.concept_weights && sp.concept_weights->size() != n_continuous) {
      throw ConfigError("weight override of '" + sp.pm_value + "' has wrong length");
    }
  }
  for (std::size_t k = 0; k < categoricals.size(); ++k) {
    const auto& cat = categoricals[k];
    if (cat.levels < 1) throw ConfigError("categorical c" + std::to_string(k) + " has no levels");
    if (!cat.effects.empty() && cat.effects.size() != cat.levels) {
      throw ConfigError("categorical c" + std::to_string(k) + " effects length mismatch");
    }
    for (const auto& sp : subpops) {
      auto it = cat.probabilities.find(sp.pm_value);
      if (it == cat.probabilities.end() || it->second.size() != cat.levels) {
        throw ConfigError("categorical c" + std::to_string(k) + " needs " +
                          std::to_string(cat.levels) + " probabilities for '" + sp.pm_value +
                          "'");
      }
      double sum = 0.0;
      for (double p : it->second) {
        if (!(p >= 0.0)) throw ConfigError("negative probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("categorical c" + std::to_string(k) + " probabilities for '" +
                          sp.pm_value + "' sum to " + std::to_string(sum));
      }
    }
  }
}

const SubpopSpec& SimConfig::subpop(const std::string& pm_value) const {
  for (const auto& sp : subpops) {
    if (sp.pm_value == pm_value) return sp;
  }
  throw ConfigError("unknown subpopulation '" + pm_value + "'");
}

SimConfig SimConfig::from_json(const nlohmann::json& doc) {
  SimConfig cfg;
  try {
    cfg.n_continuous = doc.at("n_continuous").get<std::size_t>();
    cfg.concept_weights = doc.at("concept_weights").get<std::vector<double>>();
    cfg.concept_bias = doc.value("concept_bias", 0.0);
    cfg.noise_scale = doc.value("noise_scale", 0.0);
    cfg.seed = doc.value("seed", std::uint64_t{0});
    for (const auto& s : doc.at("subpops")) {
      SubpopSpec sp;
      sp.pm_value = s.at("pm_value").get<std::string>();
      sp.size = s.at("size").get<std::size_t>();
      sp.feature_means = s.at("feature_means").get<std::vector<double>>();
      sp.feature_spreads = s.at("feature_spreads").get<std::vector<double>>();
      if (s.contains("concept_weights")) {
        sp.concept_weights = s["concept_weights"].get<std::vector<double>>();
      }
      if (s.contains("concept_bias")) sp.concept_bias = s["concept_bias"].get<double>();
      cfg.subpops.push_back(std::move(sp));
    }
    if (doc.contains("categoricals")) {
      for (const auto& c : doc["categoricals"]) {
        CategoricalSpec cat;
        cat.levels = c.at("levels").get<std::size_t>();
        cat.probabilities =
            c.at("probabilities").get<std::map<std::string, std::vector<double>>>();
        cat.effects = c.value("effects", std::vector<double>{});
        cfg.categoricals.push_back(std::move(cat));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("simulator config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json SimConfig::to_json() const {
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& sp : subpops) {
    nlohmann::json s{{"pm_value", sp.pm_value},
                     {"size", sp.size},
                     {"feature_means", sp.feature_means},
                     {"feature_spreads", sp.feature_spreads}};
    if (sp.concept_weights) s["concept_weights"] = *sp.concept_weights;
    if (sp.concept_bias) s["concept_bias"] = *sp.concept_bias;
    subs.push_back(std::move(s));
  }
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : categoricals) {
    cats.push_back({{"levels", c.levels}, {"probabilities", c.probabilities}, {"effects", c.effects}});
  }
  return {{"subpops", subs},        {"n_continuous", n_continuous},
          {"categoricals", cats},   {"concept_weights", concept_weights},
          {"concept_bias", concept_bias}, {"noise_scale", noise_scale},
          {"seed", seed}};
}

Schema sim_schema(const SimConfig& cfg) {
  std::vector<ColumnSpec> cols;
  for (std::size_t j = 0; j < cfg.n_continuous; ++j) {
    cols.push_back({"x" + std::to_string(j), ColumnKind::kContinuous, ColumnRole::kFeature});
  }
  for (std::size_t k = 0; k < cfg.categoricals.size(); ++k) {
    cols.push_back({"c" + std::to_string(k), ColumnKind::kCategorical, ColumnRole::kFeature});
  }
  cols.push_back({kSimPmColumn, ColumnKind::kCategorical, ColumnRole::kPopulationMarker});
  cols.push_back({kSimLabelColumn, ColumnKind::kCategorical, ColumnRole::kLabel});
  return Schema(std::move(cols), std::string("1"));
}

CategoryTables sim_category_tables(const SimConfig& cfg) {
  CategoryTables tables(cfg.n_continuous);
  for (const auto& cat : cfg.categoricals) {
    std::vector<std::string> names;
    for (std::size_t l = 0; l < cat.levels; ++l) names.push_back(level_name(l, cat.levels));
    tables.push_back(std::move(names));
  }
  std::vector<std::string> pms;
  for (const auto& sp : cfg.subpops) pms.push_back(sp.pm_value);
  std::sort(pms.begin(), pms.end());
  tables.push_back(std::move(pms));
  tables.push_back({"0", "1"});
  return tables;
}

Dataset simulate_cohort(const SimConfig& cfg) {
  cfg.validate();
  Dataset out(sim_schema(cfg), sim_category_tables(cfg),
              "sim:seed=" + std::to_string(cfg.seed));
  std::size_t total = 0;
  for (const auto& sp : cfg.subpops) total += sp.size;
  out.reserve(total);
  RowId next = 0;
  for (const auto& sp : cfg.subpops) {
    RowSampler sampler(cfg, sp, pm_code(cfg, sp.pm_value));
    Rng rng(derive_seed(cfg.seed, {"simulate", sp.pm_value}));
    for (std::size_t i = 0; i < sp.size; ++i) out.append_row(sampler.draw(rng).values, next++);
  }
  return out;
}

Dataset oracle_sample(const SimConfig& cfg, const std::string& pm_value, std::size_t n,
                      std::uint64_t seed) {
  cfg.validate();
  const SubpopSpec& sp = cfg.subpop(pm_value);
  Dataset out(sim_schema(cfg), sim_category_tables(cfg),
              "oracle:" + pm_value + ":seed=" + std::to_string(seed));
  out.reserve(n);
  RowSampler sampler(cfg, sp, pm_code(cfg, pm_value));
  Rng rng(derive_seed(seed, {"oracle", pm_value}));
  const RowId base = kSyntheticRowBit | ((derive_seed(seed, {"oracle-ids"}) & 0x7fffffffull) << 32);
  for (std::size_t i = 0; i < n; ++i) out.append_row(sampler.draw(rng).values, base | i);
  return out;
}

double true_logit(const SimConfig& cfg, const std::string& pm_value,
                  std::span<const double> row) {
  const SubpopSpec& sp = cfg.subpop(pm_value);
  const auto& w = weights_for(cfg, sp);
  double logit = bias_for(cfg, sp);
  for (std::size_t j = 0; j < cfg.n_continuous; ++j) logit += w[j] * row[j];
  for (std::size_t k = 0; k < cfg.categoricals.size(); ++k) {
    const auto& effects = cfg.categoricals[k].effects;
    if (!effects.empty()) logit += effects[static_cast<std::size_t>(row[cfg.n_continuous + k])];
  }
  return logit;
}

double bayes_auc(const SimConfig& cfg, const std::string& pm_value, std::size_t n_mc,
                 std::uint64_t seed) {
  if (n_mc < 10000) throw ConfigError("bayes_auc needs n_mc >= 10000");
  cfg.validate();
  const SubpopSpec& sp = cfg.subpop(pm_value);
  RowSampler sampler(cfg, sp, pm_code(cfg, pm_value));
  Rng rng(derive_seed(seed, {"bayes", pm_value}));
  std::vector<int> labels(n_mc);
  std::vector<double> scores(n_mc);
  const std::size_t label_col = cfg.n_continuous + cfg.categoricals.size() + 1;
  for (std::size_t i = 0; i < n_mc; ++i) {
    DrawnRow row = sampler.draw(rng);
    scores[i] = row.logit;
    labels[i] = static_cast<int>(row.values[label_col]);
  }
  return roc_auc(labels, scores);
}

}  // namespace ensgan
