#include "ensgan/predictors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ensgan/artifact.hpp"
#include "ensgan/common.hpp"

namespace ensgan {
namespace {

constexpr std::string_view kModelMagic = "ENSGMDL";
constexpr std::uint32_t kModelVersion = 1;

std::vector<std::size_t> input_columns_for(const Schema& s, const PredictorConfig& cfg) {
  std::vector<std::size_t> cols = s.feature_indices();
  if (cfg.include_population_marker) cols.push_back(s.pm_index());
  std::sort(cols.begin(), cols.end());
  return cols;
}

// Candidate split points of one feature. Values below cuts[b] fall in bins
// 0..b.
std::vector<double> make_cuts(std::span<const double> values, std::size_t max_bins) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> uniq = sorted;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<double> cuts;
  if (uniq.size() <= max_bins) {
    for (std::size_t i = 1; i < uniq.size(); ++i) cuts.push_back(0.5 * (uniq[i - 1] + uniq[i]));
    return cuts;
  }
  const std::size_t n = sorted.size();
  for (std::size_t b = 1; b < max_bins; ++b) {
    const double v = sorted[(b * n) / max_bins];
    if (v > sorted.front() && (cuts.empty() || v > cuts.back())) cuts.push_back(v);
  }
  return cuts;
}

struct BinnedData {
  std::vector<std::vector<double>> cuts;
  std::vector<std::vector<std::uint16_t>> bins;  // [feature][row]
};

BinnedData bin_features(const Dataset& d, std::span<const std::size_t> cols, std::size_t max_bins) {
  BinnedData out;
  for (std::size_t c : cols) {
    auto values = d.column(c);
    out.cuts.push_back(make_cuts(values, max_bins));
    const auto& cuts = out.cuts.back();
    std::vector<std::uint16_t> b(values.size());
    for (std::size_t r = 0; r < values.size(); ++r) {
      b[r] = static_cast<std::uint16_t>(std::upper_bound(cuts.begin(), cuts.end(), values[r]) -
                                        cuts.begin());
    }
    out.bins.push_back(std::move(b));
  }
  return out;
}

class TreeBuilder {
 public:
  TreeBuilder(const BinnedData& data, const std::vector<double>& grad,
              const std::vector<double>& hess, const PredictorConfig& cfg)
      : data_(data), grad_(grad), hess_(hess), cfg_(cfg) {}

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    nodes_.clear();
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    double g = 0.0, h = 0.0;
    for (std::size_t r : rows) {
      g += grad_[r];
      h += hess_[r];
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[id].value = -g / (h + cfg_.l2) * cfg_.learning_rate;
    if (depth >= cfg_.max_depth || rows.size() < 2) return id;

    const double parent_score = g * g / (h + cfg_.l2);
    double best_gain = 1e-12;
    int best_feature = -1;
    std::size_t best_bin = 0;
    std::vector<double> gh;
    for (std::size_t f = 0; f < data_.cuts.size(); ++f) {
      const std::size_t nbins = data_.cuts[f].size() + 1;
      if (nbins < 2) continue;
      gh.assign(2 * nbins, 0.0);
      const auto& bins = data_.bins[f];
      for (std::size_t r : rows) {
        gh[2 * bins[r]] += grad_[r];
        gh[2 * bins[r] + 1] += hess_[r];
      }
      double gl = 0.0, hl = 0.0;
      for (std::size_t b = 0; b + 1 < nbins; ++b) {
        gl += gh[2 * b];
        hl += gh[2 * b + 1];
        const double gr = g - gl;
        const double hr = h - hl;
        if (hl < cfg_.min_child_weight || hr < cfg_.min_child_weight) continue;
        const double gain = gl * gl / (hl + cfg_.l2) + gr * gr / (hr + cfg_.l2) - parent_score;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_bin = b;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    const auto& bins = data_.bins[static_cast<std::size_t>(best_feature)];
    for (std::size_t r : rows) (bins[r] <= best_bin ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int rgt = grow(std::move(right), depth + 1);
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = data_.cuts[static_cast<std::size_t>(best_feature)][best_bin];
    nodes_[id].left = l;
    nodes_[id].right = rgt;
    return id;
  }

  const BinnedData& data_;
  const std::vector<double>& grad_;
  const std::vector<double>& hess_;
  const PredictorConfig& cfg_;
  std::vector<TreeNode> nodes_;
};

double tree_value(const std::vector<TreeNode>& tree, std::span<const double> x) {
  int node = 0;
  while (tree[node].feature >= 0) {
    node = x[static_cast<std::size_t>(tree[node].feature)] < tree[node].threshold ? tree[node].left
                                                                                : tree[node].right;
  }
  return tree[node].value;
}

BoostedTrees fit_boosted(const Dataset& train, std::span<const std::size_t> cols,
                         const std::vector<int>& y, const PredictorConfig& cfg) {
  const std::size_t n = train.num_rows();
  const BinnedData data = bin_features(train, cols, cfg.max_bins);
  const double prior = std::clamp(
      std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n), 1e-6, 1 - 1e-6);

  BoostedTrees model;
  model.base_margin = std::log(prior / (1 - prior));
  std::vector<double> margin(n, model.base_margin);
  std::vector<double> grad(n), hess(n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<double> x(cols.size());
  for (std::size_t t = 0; t < cfg.n_trees; ++t) {
    for (std::size_t r = 0; r < n; ++r) {
      const double p = sigmoid(margin[r]);
      grad[r] = p - y[r];
      hess[r] = std::max(p * (1 - p), 1e-16);
    }
    std::vector<std::size_t> rows = all;
    if (cfg.subsample < 1.0) {
      Rng rng(derive_seed(cfg.seed, {"subsample", std::to_string(t)}));
      std::shuffle(rows.begin(), rows.end(), rng.engine());
      rows.resize(std::max<std::size_t>(1, static_cast<std::size_t>(
                                               round_half_up(cfg.subsample * static_cast<double>(n)))));
      std::sort(rows.begin(), rows.end());
    }
    TreeBuilder builder(data, grad, hess, cfg);
    model.trees.push_back(builder.build(std::move(rows)));
    const auto& tree = model.trees.back();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < cols.size(); ++j) x[j] = train.at(r, cols[j]);
      margin[r] += tree_value(tree, x);
    }
  }
  return model;
}

LogisticWeights fit_logistic(const Dataset& train, std::span<const std::size_t> cols,
                             const std::vector<int>& y, const PredictorConfig& cfg) {
  const std::size_t n = train.num_rows();
  const std::size_t p = cols.size();
  LogisticWeights w;
  w.mean.resize(p);
  w.scale.resize(p);
  Eigen::MatrixXd X(n, p + 1);
  for (std::size_t j = 0; j < p; ++j) {
    auto col = train.column(cols[j]);
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    w.mean[j] = mean;
    w.scale[j] = sd > 0 ? sd : 1.0;
    for (std::size_t r = 0; r < n; ++r) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = (col[r] - mean) / w.scale[j];
  }
  X.col(static_cast<Eigen::Index>(p)).setOnes();
  Eigen::VectorXd yv(n);
  for (std::size_t r = 0; r < n; ++r) yv(static_cast<Eigen::Index>(r)) = y[r];

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
  Eigen::VectorXd ridge = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p + 1), cfg.l2);
  ridge(static_cast<Eigen::Index>(p)) = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd mu(n), wts(n);
    for (Eigen::Index r = 0; r < eta.size(); ++r) {
      mu(r) = sigmoid(eta(r));
      wts(r) = std::max(mu(r) * (1 - mu(r)), 1e-12);
    }
    const Eigen::VectorXd grad = X.transpose() * (mu - yv) + ridge.cwiseProduct(beta);
    Eigen::MatrixXd hess = X.transpose() * wts.asDiagonal() * X;
    hess.diagonal() += ridge + Eigen::VectorXd::Constant(ridge.size(), 1e-9);
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    beta -= step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  w.coef.assign(beta.data(), beta.data() + p);
  w.intercept = beta(static_cast<Eigen::Index>(p));
  return w;
}

nlohmann::json trees_json(const BoostedTrees& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(nodes));
  }
  return {{"base_margin", m.base_margin}, {"trees", trees}};
}

BoostedTrees trees_from_json(const nlohmann::json& doc) {
  BoostedTrees m;
  m.base_margin = doc.at("base_margin").get<double>();
  for (const auto& t : doc.at("trees")) {
    std::vector<TreeNode> tree;
    for (const auto& n : t) {
      tree.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                      n.at(3).get<int>(), n.at(4).get<double>()});
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

}  // namespace

void PredictorConfig::validate() const {
  if (kind == PredictorKind::kGradientBoosting) {
    if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
    if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (!(subsample > 0 && subsample <= 1)) throw ConfigError("subsample must be in (0, 1]");
    if (max_bins < 2 || max_bins > 65535) throw ConfigError("max_bins must be in [2, 65535]");
  }
  if (!(l2 >= 0)) throw ConfigError("l2 must be >= 0");
}

PredictorConfig PredictorConfig::from_json(const nlohmann::json& doc) {
  PredictorConfig c;
  try {
    const std::string kind = doc.value("kind", std::string("gradient_boosting"));
    if (kind == "gradient_boosting") {
      c.kind = PredictorKind::kGradientBoosting;
    } else if (kind == "logistic") {
      c.kind = PredictorKind::kLogistic;
    } else {
      throw ConfigError("unknown predictor kind '" + kind + "'");
    }
    c.n_trees = doc.value("n_trees", c.n_trees);
    c.max_depth = doc.value("max_depth", c.max_depth);
    c.learning_rate = doc.value("learning_rate", c.learning_rate);
    c.l2 = doc.value("l2", c.l2);
    c.min_child_weight = doc.value("min_child_weight", c.min_child_weight);
    c.subsample = doc.value("subsample", c.subsample);
    c.max_bins = doc.value("max_bins", c.max_bins);
    c.include_population_marker = doc.value("include_population_marker", c.include_population_marker);
    c.seed = doc.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("predictor config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json PredictorConfig::to_json() const {
  return {{"kind", kind == PredictorKind::kGradientBoosting ? "gradient_boosting" : "logistic"},
          {"n_trees", n_trees},
          {"max_depth", max_depth},
          {"learning_rate", learning_rate},
          {"l2", l2},
          {"min_child_weight", min_child_weight},
          {"subsample", subsample},
          {"max_bins", max_bins},
          {"include_population_marker", include_population_marker},
          {"seed", seed}};
}

double TrainedModel::margin(std::span<const double> row) const {
  if (const auto* trees = std::get_if<BoostedTrees>(&ensemble)) {
    double m = trees->base_margin;
    for (const auto& tree : trees->trees) m += tree_value(tree, row);
    return m;
  }
  const auto& w = std::get<LogisticWeights>(ensemble);
  double m = w.intercept;
  for (std::size_t j = 0; j < w.coef.size(); ++j) m += w.coef[j] * (row[j] - w.mean[j]) / w.scale[j];
  return m;
}

TrainedModel train_classifier(const Dataset& train, const PredictorConfig& cfg,
                              const std::string& context) {
  cfg.validate();
  const std::string where = context.empty() ? train.provenance() : context;
  if (train.empty()) throw TrainingError(where + ": empty training set");
  const std::vector<int> y = train.binary_labels();
  const auto positives = std::count(y.begin(), y.end(), 1);
  if (positives == 0 || positives == static_cast<long>(y.size())) {
    throw TrainingError(where + ": training set has a single outcome class (" +
                        std::to_string(y.size()) + " rows, " + std::to_string(positives) +
                        " positive)");
  }
  TrainedModel model;
  model.config = cfg;
  model.schema_fingerprint = train.schema().fingerprint();
  model.input_columns = input_columns_for(train.schema(), cfg);
  if (cfg.kind == PredictorKind::kGradientBoosting) {
    model.ensemble = fit_boosted(train, model.input_columns, y, cfg);
  } else {
    model.ensemble = fit_logistic(train, model.input_columns, y, cfg);
  }
  model.provenance.source = train.provenance();
  for (RowId id : train.row_ids()) {
    if (is_synthetic(id)) {
      ++model.provenance.synthetic_rows;
    } else {
      ++model.provenance.real_rows;
      model.provenance.real_row_ids.push_back(id);
    }
  }
  std::sort(model.provenance.real_row_ids.begin(), model.provenance.real_row_ids.end());
  return model;
}

std::vector<double> predict_scores(const TrainedModel& model, const Dataset& data) {
  if (data.schema().fingerprint() != model.schema_fingerprint) {
    throw SchemaError("dataset schema " + data.schema().fingerprint() +
                      " does not match model schema " + model.schema_fingerprint);
  }
  std::vector<double> scores(data.num_rows());
  std::vector<double> x(model.input_columns.size());
  for (std::size_t r = 0; r < data.num_rows(); ++r) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      x[j] = data.at(r, model.input_columns[j]);
      if (std::isnan(x[j])) throw DataError("missing input cell at row " + std::to_string(r));
    }
    scores[r] = sigmoid(model.margin(x));
  }
  return scores;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  nlohmann::json doc{{"config", model.config.to_json()},
                     {"schema_fingerprint", model.schema_fingerprint},
                     {"input_columns", model.input_columns},
                     {"provenance",
                      {{"real_rows", model.provenance.real_rows},
                       {"synthetic_rows", model.provenance.synthetic_rows},
                       {"source", model.provenance.source},
                       {"real_row_ids", model.provenance.real_row_ids}}}};
  if (const auto* trees = std::get_if<BoostedTrees>(&model.ensemble)) {
    doc["trees"] = trees_json(*trees);
  } else {
    const auto& w = std::get<LogisticWeights>(model.ensemble);
    doc["logistic"] = {{"mean", w.mean}, {"scale", w.scale}, {"coef", w.coef}, {"intercept", w.intercept}};
  }
  write_container(path, kModelMagic, kModelVersion, doc);
}

TrainedModel load_model(const std::filesystem::path& path) {
  const nlohmann::json doc = read_container(path, kModelMagic, kModelVersion);
  try {
    TrainedModel m;
    m.config = PredictorConfig::from_json(doc.at("config"));
    m.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    m.input_columns = doc.at("input_columns").get<std::vector<std::size_t>>();
    const auto& p = doc.at("provenance");
    m.provenance.real_rows = p.at("real_rows").get<std::size_t>();
    m.provenance.synthetic_rows = p.at("synthetic_rows").get<std::size_t>();
    m.provenance.source = p.at("source").get<std::string>();
    m.provenance.real_row_ids = p.at("real_row_ids").get<std::vector<RowId>>();
    if (doc.contains("trees")) {
      m.ensemble = trees_from_json(doc["trees"]);
    } else {
      const auto& l = doc.at("logistic");
      m.ensemble = LogisticWeights{l.at("mean").get<std::vector<double>>(),
                                   l.at("scale").get<std::vector<double>>(),
                                   l.at("coef").get<std::vector<double>>(),
                                   l.at("intercept").get<double>()};
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  }
}

}  // namespace ensgan
