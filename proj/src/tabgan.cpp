#include "ensgan/tabgan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ensgan/artifact.hpp"
#include "ensgan/common.hpp"

namespace ensgan {
namespace {

using nn::Matrix;

constexpr std::string_view kGeneratorMagic = "ENSGGEN";
constexpr std::uint32_t kGeneratorVersion = 1;
constexpr double kMinModeWeight = 0.005;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

struct OutputSpan {
  Eigen::Index offset = 0;
  Eigen::Index width = 0;
  bool is_tanh = false;
};

// Positions of every column inside the encoded row and conditional vector.
struct Layout {
  std::vector<OutputSpan> spans;
  std::vector<Eigen::Index> alpha_offset;     // per continuous transform
  std::vector<Eigen::Index> mode_offset;      // per continuous transform
  std::vector<Eigen::Index> discrete_offset;  // per discrete transform
  std::vector<Eigen::Index> cond_offset;      // per discrete transform, -1 if unconditioned
  std::vector<std::size_t> cond_columns;      // discrete transforms that are conditioned
  Eigen::Index data_dim = 0;
  Eigen::Index cond_dim = 0;
};

Layout make_layout(const Schema& schema, const std::vector<ModeTransform>& cont,
                   const std::vector<DiscreteTransform>& disc) {
  Layout L;
  std::size_t ci = 0, di = 0;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (ci < cont.size() && cont[ci].column == c) {
      L.alpha_offset.push_back(L.data_dim);
      L.spans.push_back({L.data_dim, 1, true});
      L.data_dim += 1;
      const auto k = static_cast<Eigen::Index>(cont[ci].means.size());
      L.mode_offset.push_back(L.data_dim);
      L.spans.push_back({L.data_dim, k, false});
      L.data_dim += k;
      ++ci;
    } else if (di < disc.size() && disc[di].column == c) {
      const auto w = static_cast<Eigen::Index>(disc[di].codes.size());
      L.discrete_offset.push_back(L.data_dim);
      L.spans.push_back({L.data_dim, w, false});
      L.data_dim += w;
      if (disc[di].conditioned) {
        L.cond_offset.push_back(L.cond_dim);
        L.cond_columns.push_back(di);
        L.cond_dim += w;
      } else {
        L.cond_offset.push_back(-1);
      }
      ++di;
    }
  }
  return L;
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double gumbel(Rng& rng) {
  const double u = std::clamp(rng.uniform(), 1e-12, 1.0 - 1e-12);
  return -std::log(-std::log(u));
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

// tanh on alpha spans, Gumbel-softmax on one-hot spans.
Matrix activate(const Matrix& raw, const Layout& L, double tau, Rng& rng) {
  Matrix y(raw.rows(), raw.cols());
  for (const OutputSpan& s : L.spans) {
    if (s.is_tanh) {
      y.middleRows(s.offset, s.width) = raw.middleRows(s.offset, s.width).array().tanh();
      continue;
    }
    for (Eigen::Index b = 0; b < raw.cols(); ++b) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < s.width; ++i) {
        const double v = (raw(s.offset + i, b) + gumbel(rng)) / tau;
        y(s.offset + i, b) = v;
        mx = std::max(mx, v);
      }
      double sum = 0.0;
      for (Eigen::Index i = 0; i < s.width; ++i) {
        y(s.offset + i, b) = std::exp(y(s.offset + i, b) - mx);
        sum += y(s.offset + i, b);
      }
      for (Eigen::Index i = 0; i < s.width; ++i) y(s.offset + i, b) /= sum;
    }
  }
  return y;
}

Matrix activate_backward(const Matrix& y, const Matrix& dy, const Layout& L, double tau) {
  Matrix d(y.rows(), y.cols());
  for (const OutputSpan& s : L.spans) {
    const auto ys = y.middleRows(s.offset, s.width);
    const auto dys = dy.middleRows(s.offset, s.width);
    if (s.is_tanh) {
      d.middleRows(s.offset, s.width) = (1.0 - ys.array().square()) * dys.array();
    } else {
      const Eigen::RowVectorXd dot = (ys.array() * dys.array()).colwise().sum();
      d.middleRows(s.offset, s.width) =
          (ys.array() * (dys.rowwise() - dot).array()) / tau;
    }
  }
  return d;
}

struct CondBatch {
  Matrix cond;                       // cond_dim x B
  std::vector<int> column;           // index into Layout::cond_columns, -1 if none
  std::vector<int> category;         // index into the transform's codes
  std::vector<std::size_t> real_rows;  // rows matching the condition
};

class CondSampler {
 public:
  CondSampler(const Layout& L, const std::vector<DiscreteTransform>& disc,
              const std::vector<std::vector<std::vector<std::size_t>>>* rows_by_category,
              std::size_t n_rows)
      : L_(L), disc_(disc), rows_(rows_by_category), n_rows_(n_rows) {
    for (std::size_t di : L.cond_columns) {
      std::vector<double> logf, freq;
      for (std::size_t k = 0; k < disc[di].codes.size(); ++k) {
        const double f = disc[di].frequencies[k];
        freq.push_back(f);
        logf.push_back(std::log(f * static_cast<double>(n_rows) + 1.0));
      }
      log_cdf_.push_back(cdf(logf));
      freq_cdf_.push_back(cdf(freq));
    }
  }

  // log_frequency: training-by-sampling weights; otherwise empirical ones.
  CondBatch sample(std::size_t batch, Rng& rng, bool log_frequency) const {
    CondBatch out;
    out.cond = Matrix::Zero(L_.cond_dim, static_cast<Eigen::Index>(batch));
    for (std::size_t b = 0; b < batch; ++b) {
      if (L_.cond_columns.empty()) {
        out.column.push_back(-1);
        out.category.push_back(-1);
        if (rows_) out.real_rows.push_back(rng.index(n_rows_));
        continue;
      }
      const std::size_t c = rng.index(L_.cond_columns.size());
      const auto& table = log_frequency ? log_cdf_[c] : freq_cdf_[c];
      const double u = rng.uniform() * table.back();
      auto k = static_cast<std::size_t>(std::upper_bound(table.begin(), table.end(), u) - table.begin());
      k = std::min(k, table.size() - 1);
      const std::size_t di = L_.cond_columns[c];
      out.cond(L_.cond_offset[di] + static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b)) = 1.0;
      out.column.push_back(static_cast<int>(c));
      out.category.push_back(static_cast<int>(k));
      if (rows_) {
        const auto& pool = (*rows_)[di][k];
        out.real_rows.push_back(pool[rng.index(pool.size())]);
      }
    }
    return out;
  }

 private:
  static std::vector<double> cdf(const std::vector<double>& w) {
    std::vector<double> c(w.size());
    std::partial_sum(w.begin(), w.end(), c.begin());
    return c;
  }

  const Layout& L_;
  const std::vector<DiscreteTransform>& disc_;
  const std::vector<std::vector<std::vector<std::size_t>>>* rows_;
  std::size_t n_rows_;
  std::vector<std::vector<double>> log_cdf_;
  std::vector<std::vector<double>> freq_cdf_;
};

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

// Columns are contiguous, so packing consecutive samples is a reshape.
Matrix pack(const Matrix& x, Eigen::Index pac) {
  return Eigen::Map<const Matrix>(x.data(), x.rows() * pac, x.cols() / pac);
}

Matrix unpack(const Matrix& x, Eigen::Index pac) {
  return Eigen::Map<const Matrix>(x.data(), x.rows() / pac, x.cols() * pac);
}

std::size_t sample_mode(const ModeTransform& t, double v, Rng& rng) {
  std::vector<double> logp(t.means.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < t.means.size(); ++k) {
    const double z = (v - t.means[k]) / t.stds[k];
    logp[k] = std::log(t.weights[k]) - std::log(t.stds[k]) - 0.5 * z * z;
    mx = std::max(mx, logp[k]);
  }
  double sum = 0.0;
  for (double& lp : logp) sum += (lp = std::exp(lp - mx));
  double u = rng.uniform() * sum;
  for (std::size_t k = 0; k < logp.size(); ++k) {
    u -= logp[k];
    if (u <= 0) return k;
  }
  return logp.size() - 1;
}

nlohmann::json transform_json(const ModeTransform& t) {
  return {{"column", t.column}, {"means", t.means}, {"stds", t.stds},
          {"weights", t.weights}, {"min", t.min},   {"max", t.max}};
}

nlohmann::json transform_json(const DiscreteTransform& t) {
  return {{"column", t.column}, {"codes", t.codes}, {"frequencies", t.frequencies},
          {"conditioned", t.conditioned}};
}

}  // namespace

// ---------------------------------------------------------------------------

void GanConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (dis_steps < 1) throw ConfigError("dis_steps must be >= 1");
  if (pac < 1) throw ConfigError("pac must be >= 1");
  if (latent_dim < 1 || hidden_dim < 1) throw ConfigError("network sizes must be >= 1");
  if (mixture_modes < 1) throw ConfigError("mixture_modes must be >= 1");
  if (!(gen_lr > 0) || !(dis_lr > 0)) throw ConfigError("learning rates must be > 0");
  if (!(gumbel_tau > 0)) throw ConfigError("gumbel_tau must be > 0");
}

GanConfig GanConfig::from_json(const nlohmann::json& doc) {
  GanConfig c;
  try {
    c.epochs = doc.value("epochs", c.epochs);
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.gen_lr = doc.value("gen_lr", c.gen_lr);
    c.dis_lr = doc.value("dis_lr", c.dis_lr);
    c.dis_steps = doc.value("dis_steps", c.dis_steps);
    c.pac = doc.value("pac", c.pac);
    c.latent_dim = doc.value("latent_dim", c.latent_dim);
    c.hidden_dim = doc.value("hidden_dim", c.hidden_dim);
    c.mixture_modes = doc.value("mixture_modes", c.mixture_modes);
    c.gumbel_tau = doc.value("gumbel_tau", c.gumbel_tau);
    c.condition_on_label = doc.value("condition_on_label", c.condition_on_label);
    c.clip_to_training_range = doc.value("clip_to_training_range", c.clip_to_training_range);
    c.seed = doc.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("gan config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json GanConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"gen_lr", gen_lr},
          {"dis_lr", dis_lr},
          {"dis_steps", dis_steps},
          {"pac", pac},
          {"latent_dim", latent_dim},
          {"hidden_dim", hidden_dim},
          {"mixture_modes", mixture_modes},
          {"gumbel_tau", gumbel_tau},
          {"condition_on_label", condition_on_label},
          {"clip_to_training_range", clip_to_training_range},
          {"seed", seed}};
}

ModeTransform fit_mode_transform(std::span<const double> values, std::size_t max_modes) {
  ModeTransform t;
  if (values.empty()) throw DataError("cannot fit modes to an empty column");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  t.min = sorted.front();
  t.max = sorted.back();
  const double n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  var /= n;
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) distinct += sorted[i] != sorted[i - 1];

  if (!(var > 0.0)) {
    t.means = {mean};
    t.stds = {1.0};
    t.weights = {1.0};
    return t;
  }
  const std::size_t K = std::min(max_modes, distinct);
  const double var_floor = std::max(1e-6 * var, 1e-12);
  std::vector<double> mu(K), s2(K, var), w(K, 1.0 / static_cast<double>(K));
  for (std::size_t k = 0; k < K; ++k) {
    const auto q = static_cast<std::size_t>((static_cast<double>(k) + 0.5) / static_cast<double>(K) * n);
    mu[k] = sorted[std::min(q, sorted.size() - 1)];
  }

  std::vector<double> resp(sorted.size() * K);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    double ll = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) {
        const double d = sorted[i] - mu[k];
        const double lp = std::log(w[k]) - 0.5 * std::log(s2[k]) - kLogSqrt2Pi - 0.5 * d * d / s2[k];
        resp[i * K + k] = lp;
        mx = std::max(mx, lp);
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < K; ++k) sum += (resp[i * K + k] = std::exp(resp[i * K + k] - mx));
      for (std::size_t k = 0; k < K; ++k) resp[i * K + k] /= sum;
      ll += mx + std::log(sum);
    }
    for (std::size_t k = 0; k < K; ++k) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        nk += resp[i * K + k];
        sx += resp[i * K + k] * sorted[i];
      }
      if (nk < 1e-10) {
        w[k] = 1e-10;
        continue;
      }
      mu[k] = sx / nk;
      double sv = 0.0;
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double d = sorted[i] - mu[k];
        sv += resp[i * K + k] * d * d;
      }
      s2[k] = std::max(sv / nk, var_floor);
      w[k] = nk / n;
    }
    if (std::abs(ll - prev_ll) < 1e-9 * std::max(1.0, std::abs(ll))) break;
    prev_ll = ll;
  }

  double kept = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (w[k] >= kMinModeWeight) kept += w[k];
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (w[k] >= kMinModeWeight || (kept == 0.0 && k == 0)) {
      t.means.push_back(mu[k]);
      t.stds.push_back(std::sqrt(s2[k]));
      t.weights.push_back(kept == 0.0 ? 1.0 : w[k] / kept);
    }
  }
  return t;
}

std::string GeneratorModel::loss_trace_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,step,dis_loss,gen_loss\n";
  for (const auto& r : loss_trace_) {
    out << r.epoch << ',' << r.step << ',' << r.dis_loss << ',' << r.gen_loss << '\n';
  }
  return out.str();
}

GeneratorModel fit_generator(const Dataset& train_sp, const GanConfig& cfg) {
  cfg.validate();
  if (train_sp.provenance().find("split=test") != std::string::npos) {
    throw LeakageError("generator asked to fit on a test split (" + train_sp.provenance() + ")");
  }
  if (train_sp.empty()) throw EmptyDatasetError("generator training set is empty");
  if (train_sp.has_missing()) throw DataError("generator training set has missing cells");

  const Schema& schema = train_sp.schema();
  const std::size_t n = train_sp.num_rows();
  GeneratorModel model;
  model.schema_ = schema;
  model.categories_ = train_sp.categories();
  model.config_ = cfg;
  model.training_rows_ = n;
  model.training_source_ = train_sp.provenance();

  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema.column(c).kind == ColumnKind::kContinuous) {
      ModeTransform t = fit_mode_transform(train_sp.column(c), cfg.mixture_modes);
      t.column = c;
      model.continuous_.push_back(std::move(t));
    } else {
      DiscreteTransform t;
      t.column = c;
      std::map<int, std::size_t> counts;
      for (double v : train_sp.column(c)) ++counts[static_cast<int>(v)];
      for (const auto& [code, count] : counts) {
        t.codes.push_back(code);
        t.frequencies.push_back(static_cast<double>(count) / static_cast<double>(n));
      }
      t.conditioned = cfg.condition_on_label || c != schema.label_index();
      model.discrete_.push_back(std::move(t));
    }
  }
  const Layout L = make_layout(schema, model.continuous_, model.discrete_);

  // Encode training rows.
  Rng enc_rng(derive_seed(cfg.seed, {"encode"}));
  Matrix real = Matrix::Zero(L.data_dim, static_cast<Eigen::Index>(n));
  std::vector<std::vector<std::vector<std::size_t>>> rows_by_category(model.discrete_.size());
  for (std::size_t d = 0; d < model.discrete_.size(); ++d) {
    rows_by_category[d].resize(model.discrete_[d].codes.size());
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto col = static_cast<Eigen::Index>(r);
    for (std::size_t i = 0; i < model.continuous_.size(); ++i) {
      const ModeTransform& t = model.continuous_[i];
      const double v = train_sp.at(r, t.column);
      const std::size_t k = sample_mode(t, v, enc_rng);
      real(L.alpha_offset[i], col) = std::clamp((v - t.means[k]) / (4 * t.stds[k]), -0.99, 0.99);
      real(L.mode_offset[i] + static_cast<Eigen::Index>(k), col) = 1.0;
    }
    for (std::size_t d = 0; d < model.discrete_.size(); ++d) {
      const DiscreteTransform& t = model.discrete_[d];
      const int code = static_cast<int>(train_sp.at(r, t.column));
      const auto k = static_cast<std::size_t>(
          std::lower_bound(t.codes.begin(), t.codes.end(), code) - t.codes.begin());
      real(L.discrete_offset[d] + static_cast<Eigen::Index>(k), col) = 1.0;
      rows_by_category[d][k].push_back(r);
    }
  }

  std::size_t batch = cfg.batch_size;
  if (batch > n) {
    warn("generator batch size " + std::to_string(batch) + " exceeds " + std::to_string(n) +
         " training rows; clamped");
    batch = n;
  }
  std::size_t pac = cfg.pac;
  if (batch < pac) {
    warn("generator batch of " + std::to_string(batch) + " rows is smaller than pac " +
         std::to_string(pac) + "; packing disabled");
    pac = 1;
  }
  batch -= batch % pac;
  const auto P = static_cast<Eigen::Index>(pac);
  const auto B = static_cast<Eigen::Index>(batch);
  const auto latent = static_cast<Eigen::Index>(cfg.latent_dim);
  const auto hidden = static_cast<Eigen::Index>(cfg.hidden_dim);

  Rng init_rng(derive_seed(cfg.seed, {"init"}));
  model.generator_ = nn::ResidualGenerator(latent + L.cond_dim, hidden, L.data_dim, init_rng);
  nn::Discriminator critic((L.data_dim + L.cond_dim) * P, hidden, init_rng);
  const nn::AdamParams gen_adam{cfg.gen_lr};
  const nn::AdamParams dis_adam{cfg.dis_lr};

  CondSampler sampler(L, model.discrete_, &rows_by_category, n);
  Rng rng(derive_seed(cfg.seed, {"train"}));
  const std::size_t steps_per_epoch = std::max<std::size_t>(n / batch, 1);
  long gen_t = 0, dis_t = 0;
  const Eigen::Index packs = B / P;
  const double inv_b = 1.0 / static_cast<double>(batch);
  const double inv_packs = 1.0 / static_cast<double>(packs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      double dis_loss = 0.0;
      for (std::size_t k = 0; k < cfg.dis_steps; ++k) {
        const CondBatch cb = sampler.sample(batch, rng, true);
        const Matrix z = standard_normal(latent, B, rng);
        const Matrix fake = activate(model.generator_.forward(vstack(z, cb.cond), nullptr), L,
                                     cfg.gumbel_tau, rng);
        Matrix real_batch(L.data_dim, B);
        for (Eigen::Index b = 0; b < B; ++b) {
          real_batch.col(b) = real.col(static_cast<Eigen::Index>(cb.real_rows[static_cast<std::size_t>(b)]));
        }
        nn::Discriminator::Cache real_cache, fake_cache;
        const Matrix s_real = critic.forward(pack(vstack(real_batch, cb.cond), P), &real_cache);
        const Matrix s_fake = critic.forward(pack(vstack(fake, cb.cond), P), &fake_cache);
        dis_loss = 0.0;
        Matrix d_real(1, packs), d_fake(1, packs);
        for (Eigen::Index b = 0; b < packs; ++b) {
          dis_loss += (softplus(-s_real(0, b)) + softplus(s_fake(0, b))) * inv_packs;
          d_real(0, b) = -sigmoid(-s_real(0, b)) * inv_packs;
          d_fake(0, b) = sigmoid(s_fake(0, b)) * inv_packs;
        }
        critic.zero_grad();
        critic.backward(real_cache, d_real, true);
        critic.backward(fake_cache, d_fake, true);
        critic.adam_step(dis_adam, ++dis_t);
      }

      const CondBatch cb = sampler.sample(batch, rng, true);
      const Matrix z = standard_normal(latent, B, rng);
      nn::ResidualGenerator::Cache gen_cache;
      const Matrix raw = model.generator_.forward(vstack(z, cb.cond), &gen_cache);
      const Matrix fake = activate(raw, L, cfg.gumbel_tau, rng);
      nn::Discriminator::Cache fake_cache;
      const Matrix s_fake = critic.forward(pack(vstack(fake, cb.cond), P), &fake_cache);
      double gen_loss = 0.0;
      Matrix d_score(1, packs);
      for (Eigen::Index b = 0; b < packs; ++b) {
        gen_loss += softplus(-s_fake(0, b)) * inv_packs;
        d_score(0, b) = -sigmoid(-s_fake(0, b)) * inv_packs;
      }
      const Matrix d_input = unpack(critic.backward(fake_cache, d_score, false), P);
      Matrix d_raw = activate_backward(fake, d_input.topRows(L.data_dim), L, cfg.gumbel_tau);

      // Conditional cross-entropy on the raw logits of the selected column.
      for (Eigen::Index b = 0; b < B; ++b) {
        const int c = cb.column[static_cast<std::size_t>(b)];
        if (c < 0) continue;
        const std::size_t di = L.cond_columns[static_cast<std::size_t>(c)];
        const Eigen::Index off = L.discrete_offset[di];
        const auto width = static_cast<Eigen::Index>(model.discrete_[di].codes.size());
        const double mx = raw.col(b).segment(off, width).maxCoeff();
        const Eigen::VectorXd e = (raw.col(b).segment(off, width).array() - mx).exp();
        const double sum = e.sum();
        const int target = cb.category[static_cast<std::size_t>(b)];
        gen_loss += -(raw(off + target, b) - mx - std::log(sum)) * inv_b;
        for (Eigen::Index i = 0; i < width; ++i) {
          d_raw(off + i, b) += (e(i) / sum - (i == target ? 1.0 : 0.0)) * inv_b;
        }
      }
      model.generator_.zero_grad();
      model.generator_.backward(gen_cache, d_raw);
      model.generator_.adam_step(gen_adam, ++gen_t);

      model.loss_trace_.push_back({epoch, step, dis_loss, gen_loss});
      if (!std::isfinite(dis_loss) || !std::isfinite(gen_loss)) {
        throw TrainingDivergenceError("non-finite GAN loss at epoch " + std::to_string(epoch) +
                                          ", step " + std::to_string(step),
                                      model.loss_trace_);
      }
    }
  }
  return model;
}

Dataset generate(const GeneratorModel& model, long long n, std::uint64_t seed) {
  if (n < 0) throw ConfigError("cannot generate a negative number of rows");
  const Layout L = make_layout(model.schema_, model.continuous_, model.discrete_);
  const GanConfig& cfg = model.config_;
  Dataset out(model.schema_, model.categories_,
              "synthetic:" + model.fingerprint() + ":seed=" + std::to_string(seed));
  out.reserve(static_cast<std::size_t>(n));
  if (n == 0) return out;

  CondSampler sampler(L, model.discrete_, nullptr, model.training_rows_);
  Rng rng(derive_seed(seed, {"generate"}));
  const RowId id_base =
      kSyntheticRowBit | ((derive_seed(seed, {"generated-ids"}) & 0x7fffffffull) << 32);
  const auto latent = static_cast<Eigen::Index>(cfg.latent_dim);
  const std::size_t batch = std::max<std::size_t>(1, std::min<std::size_t>(cfg.batch_size, 500));
  std::vector<double> row(model.schema_.size());
  auto argmax_sample = [&](const Matrix& raw, Eigen::Index off, Eigen::Index width, Eigen::Index b) {
    Eigen::Index best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < width; ++i) {
      const double v = raw(off + i, b) + gumbel(rng);
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    return static_cast<std::size_t>(best);
  };

  std::size_t produced = 0;
  const auto total = static_cast<std::size_t>(n);
  while (produced < total) {
    const std::size_t this_batch = std::min(batch, total - produced);
    const auto B = static_cast<Eigen::Index>(this_batch);
    const CondBatch cb = sampler.sample(this_batch, rng, false);
    const Matrix z = standard_normal(latent, B, rng);
    const Matrix raw = model.generator_.forward(vstack(z, cb.cond), nullptr);
    for (Eigen::Index b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < model.continuous_.size(); ++i) {
        const ModeTransform& t = model.continuous_[i];
        const double alpha = std::tanh(raw(L.alpha_offset[i], b));
        const std::size_t k =
            argmax_sample(raw, L.mode_offset[i], static_cast<Eigen::Index>(t.means.size()), b);
        double v = alpha * 4 * t.stds[k] + t.means[k];
        if (cfg.clip_to_training_range) v = std::clamp(v, t.min, t.max);
        row[t.column] = v;
      }
      for (std::size_t d = 0; d < model.discrete_.size(); ++d) {
        const DiscreteTransform& t = model.discrete_[d];
        const std::size_t k =
            argmax_sample(raw, L.discrete_offset[d], static_cast<Eigen::Index>(t.codes.size()), b);
        row[t.column] = static_cast<double>(t.codes[k]);
      }
      out.append_row(row, id_base | produced);
      ++produced;
    }
  }
  return out;
}

void save_generator(const GeneratorModel& model, const std::filesystem::path& path) {
  nlohmann::json cont = nlohmann::json::array();
  for (const auto& t : model.continuous_) cont.push_back(transform_json(t));
  nlohmann::json disc = nlohmann::json::array();
  for (const auto& t : model.discrete_) disc.push_back(transform_json(t));
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& r : model.loss_trace_) trace.push_back({r.epoch, r.step, r.dis_loss, r.gen_loss});
  const nlohmann::json doc{{"schema", model.schema_.to_json()},
                           {"fingerprint", model.fingerprint()},
                           {"categories", model.categories_},
                           {"config", model.config_.to_json()},
                           {"continuous", cont},
                           {"discrete", disc},
                           {"generator", model.generator_.to_json()},
                           {"loss_trace", trace},
                           {"training_rows", model.training_rows_},
                           {"training_source", model.training_source_}};
  write_container(path, kGeneratorMagic, kGeneratorVersion, doc);
}

GeneratorModel load_generator(const std::filesystem::path& path) {
  const nlohmann::json doc = read_container(path, kGeneratorMagic, kGeneratorVersion);
  GeneratorModel m;
  try {
    m.schema_ = Schema::from_json(doc.at("schema"));
    if (m.schema_.fingerprint() != doc.at("fingerprint").get<std::string>()) {
      throw ArtifactError(path.string() + ": stored fingerprint does not match stored schema");
    }
    m.categories_ = doc.at("categories").get<CategoryTables>();
    m.config_ = GanConfig::from_json(doc.at("config"));
    for (const auto& t : doc.at("continuous")) {
      ModeTransform mt;
      mt.column = t.at("column").get<std::size_t>();
      mt.means = t.at("means").get<std::vector<double>>();
      mt.stds = t.at("stds").get<std::vector<double>>();
      mt.weights = t.at("weights").get<std::vector<double>>();
      mt.min = t.at("min").get<double>();
      mt.max = t.at("max").get<double>();
      m.continuous_.push_back(std::move(mt));
    }
    for (const auto& t : doc.at("discrete")) {
      DiscreteTransform dt;
      dt.column = t.at("column").get<std::size_t>();
      dt.codes = t.at("codes").get<std::vector<int>>();
      dt.frequencies = t.at("frequencies").get<std::vector<double>>();
      dt.conditioned = t.at("conditioned").get<bool>();
      m.discrete_.push_back(std::move(dt));
    }
    m.generator_ = nn::ResidualGenerator::from_json(doc.at("generator"));
    for (const auto& r : doc.at("loss_trace")) {
      m.loss_trace_.push_back({r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>(),
                               r.at(2).get<double>(), r.at(3).get<double>()});
    }
    m.training_rows_ = doc.at("training_rows").get<std::size_t>();
    m.training_source_ = doc.at("training_source").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  } catch (const SchemaError& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const ArtifactError*>(&e)) throw;
    throw ArtifactError(path.string() + ": " + e.what());
  }
  return m;
}

GeneratorModel load_generator(const std::filesystem::path& path, const Schema& expected) {
  GeneratorModel m = load_generator(path);
  if (m.fingerprint() != expected.fingerprint()) {
    throw ArtifactError(path.string() + ": generator schema " + m.fingerprint() +
                        " does not match expected schema " + expected.fingerprint());
  }
  return m;
}

}  // namespace ensgan
