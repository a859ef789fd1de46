#include "ensgan/sweep.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "ensgan/common.hpp"

namespace ensgan {
namespace {

nlohmann::json optional_report(const std::optional<MetricReport>& r) {
  return r ? r->to_json() : nlohmann::json(nullptr);
}

std::optional<MetricReport> report_from(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
  return MetricReport::from_json(doc[key]);
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

const std::vector<double>& default_fractions() {
  static const std::vector<double> grid{0.0,  0.05, 0.10, 0.15, 0.20, 0.25, 0.30,
                                        0.35, 0.40, 0.45, 0.50, 0.60, 0.70, 0.80,
                                        0.90, 1.0,  1.5,  2.0,  5.0,  10.0};
  return grid;
}

void SweepConfig::normalize() {
  if (std::find(fractions.begin(), fractions.end(), 0.0) == fractions.end()) {
    fractions.push_back(0.0);
  }
  std::sort(fractions.begin(), fractions.end());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());
}

void SweepConfig::validate() const {
  if (fractions.empty()) throw ConfigError("no sweep fractions");
  for (double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("sweep fractions must be finite and >= 0");
  }
  if (std::find(fractions.begin(), fractions.end(), 0.0) == fractions.end()) {
    throw ConfigError("sweep fractions must include 0");
  }
  if (!(underperformance_margin >= 0.0)) throw ConfigError("underperformance_margin must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must be in [0, 1]");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

SweepConfig SweepConfig::from_json(const nlohmann::json& doc) {
  SweepConfig c;
  try {
    if (doc.contains("fractions")) c.fractions = doc["fractions"].get<std::vector<double>>();
    c.master_seed = doc.value("master_seed", c.master_seed);
    if (doc.contains("excluded_pms")) c.excluded_pms = doc["excluded_pms"].get<std::set<std::string>>();
    c.underperformance_margin = doc.value("underperformance_margin", c.underperformance_margin);
    c.train_fraction = doc.value("train_fraction", c.train_fraction);
    c.threshold = doc.value("threshold", c.threshold);
    c.workers = doc.value("workers", c.workers);
    c.max_failed_share = doc.value("max_failed_share", c.max_failed_share);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sweep config: ") + e.what());
  }
  c.normalize();
  c.validate();
  return c;
}

nlohmann::json SweepConfig::to_json() const {
  return {{"fractions", fractions},
          {"master_seed", master_seed},
          {"excluded_pms", excluded_pms},
          {"underperformance_margin", underperformance_margin},
          {"train_fraction", train_fraction},
          {"threshold", threshold},
          {"max_failed_share", max_failed_share}};
}

const SweepPoint* SweepResult::find(const std::string& sp, double fraction) const {
  for (const auto& p : points) {
    if (p.sp == sp && p.fraction == fraction) return &p;
  }
  return nullptr;
}

std::vector<const SweepPoint*> SweepResult::points_for(const std::string& sp) const {
  std::vector<const SweepPoint*> out;
  for (const auto& p : points) {
    if (p.sp == sp) out.push_back(&p);
  }
  std::sort(out.begin(), out.end(),
            [](const SweepPoint* a, const SweepPoint* b) { return a->fraction < b->fraction; });
  return out;
}

std::size_t SweepResult::failed_count() const {
  return static_cast<std::size_t>(
      std::count_if(points.begin(), points.end(), [](const SweepPoint& p) { return !p.ok(); }));
}

nlohmann::json SweepResult::to_json() const {
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& s : subpops) {
    subs.push_back({{"sp", s.sp},
                    {"total_rows", s.total_rows},
                    {"train_rows", s.train_rows},
                    {"test_rows", s.test_rows},
                    {"split_seed", s.split_seed},
                    {"generator_seed", s.generator_seed},
                    {"generator", s.generator},
                    {"generator_error", s.generator_error}});
  }
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) {
    pts.push_back({{"sp", p.sp},
                   {"fraction", p.fraction},
                   {"status", p.ok() ? "ok" : "failed"},
                   {"error", p.error},
                   {"real_train_rows", p.real_train_rows},
                   {"synthetic_rows", p.synthetic_rows},
                   {"synth_seed", p.synth_seed},
                   {"sp_model_seed", p.sp_model_seed},
                   {"fullpop_seed", p.fullpop_seed},
                   {"sp_model", optional_report(p.sp_model)},
                   {"fullpop_model", optional_report(p.fullpop_model)},
                   {"fullpop_on_sp", optional_report(p.fullpop_on_sp)}});
  }
  return {{"fractions", fractions}, {"subpops", subs}, {"points", pts}};
}

SweepResult SweepResult::from_json(const nlohmann::json& doc) {
  SweepResult r;
  try {
    r.fractions = doc.at("fractions").get<std::vector<double>>();
    for (const auto& s : doc.at("subpops")) {
      r.subpops.push_back({s.at("sp").get<std::string>(), s.at("total_rows").get<std::size_t>(),
                           s.at("train_rows").get<std::size_t>(),
                           s.at("test_rows").get<std::size_t>(),
                           s.at("split_seed").get<std::uint64_t>(),
                           s.at("generator_seed").get<std::uint64_t>(),
                           s.at("generator").get<std::string>(),
                           s.at("generator_error").get<std::string>()});
    }
    for (const auto& p : doc.at("points")) {
      SweepPoint pt;
      pt.sp = p.at("sp").get<std::string>();
      pt.fraction = p.at("fraction").get<double>();
      pt.status = p.at("status").get<std::string>() == "ok" ? PointStatus::kOk : PointStatus::kFailed;
      pt.error = p.at("error").get<std::string>();
      pt.real_train_rows = p.at("real_train_rows").get<std::size_t>();
      pt.synthetic_rows = p.at("synthetic_rows").get<std::size_t>();
      pt.synth_seed = p.at("synth_seed").get<std::uint64_t>();
      pt.sp_model_seed = p.at("sp_model_seed").get<std::uint64_t>();
      pt.fullpop_seed = p.at("fullpop_seed").get<std::uint64_t>();
      pt.sp_model = report_from(p, "sp_model");
      pt.fullpop_model = report_from(p, "fullpop_model");
      pt.fullpop_on_sp = report_from(p, "fullpop_on_sp");
      r.points.push_back(std::move(pt));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed sweep result: ") + e.what());
  }
  return r;
}

std::vector<Curve> build_curves(const SweepResult& sweep) {
  if (sweep.points.empty()) throw PipelineError("sweep has no points");
  std::map<std::string, Curve> curves;
  for (const auto& p : sweep.points) {
    Curve& c = curves[p.sp];
    c.sp = p.sp;
    if (!p.ok() || !p.sp_model || !p.fullpop_model) continue;
    c.points.push_back({p.fraction, *p.sp_model, *p.fullpop_model, p.fullpop_on_sp});
  }
  std::vector<Curve> out;
  for (auto& [sp, c] : curves) {
    std::sort(c.points.begin(), c.points.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.fraction < b.fraction; });
    if (c.points.empty() || c.points.front().fraction != 0.0) {
      throw PipelineError("subpopulation '" + sp + "' has no successful 0-fraction point");
    }
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      if (!(c.points[i].fraction > c.points[i - 1].fraction)) {
        throw PipelineError("duplicate fraction in curve of '" + sp + "'");
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string curves_csv(const std::vector<Curve>& curves) {
  std::ostringstream out;
  out << "sp,fraction,model_scope,metric,value\n";
  auto emit = [&](const std::string& sp, double f, const char* scope, const MetricReport& r) {
    for (const auto& [name, value] : r.values) {
      out << sp << ',' << shortest(f) << ',' << scope << ',' << name << ','
          << (value ? shortest(*value) : std::string("NA")) << '\n';
    }
  };
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      emit(c.sp, p.fraction, "sp_model", p.sp_model);
      emit(c.sp, p.fraction, "fullpop_model", p.fullpop_model);
      if (p.fullpop_on_sp) emit(c.sp, p.fraction, "fullpop_on_sp_test", *p.fullpop_on_sp);
    }
  }
  return out.str();
}

std::pair<double, MetricReport> select_best_fraction(const SweepResult& sweep,
                                                     const std::string& sp) {
  const SweepPoint* best = nullptr;
  double best_auc = -1.0;
  for (const SweepPoint* p : sweep.points_for(sp)) {
    if (!p->ok() || !p->sp_model) continue;
    const auto auc = p->sp_model->get(kRocAuc);
    if (!auc) continue;
    if (*auc > best_auc) {
      best_auc = *auc;
      best = p;
    }
  }
  if (!best) throw PipelineError("no successful sweep point for '" + sp + "'");
  return {best->fraction, *best->sp_model};
}

}  // namespace ensgan
