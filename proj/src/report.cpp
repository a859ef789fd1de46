#include "ensgan/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "ensgan/common.hpp"

namespace ensgan {
namespace {

std::string fixed3(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", *v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

}  // namespace

std::string fraction_label(double fraction) {
  const double pct = fraction * 100.0;
  char buf[32];
  if (std::abs(pct - std::round(pct)) < 1e-9) {
    std::snprintf(buf, sizeof(buf), "%.0f%%", pct);
  } else {
    std::snprintf(buf, sizeof(buf), "%g%%", pct);
  }
  return buf;
}

std::string comparison_table_csv(const ComparisonTable& table) {
  std::ostringstream out;
  out << "Use case,Subpopulation,n,SMOTE,RUS,Ens.,Ens. GAN,Selected fraction\n";
  for (const auto& r : table.rows) {
    out << csv_field(r.use_case) << ',' << csv_field(r.sp) << ',' << r.n_test << ','
        << fixed3(r.smote) << ',' << fixed3(r.rus) << ',' << fixed3(r.ensemble) << ','
        << fixed3(r.ensemble_gan) << ','
        << (r.selected_fraction ? fraction_label(*r.selected_fraction) : "NA") << '\n';
  }
  return out.str();
}

std::string comparison_table_text(const ComparisonTable& table) {
  const std::vector<std::string> header{"Use case", "Subpopulation", "n",   "SMOTE",
                                        "RUS",      "Ens.",          "Ens. GAN"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : table.rows) {
    const std::optional<double> scores[] = {r.smote, r.rus, r.ensemble, r.ensemble_gan};
    double best = -1.0;
    for (const auto& s : scores) {
      if (s) best = std::max(best, std::round(*s * 1000.0));
    }
    std::vector<std::string> row{r.use_case, r.sp, std::to_string(r.n_test)};
    for (const auto& s : scores) {
      std::string cell = fixed3(s);
      if (s && std::round(*s * 1000.0) == best) cell += "*";
      row.push_back(cell);
    }
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << "  ";
      // text columns left-aligned, numbers right-aligned
      if (c < 2) {
        out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      } else {
        out << std::right << std::setw(static_cast<int>(width[c])) << row[c];
      }
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& row : cells) line(row);
  if (table.rows.empty()) out << kNoTargetsMessage << '\n';
  return out.str();
}

std::vector<CurveSeries> curve_series(const SweepResult& sweep, const std::string& sp,
                                      const std::string& metric) {
  if (!is_metric_name(metric)) throw ConfigError("unknown metric '" + metric + "'");
  CurveSeries spm{"SP model (SP test)", {}};
  CurveSeries fpm{"full-population model (full test)", {}};
  CurveSeries fps{"full-population model (SP test)", {}};
  for (double f : sweep.fractions) {
    const SweepPoint* p = sweep.find(sp, f);
    const bool ok = p && p->ok();
    spm.values.push_back(ok && p->sp_model ? p->sp_model->get(metric) : std::nullopt);
    fpm.values.push_back(ok && p->fullpop_model ? p->fullpop_model->get(metric) : std::nullopt);
    fps.values.push_back(ok && p->fullpop_on_sp ? p->fullpop_on_sp->get(metric) : std::nullopt);
  }
  return {spm, fpm, fps};
}

std::string curve_plot_svg(const std::string& title, const std::vector<double>& fractions,
                           const std::vector<CurveSeries>& series, const std::string& metric) {
  const double W = 760, H = 420, left = 60, right = 20, top = 40, bottom = 110;
  const double pw = W - left - right, ph = H - top - bottom;
  const std::size_t n = fractions.size();

  double lo = 1.0, hi = 0.0;
  for (const auto& s : series) {
    for (const auto& v : s.values) {
      if (v) {
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
      }
    }
  }
  if (lo > hi) {
    lo = 0.0;
    hi = 1.0;
  }
  lo = std::max(0.0, std::floor(lo * 20.0 - 1.0) / 20.0);
  hi = std::min(1.0, std::ceil(hi * 20.0 + 1.0) / 20.0);
  if (hi - lo < 0.1) hi = std::min(1.0, lo + 0.1);

  auto xpos = [&](std::size_t i) {
    return n <= 1 ? left + pw / 2 : left + pw * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  auto ypos = [&](double v) { return top + ph * (hi - v) / (hi - lo); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
      << top + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = lo + (hi - lo) * t / 5.0;
    out << "<text x=\"" << left - 6 << "\" y=\"" << num(ypos(v) + 4)
        << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << num(ypos(v)) << "\" x2=\"" << left + pw
        << "\" y2=\"" << num(ypos(v)) << "\" stroke=\"#ddd\"/>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    out << "<text class=\"xtick\" x=\"" << num(xpos(i)) << "\" y=\"" << top + ph + 16
        << "\" text-anchor=\"end\" transform=\"rotate(-45 " << num(xpos(i)) << ' '
        << top + ph + 16 << ")\">" << fraction_label(fractions[i]) << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 40
      << "\" text-anchor=\"middle\">synthetic samples added (% of SP training size)</text>\n";
  out << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << top + ph / 2 << ")\">" << xml_escape(metric) << "</text>\n";

  std::vector<std::string> missing;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = kPalette[s % 4];
    std::string path;
    bool pen_down = false;
    for (std::size_t i = 0; i < n && i < series[s].values.size(); ++i) {
      const auto& v = series[s].values[i];
      if (!v) {
        pen_down = false;
        continue;
      }
      path += (pen_down ? " L " : " M ") + num(xpos(i)) + " " + num(ypos(*v));
      pen_down = true;
      out << "<circle cx=\"" << num(xpos(i)) << "\" cy=\"" << num(ypos(*v)) << "\" r=\"2.5\" fill=\""
          << colour << "\"/>\n";
    }
    if (!path.empty()) {
      out << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << colour
          << "\" stroke-width=\"1.5\"/>\n";
    }
    out << "<rect x=\"" << left + 10 + 230 * static_cast<double>(s) << "\" y=\"" << H - 22
        << "\" width=\"10\" height=\"10\" fill=\"" << colour << "\"/>\n";
    out << "<text x=\"" << left + 24 + 230 * static_cast<double>(s) << "\" y=\"" << H - 13 << "\">"
        << xml_escape(series[s].name) << "</text>\n";
  }
  if (!series.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= series[0].values.size() || !series[0].values[i]) missing.push_back(fraction_label(fractions[i]));
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    out << "<text x=\"" << W - right << "\" y=\"" << top - 6
        << "\" text-anchor=\"end\" fill=\"#a00\">missing: " << xml_escape(list) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string size_chart_svg(const std::string& title,
                           std::vector<std::pair<std::string, std::size_t>> sizes) {
  std::stable_sort(sizes.begin(), sizes.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const double W = 560, H = 360, left = 60, right = 20, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  const double max_size = sizes.empty() ? 1.0 : static_cast<double>(std::max<std::size_t>(sizes.front().second, 1));
  const double slot = sizes.empty() ? pw : pw / static_cast<double>(sizes.size());

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
      << top + ph << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double h = ph * static_cast<double>(sizes[i].second) / max_size;
    const double x = left + slot * static_cast<double>(i) + slot * 0.15;
    out << "<rect class=\"bar\" x=\"" << num(x) << "\" y=\"" << num(top + ph - h) << "\" width=\""
        << num(slot * 0.7) << "\" height=\"" << num(h) << "\" fill=\"#4c72b0\"/>\n";
    out << "<text x=\"" << num(x + slot * 0.35) << "\" y=\"" << num(top + ph - h - 4)
        << "\" text-anchor=\"middle\">" << sizes[i].second << "</text>\n";
    out << "<text x=\"" << num(x + slot * 0.35) << "\" y=\"" << top + ph + 16
        << "\" text-anchor=\"middle\">" << xml_escape(sizes[i].first) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string sweep_report_text(const SweepResult& sweep, const std::string& metric) {
  std::ostringstream out;
  if (sweep.subpops.empty()) {
    out << kNoTargetsMessage << '\n';
    return out.str();
  }
  for (const auto& sub : sweep.subpops) {
    out << "Subpopulation " << sub.sp << " (train " << sub.train_rows << ", test " << sub.test_rows
        << ")\n";
    out << "  " << std::left << std::setw(8) << "added" << std::right << std::setw(10) << "synthetic"
        << std::setw(12) << "SP model" << std::setw(12) << "full pop" << "  status\n";
    for (double f : sweep.fractions) {
      const SweepPoint* p = sweep.find(sub.sp, f);
      out << "  " << std::left << std::setw(8) << fraction_label(f) << std::right;
      if (!p) {
        out << std::setw(10) << "-" << std::setw(12) << "NA" << std::setw(12) << "NA"
            << "  missing\n";
        continue;
      }
      const auto sp_v = p->sp_model ? p->sp_model->get(metric) : std::nullopt;
      const auto fp_v = p->fullpop_model ? p->fullpop_model->get(metric) : std::nullopt;
      out << std::setw(10) << p->synthetic_rows << std::setw(12) << fixed3(sp_v) << std::setw(12)
          << fixed3(fp_v) << "  " << (p->ok() ? "ok" : "failed: " + p->error) << '\n';
    }
  }
  return out.str();
}

}  // namespace ensgan
