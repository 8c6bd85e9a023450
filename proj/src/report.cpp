#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "json.hpp"
#include "sublinear/evaluation.hpp"

namespace sublinear {

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string join(const std::vector<int>& values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out.push_back(sep);
    out += std::to_string(values[i]);
  }
  return out;
}

nlohmann::ordered_json fit_json(const std::optional<ExponentFit>& fit) {
  if (!fit) return nullptr;
  return {{"a", fit->a},
          {"intercept", fit->intercept},
          {"residual", fit->residual},
          {"a_through_origin", fit->a_through_origin},
          {"residual_through_origin", fit->residual_through_origin},
          {"points", fit->points}};
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::string out;
  out += "# config\nkey,value\n";
  for (const auto& [key, value] : report.config) out += key + "," + value + "\n";
  if (!report.precision.empty()) {
    out += "# precision\ntolerance,precision\n";
    for (std::size_t t = 0; t < report.precision.size(); ++t) {
      out += std::to_string(t) + "," + number(report.precision[t]) + "\n";
    }
    out += "# summary\nqueries,no_match,storage_bytes\n";
    out += std::to_string(report.queries) + "," + std::to_string(report.no_match) + "," +
           std::to_string(report.storage_bytes) + "\n";
  }
  if (!report.sweeps.empty()) {
    out += "# sweep\nmethod,target,n,reached,k,rho,d_prime,taus,storage_bytes,precision\n";
    for (const auto& s : report.sweeps) {
      for (const auto& p : s.points) {
        out += s.method + "," + number(s.target) + "," + std::to_string(p.n) + "," + (p.reached ? "1" : "0") + ",";
        if (p.reached) {
          out += std::to_string(p.k) + "," + number(p.rho) + "," + std::to_string(p.d_prime) + "," + join(p.taus, ' ') +
                 "," + std::to_string(p.storage_bytes) + "," + number(p.precision) + "\n";
        } else {
          out += ",,,,,\n";
        }
      }
    }
    out += "# fit\nmethod,target,a,intercept,residual,a_through_origin,residual_through_origin,points\n";
    for (const auto& s : report.sweeps) {
      out += s.method + "," + number(s.target) + ",";
      if (s.fit) {
        out += number(s.fit->a) + "," + number(s.fit->intercept) + "," + number(s.fit->residual) + "," +
               number(s.fit->a_through_origin) + "," + number(s.fit->residual_through_origin) + "," +
               std::to_string(s.fit->points) + "\n";
      } else {
        out += ",,,,,\n";
      }
    }
  }
  if (!report.k_sweep.empty()) {
    out += "# pattern_count\nk,hierarchical_taus,hierarchical_d_prime,hierarchical_bytes,hierarchical_precision,"
           "coprime_taus,coprime_d_prime,coprime_bytes,coprime_precision\n";
    for (const auto& p : report.k_sweep) {
      out += std::to_string(p.k) + "," + join(p.hierarchical_taus, ' ') + "," + std::to_string(p.hierarchical_d_prime) +
             "," + std::to_string(p.hierarchical_bytes) + "," + number(p.hierarchical_precision) + "," +
             join(p.coprime_taus, ' ') + "," + std::to_string(p.coprime_d_prime) + "," +
             std::to_string(p.coprime_bytes) + "," + number(p.coprime_precision) + "\n";
    }
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  for (const auto& [key, value] : report.config) config[key] = value;
  j["config"] = config;
  if (!report.precision.empty()) {
    j["queries"] = report.queries;
    j["no_match"] = report.no_match;
    j["storage_bytes"] = report.storage_bytes;
    nlohmann::ordered_json curve = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < report.precision.size(); ++t) {
      curve.push_back({{"tolerance", t}, {"precision", report.precision[t]}});
    }
    j["precision"] = curve;
  }
  if (!report.sweeps.empty()) {
    nlohmann::ordered_json sweeps = nlohmann::ordered_json::array();
    for (const auto& s : report.sweeps) {
      nlohmann::ordered_json points = nlohmann::ordered_json::array();
      for (const auto& p : s.points) {
        nlohmann::ordered_json point = {{"n", p.n}, {"reached", p.reached}};
        if (p.reached) {
          point["k"] = p.k;
          point["rho"] = p.rho;
          point["d_prime"] = p.d_prime;
          point["taus"] = p.taus;
          point["storage_bytes"] = p.storage_bytes;
          point["precision"] = p.precision;
        }
        points.push_back(point);
      }
      sweeps.push_back({{"method", s.method}, {"target", s.target}, {"points", points}, {"fit", fit_json(s.fit)}});
    }
    j["sweeps"] = sweeps;
  }
  if (!report.k_sweep.empty()) {
    nlohmann::ordered_json ks = nlohmann::ordered_json::array();
    for (const auto& p : report.k_sweep) {
      ks.push_back({{"k", p.k},
                    {"hierarchical", {{"taus", p.hierarchical_taus}, {"d_prime", p.hierarchical_d_prime},
                                      {"storage_bytes", p.hierarchical_bytes}, {"precision", p.hierarchical_precision}}},
                    {"coprime", {{"taus", p.coprime_taus}, {"d_prime", p.coprime_d_prime},
                                 {"storage_bytes", p.coprime_bytes}, {"precision", p.coprime_precision}}}});
    }
    j["pattern_count"] = ks;
  }
  return j.dump(2) + "\n";
}

std::string timing_json(const EvalReport& report) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (report.train_seconds) j["train_seconds"] = *report.train_seconds;
  if (report.query_seconds) j["query_seconds"] = *report.query_seconds;
  return j.dump(2) + "\n";
}

std::string svg_line_chart(const ChartSpec& chart) {
  constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 170, kTop = 40, kBottom = 55;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto tx = [&](double v) { return chart.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return chart.log_y ? std::log10(v) : v; };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : chart.series) {
    for (const auto& [x, y] : s.points) {
      if ((chart.log_x && x <= 0) || (chart.log_y && y <= 0)) continue;
      x0 = std::min(x0, tx(x));
      x1 = std::max(x1, tx(x));
      y0 = std::min(y0, ty(y));
      y1 = std::max(y1, ty(y));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad;
  y1 += ypad;
  auto px = [&](double v) { return kLeft + (tx(v) - x0) / (x1 - x0) * plot_w; };
  auto py = [&](double v) { return kTop + plot_h - (ty(v) - y0) / (y1 - y0) * plot_h; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + number(kWidth) + "\" height=\"" +
                    number(kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + number(kLeft + plot_w / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         escape_xml(chart.title) + "</text>\n";
  svg += "<rect x=\"" + number(kLeft) + "\" y=\"" + number(kTop) + "\" width=\"" + number(plot_w) + "\" height=\"" +
         number(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";

  // Five evenly spaced ticks in transformed space; log axes label 10^t.
  for (int i = 0; i <= 4; ++i) {
    const double t = x0 + (x1 - x0) * i / 4.0;
    const double v = chart.log_x ? std::pow(10.0, t) : t;
    const double x = kLeft + plot_w * i / 4.0;
    svg += "<line x1=\"" + number(x) + "\" y1=\"" + number(kTop + plot_h) + "\" x2=\"" + number(x) + "\" y2=\"" +
           number(kTop + plot_h + 5) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + number(x) + "\" y=\"" + number(kTop + plot_h + 18) + "\" text-anchor=\"middle\">" +
           number(std::round(v * 1000) / 1000) + "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double t = y0 + (y1 - y0) * i / 4.0;
    const double v = chart.log_y ? std::pow(10.0, t) : t;
    const double y = kTop + plot_h - plot_h * i / 4.0;
    svg += "<line x1=\"" + number(kLeft - 5) + "\" y1=\"" + number(y) + "\" x2=\"" + number(kLeft) + "\" y2=\"" +
           number(y) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + number(kLeft - 8) + "\" y=\"" + number(y + 4) + "\" text-anchor=\"end\">" +
           number(std::round(v * 1000) / 1000) + "</text>\n";
  }
  svg += "<text x=\"" + number(kLeft + plot_w / 2) + "\" y=\"" + number(kHeight - 12) + "\" text-anchor=\"middle\">" +
         escape_xml(chart.x_label) + (chart.log_x ? " (log)" : "") + "</text>\n";
  svg += "<text transform=\"translate(16," + number(kTop + plot_h / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape_xml(chart.y_label) + (chart.log_y ? " (log)" : "") + "</text>\n";

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const std::string color = kColors[s % std::size(kColors)];
    std::string path;
    std::string marks;
    for (const auto& [x, y] : chart.series[s].points) {
      if ((chart.log_x && x <= 0) || (chart.log_y && y <= 0)) continue;
      path += (path.empty() ? "" : " ") + number(px(x)) + "," + number(py(y));
      marks += "<circle cx=\"" + number(px(x)) + "\" cy=\"" + number(py(y)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    if (!path.empty()) {
      svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"" + path + "\"/>\n";
      svg += marks;
    }
    const double ly = kTop + 12 + 18.0 * static_cast<double>(s);
    svg += "<line x1=\"" + number(kLeft + plot_w + 12) + "\" y1=\"" + number(ly) + "\" x2=\"" +
           number(kLeft + plot_w + 32) + "\" y2=\"" + number(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + number(kLeft + plot_w + 38) + "\" y=\"" + number(ly + 4) + "\">" +
           escape_xml(chart.series[s].name) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string precision_chart(const EvalReport& report) {
  if (report.precision.empty()) return {};
  ChartSpec chart{"Precision vs frame tolerance", "tolerance (frames)", "precision", false, false, {}};
  ChartSeries s{"precision", {}};
  for (std::size_t t = 0; t < report.precision.size(); ++t) s.points.emplace_back(static_cast<double>(t), report.precision[t]);
  chart.series.push_back(std::move(s));
  return svg_line_chart(chart);
}

std::string storage_chart(const EvalReport& report) {
  if (report.sweeps.empty()) return {};
  ChartSpec chart{"Storage vs database size", "N (scenes)", "storage (bytes)", true, true, {}};
  for (const auto& sweep : report.sweeps) {
    ChartSeries s{sweep.method + " @" + number(100 * sweep.target) + "%", {}};
    if (sweep.fit) s.name += " a=" + number(std::round(sweep.fit->a * 1000) / 1000);
    for (const auto& p : sweep.points) {
      if (p.reached) s.points.emplace_back(static_cast<double>(p.n), static_cast<double>(p.storage_bytes));
    }
    chart.series.push_back(std::move(s));
  }
  return svg_line_chart(chart);
}

std::string k_chart(const EvalReport& report) {
  if (report.k_sweep.empty()) return {};
  ChartSpec chart{"Precision vs pattern count", "k", "precision", false, false, {}};
  ChartSeries h{"hierarchical", {}}, c{"coprime", {}};
  for (const auto& p : report.k_sweep) {
    h.points.emplace_back(p.k, p.hierarchical_precision);
    c.points.emplace_back(p.k, p.coprime_precision);
  }
  chart.series = {h, c};
  return svg_line_chart(chart);
}

}  // namespace sublinear
