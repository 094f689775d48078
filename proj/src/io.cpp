#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ends_sqfn/experiments.hpp"

namespace ends_sqfn::experiments {

using nlohmann::json;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

namespace {

// JSON has no inf/nan; they are written as strings.
json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

}  // namespace

json to_json(const EnvelopeFit<double>& fit) {
  return {{"regime", to_string(fit.regime)},  {"c_lower", num(fit.c_lower)}, {"c_upper", num(fit.c_upper)},
          {"C_lower", num(fit.C_lower)},      {"C_upper", num(fit.C_upper)}, {"max_violation", num(fit.max_violation)}};
}

json to_json(const BoundReport<double>& rep) {
  return {{"bound_id", to_string(rep.bound_id)},
          {"envelope_case", rep.envelope_case},
          {"fitted_constant", num(rep.fitted_constant)},
          {"fitted_rate", num(rep.fitted_rate)},
          {"pass", rep.pass},
          {"small_scale_consistent", rep.small_scale_consistent},
          {"worst_point", {{"euclid_sep", num(rep.worst_point.euclid_sep)}, {"torus_seps", nums(rep.worst_point.torus_seps)}}},
          {"worst_k", num(rep.worst_k)},
          {"samples", rep.samples}};
}

json to_json(const ThresholdReport<double>& rep) {
  json verdicts = json::array();
  for (const auto& v : rep.verdicts) {
    verdicts.push_back({{"p", num(v.p)},
                        {"finite", v.finite},
                        {"inconclusive", v.inconclusive},
                        {"exponent", num(v.exponent)},
                        {"inner_exponent", num(v.inner_exponent)},
                        {"outer_exponent", num(v.outer_exponent)},
                        {"value", num(v.value)}});
  }
  json j{{"integral_id", to_string(rep.integral_id)},
         {"n_i", rep.n_i},
         {"n_j", rep.n_j},
         {"r_outer", num(rep.r_outer)},
         {"tol_exp", num(rep.tol_exp)},
         {"p_grid", nums(rep.p_grid)},
         {"verdicts", verdicts}};
  j["predicted_cutoff"] = rep.predicted_cutoff ? num(*rep.predicted_cutoff) : json(nullptr);
  j["detected_cutoff"] = rep.detected_cutoff ? num(*rep.detected_cutoff) : json(nullptr);
  return j;
}

json to_json(const HSupFit<double>& fit) {
  json sup = json::array(), arg = json::array();
  for (const auto& row : fit.sup) sup.push_back(nums(row));
  for (const auto& row : fit.argmax_lambda) arg.push_back(nums(row));
  return {{"M", fit.M},
          {"c", num(fit.c)},
          {"C", num(fit.C)},
          {"residual", num(fit.residual)},
          {"pass", fit.pass},
          {"worst_r", num(fit.worst_r)},
          {"worst_k", num(fit.worst_k)},
          {"r_grid", nums(fit.r_grid)},
          {"k_grid", nums(fit.k_grid)},
          {"per_k_rate", nums(fit.per_k_rate)},
          {"sup", sup},
          {"argmax_lambda", arg}};
}

json to_json(const SweepResult& res) {
  return {{"eps_grid", nums(res.eps_grid)},
          {"ratios", nums(res.ratios)},
          {"slope", num(res.slope)},
          {"slope_stderr", num(res.slope_stderr)}};
}

json to_json(const ReverseResult& res) {
  return {{"max_ratio", num(res.max_ratio)}, {"names", res.names}, {"ratios", nums(res.ratios)}};
}

json to_json(const L2Result& res) {
  return {{"expected", num(res.expected)}, {"worst_rel_error", num(res.worst_rel_error)}, {"ratios", nums(res.ratios)}};
}

namespace {

std::string escape_xml(const std::string& s) {
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

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                     const std::vector<PlotSeries>& series, bool log_x, bool log_y) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  const double W = 640, H = 420, left = 70, right = 170, top = 40, bottom = 50;
  auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double a = tx(s.x[i]), b = ty(s.y[i]);
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      x0 = std::min(x0, a), x1 = std::max(x1, a), y0 = std::min(y0, b), y1 = std::max(y1, b);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad, y1 += pad;
  auto sx = [&](double a) { return left + (a - x0) / (x1 - x0) * (W - left - right); };
  auto sy = [&](double b) { return H - bottom - (b - y0) / (y1 - y0) * (H - top - bottom); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << px(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(title) << "</text>\n";
  os << "<rect x=\"" << px(left) << "\" y=\"" << px(top) << "\" width=\"" << px(W - left - right) << "\" height=\""
     << px(H - top - bottom) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double a = x0 + (x1 - x0) * t / 4, b = y0 + (y1 - y0) * t / 4;
    char ta[32], tb[32];
    std::snprintf(ta, sizeof ta, "%.4g", log_x ? std::pow(10.0, a) : a);
    std::snprintf(tb, sizeof tb, "%.4g", log_y ? std::pow(10.0, b) : b);
    os << "<text x=\"" << px(sx(a)) << "\" y=\"" << px(H - bottom + 16) << "\" text-anchor=\"middle\">" << ta << "</text>\n";
    os << "<text x=\"" << px(left - 6) << "\" y=\"" << px(sy(b) + 4) << "\" text-anchor=\"end\">" << tb << "</text>\n";
  }
  os << "<text x=\"" << px(left + (W - left - right) / 2) << "\" y=\"" << px(H - 12) << "\" text-anchor=\"middle\">"
     << escape_xml(xlabel) << (log_x ? " (log)" : "") << "</text>\n";
  os << "<text transform=\"translate(16," << px(top + (H - top - bottom) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape_xml(ylabel) << (log_y ? " (log)" : "") << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % 6];
    std::string pts;
    for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i) {
      const double a = tx(series[s].x[i]), b = ty(series[s].y[i]);
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      pts += px(sx(a)) + "," + px(sy(b)) + " ";
      os << "<circle cx=\"" << px(sx(a)) << "\" cy=\"" << px(sy(b)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    os << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    const double ly = top + 14 + 18 * s;
    os << "<line x1=\"" << px(W - right + 10) << "\" y1=\"" << px(ly - 4) << "\" x2=\"" << px(W - right + 30)
       << "\" y2=\"" << px(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << px(W - right + 36) << "\" y=\"" << px(ly) << "\">" << escape_xml(series[s].name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace ends_sqfn::experiments
