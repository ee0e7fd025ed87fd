#include "celllts/cli_io.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

namespace celllts {

std::vector<CurvePoint> emit_curves(const std::vector<ResultRow>& rows) {
  std::vector<std::string> order;
  std::map<std::pair<std::string, double>, CurvePoint> acc;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.estimator) == order.end()) order.push_back(r.estimator);
    CurvePoint& p = acc[{r.estimator, r.gamma}];
    p.estimator = r.estimator;
    p.gamma = r.gamma;
    if (!std::isfinite(r.md) || !std::isfinite(r.mse)) {
      ++p.failed;
      continue;
    }
    ++p.n;
    p.mean_md += r.md;
    p.mean_mse += r.mse;
  }
  std::vector<CurvePoint> out;
  for (const auto& est : order) {
    for (auto& [key, p] : acc) {
      if (key.first != est) continue;
      if (p.n > 0) {
        p.mean_md /= static_cast<double>(p.n);
        p.mean_mse /= static_cast<double>(p.n);
      } else {
        p.mean_md = p.mean_mse = kMissing;
      }
      p.log10_mean_md = std::log10(p.mean_md);
      p.log10_mean_mse = std::log10(p.mean_mse);
      out.push_back(p);
    }
  }
  return out;
}

namespace {

std::string num(double v) {
  if (is_missing(v)) return "NaN";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string curves_to_csv(const std::vector<CurvePoint>& pts) {
  std::string out = "estimator,gamma,n,failed,mean_md,log10_mean_md,mean_mse,log10_mean_mse\n";
  for (const auto& p : pts) {
    out += p.estimator + "," + num(p.gamma) + "," + std::to_string(p.n) + "," + std::to_string(p.failed) + "," +
           num(p.mean_md) + "," + num(p.log10_mean_md) + "," + num(p.mean_mse) + "," + num(p.log10_mean_mse) +
           "\n";
  }
  return out;
}

std::string curves_to_svg(const std::vector<CurvePoint>& pts) {
  static const char* kColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"};
  const double w = 480, h = 320, ml = 50, mr = 110, mt = 20, mb = 40;
  double gmin = 1e300, gmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& p : pts) {
    if (!std::isfinite(p.log10_mean_md)) continue;
    gmin = std::min(gmin, p.gamma);
    gmax = std::max(gmax, p.gamma);
    ymin = std::min(ymin, p.log10_mean_md);
    ymax = std::max(ymax, p.log10_mean_md);
  }
  if (gmin > gmax) gmin = 0, gmax = 1, ymin = 0, ymax = 1;
  if (gmax == gmin) gmax = gmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double g) { return ml + (g - gmin) / (gmax - gmin) * (w - ml - mr); };
  auto py = [&](double v) { return h - mb - (v - ymin) / (ymax - ymin) * (h - mt - mb); };

  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\">\n", w, h);
  out += buf;
  out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
  std::snprintf(buf, sizeof(buf),
                "<path d=\"M%g %g V%g H%g\" fill=\"none\" stroke=\"#000000\"/>\n", ml, mt, h - mb, w - mr);
  out += buf;
  std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">gamma</text>\n",
                (ml + w - mr) / 2, h - 8);
  out += buf;
  std::snprintf(buf, sizeof(buf), "<text x=\"12\" y=\"%g\" transform=\"rotate(-90 12 %g)\" "
                "text-anchor=\"middle\">log10 mean MD</text>\n", (mt + h - mb) / 2, (mt + h - mb) / 2);
  out += buf;

  std::vector<std::string> ests;
  for (const auto& p : pts)
    if (std::find(ests.begin(), ests.end(), p.estimator) == ests.end()) ests.push_back(p.estimator);
  for (std::size_t e = 0; e < ests.size(); ++e) {
    const char* col = kColors[e % 5];
    std::string d;
    for (const auto& p : pts) {
      if (p.estimator != ests[e] || !std::isfinite(p.log10_mean_md)) continue;
      std::snprintf(buf, sizeof(buf), "%s%.2f %.2f", d.empty() ? "M" : " L", px(p.gamma), py(p.log10_mean_md));
      d += buf;
    }
    if (!d.empty()) {
      out += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + col + "\" stroke-width=\"2\"/>\n";
    }
    std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\" fill=\"%s\">", w - mr + 8,
                  mt + 14.0 * static_cast<double>(e + 1), col);
    out += buf;
    out += xml_escape(ests[e]) + "</text>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace celllts
