#include "celllts/cli_io.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace celllts {

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

CellmapSort parse_cellmap_sort(const std::string& s) {
  if (s == "abs-residual-sum") return CellmapSort::AbsResidualSum;
  if (s == "flag-count") return CellmapSort::FlagCount;
  throw Error("unknown sort '" + s + "' (expected abs-residual-sum or flag-count)");
}

namespace {

struct Rgb {
  double r, g, b;
};

constexpr Rgb kNeutral{0.96, 0.96, 0.96};
constexpr Rgb kWarm{0.80, 0.05, 0.05};
constexpr Rgb kCool{0.05, 0.25, 0.80};
constexpr Rgb kWarmStart{0.99, 0.82, 0.70};
constexpr Rgb kCoolStart{0.75, 0.84, 0.98};
constexpr const char* kMissingFill = "#a0a0a0";

std::string hex(const Rgb& c) {
  auto byte = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", byte(c.r), byte(c.g), byte(c.b));
  return buf;
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

double cell_value(const CellResiduals& res, Index i, Index j) {
  const Index d = res.predictor_stdres.cols();
  return j < d ? res.predictor_stdres(i, j) : res.response_stdres(i);
}

}  // namespace

std::string cellmap_color(double s, const CellmapOptions& opts) {
  if (is_missing(s)) return kMissingFill;
  const double a = std::abs(s);
  if (a <= opts.cutoff) return hex(kNeutral);
  const double t = std::isinf(a) ? 1.0 : std::clamp((a - opts.cutoff) / (opts.saturation - opts.cutoff), 0.0, 1.0);
  return s > 0 ? hex(mix(kWarmStart, kWarm, t)) : hex(mix(kCoolStart, kCool, t));
}

std::vector<Index> cellmap_rows(const CellResiduals& res, const CellmapOptions& opts) {
  const Index n = res.response_stdres.size();
  const Index cols = res.predictor_stdres.cols() + 1;
  std::vector<double> key(static_cast<std::size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i) {
    double k = 0.0;
    for (Index j = 0; j < cols; ++j) {
      if (opts.sort_by == CellmapSort::FlagCount) {
        k += res.flagged(i, j);
      } else {
        const double v = cell_value(res, i, j);
        if (!is_missing(v)) k += std::abs(v);
      }
    }
    key[static_cast<std::size_t>(i)] = k;
  }
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) {
    return key[static_cast<std::size_t>(a)] > key[static_cast<std::size_t>(b)];
  });
  if (opts.top_n > 0 && opts.top_n < n) idx.resize(static_cast<std::size_t>(opts.top_n));
  return idx;
}

std::string render_cellmap(const CellResiduals& res, const std::vector<std::string>& row_labels,
                           const std::vector<std::string>& column_labels, const CellmapOptions& opts) {
  const Index n = res.response_stdres.size();
  const Index cols = res.predictor_stdres.cols() + 1;
  if (!row_labels.empty() && static_cast<Index>(row_labels.size()) != n) {
    throw Error("cellmap: row label count does not match residuals");
  }
  if (!column_labels.empty() && static_cast<Index>(column_labels.size()) != cols) {
    throw Error("cellmap: column label count does not match residuals");
  }
  const std::vector<Index> rows = cellmap_rows(res, opts);
  const int cs = opts.cell_size;
  const int left = 120, top = 110;
  const int width = left + cs * static_cast<int>(cols) + 10;
  const int height = top + cs * static_cast<int>(rows.size()) + 10;

  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n",
                width, height, width, height);
  out += buf;
  out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out += "<g font-family=\"sans-serif\" font-size=\"11\">\n";

  for (Index j = 0; j < cols; ++j) {
    const std::string label = column_labels.empty()
                                  ? (j + 1 == cols ? std::string("y") : "X" + std::to_string(j + 1))
                                  : column_labels[static_cast<std::size_t>(j)];
    const int x = left + cs * static_cast<int>(j) + cs / 2 + 4;
    std::snprintf(buf, sizeof(buf), "<text x=\"%d\" y=\"%d\" transform=\"rotate(-60 %d %d)\">", x, top - 4, x,
                  top - 4);
    out += buf;
    out += xml_escape(label) + "</text>\n";
  }

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index i = rows[r];
    const int y = top + cs * static_cast<int>(r);
    const std::string label = row_labels.empty() ? std::to_string(i + 1) : row_labels[static_cast<std::size_t>(i)];
    std::snprintf(buf, sizeof(buf), "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">", left - 4, y + cs - 5);
    out += buf;
    out += xml_escape(label) + "</text>\n";
    for (Index j = 0; j < cols; ++j) {
      const int x = left + cs * static_cast<int>(j);
      const double v = cell_value(res, i, j);
      const bool miss = res.missing(i, j) != 0 || is_missing(v);
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\" stroke=\"#ffffff\"/>\n", x, y,
                    cs, cs, miss ? kMissingFill : cellmap_color(v, opts).c_str());
      out += buf;
      if (miss) {
        std::snprintf(buf, sizeof(buf), "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\">\xC3\x97</text>\n",
                      x + cs / 2, y + cs - 5);
        out += buf;
      }
    }
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace celllts
