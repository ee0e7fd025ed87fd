#pragma once

#include "celllts/numeric_core.hpp"
#include "celllts/pipeline.hpp"
#include "celllts/simharness.hpp"

#include <string>
#include <vector>

namespace celllts {

// ---- CSV ------------------------------------------------------------------

// Raw comma-separated table with a header row. Double-quoted fields are
// supported; embedded quotes are doubled.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Index column(const std::string& name) const;  // -1 if absent
};

CsvTable parse_csv_table(const std::string& text);

// Empty, "NA" and "NaN" are Missing.
bool parse_cell(const std::string& field, double& out);

struct CsvData {
  MaskedMatrix x;
  Vector y;                 // empty when no response column was requested
  std::string response_name;
  std::vector<std::string> row_labels;  // empty unless a label column was given
};

// Every column other than the response and the label column becomes a
// predictor and must be numeric. An empty `response_column` reads all
// numeric columns into `x`.
CsvData parse_csv_text(const std::string& text, const std::string& response_column,
                       const std::string& label_column = "");
CsvData parse_csv(const std::string& path, const std::string& response_column,
                  const std::string& label_column = "");

// Picks the named columns (in order) from a table; used to line up new data
// with a stored model.
MaskedMatrix select_columns(const CsvTable& table, const std::vector<std::string>& names);

std::string format_csv(const MaskedMatrix& m);
void write_csv(const std::string& path, const MaskedMatrix& m);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// ---- model JSON -----------------------------------------------------------

inline constexpr int kModelSchemaVersion = 1;

std::string serialize_model(const CellLtsModel& m);
// Validates the schema version, all dimensions and that Sigma is positive
// definite.
CellLtsModel deserialize_model(const std::string& json_text);

// ---- cellmap --------------------------------------------------------------

enum class CellmapSort { AbsResidualSum, FlagCount };

struct CellmapOptions {
  Index top_n = 0;  // 0 keeps every row
  CellmapSort sort_by = CellmapSort::AbsResidualSum;
  double cutoff = 2.5758;
  double saturation = 6.0;
  int cell_size = 18;
};

CellmapSort parse_cellmap_sort(const std::string& s);

// Row indices shown in the map, in display order. Ties keep the original
// order.
std::vector<Index> cellmap_rows(const CellResiduals& res, const CellmapOptions& opts);

// Fill colour "#rrggbb" for one standardized residual.
std::string cellmap_color(double stdres, const CellmapOptions& opts);

std::string render_cellmap(const CellResiduals& res, const std::vector<std::string>& row_labels,
                           const std::vector<std::string>& column_labels,
                           const CellmapOptions& opts = {});

// ---- curves ---------------------------------------------------------------

struct CurvePoint {
  std::string estimator;
  double gamma = 0.0;
  Index n = 0;        // rows with finite md and mse
  Index failed = 0;   // rows with NaN metrics
  double mean_md = 0.0;
  double log10_mean_md = 0.0;
  double mean_mse = 0.0;
  double log10_mean_mse = 0.0;
};

// Grouped by estimator (first appearance order) then ascending gamma.
std::vector<CurvePoint> emit_curves(const std::vector<ResultRow>& rows);
std::string curves_to_csv(const std::vector<CurvePoint>& pts);
// Line plot of log10 mean MD against gamma, one polyline per estimator.
std::string curves_to_svg(const std::vector<CurvePoint>& pts);

std::string xml_escape(const std::string& s);

}  // namespace celllts
