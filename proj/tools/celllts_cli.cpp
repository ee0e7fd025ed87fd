// Command-line front end: fit, predict, cellmap, simulate, mstar, curves.

#include "celllts/cli_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace celllts;

namespace {

std::string fmt(double v) {
  if (is_missing(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-")
    std::cout << content;
  else
    write_file(path, content);
}

// Predictor columns in model order plus the response if present.
struct Aligned {
  MaskedMatrix x;
  Vector y;
  std::vector<std::string> labels;
};

Aligned align(const CellLtsModel& m, const std::string& data_path, const std::string& label_col) {
  const CsvTable t = parse_csv_table(read_file(data_path));
  std::vector<std::string> names = m.column_names;
  if (names.empty()) throw Error("model has no column names");
  Aligned a;
  a.x = select_columns(t, names);
  const Index n = a.x.rows();
  a.y = Vector::Constant(n, kMissing);
  if (!m.response_name.empty() && t.column(m.response_name) >= 0) {
    a.y = select_columns(t, {m.response_name}).values.col(0);
  }
  if (!label_col.empty()) {
    const Index lc = t.column(label_col);
    if (lc < 0) throw Error("unknown label column '" + label_col + "'");
    for (const auto& r : t.rows) a.labels.push_back(r[static_cast<std::size_t>(lc)]);
  }
  return a;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regression robust to cellwise and casewise outliers"};
  app.require_subcommand(1);

  std::string data, response, out_model, model_path, out, label_col, sort_by = "abs-residual-sum";
  std::string config, results, out_svg;
  CellLtsOptions fo;
  std::uint64_t seed = 0;
  long long top_n = 0;
  long long mstar_n = 0;
  int workers = 0;

  auto* fit = app.add_subcommand("fit", "Fit a model to a CSV file");
  fit->add_option("--data", data, "Input CSV with header")->required();
  fit->add_option("--response-column", response, "Name of the response column")->required();
  fit->add_option("--out-model", out_model, "Output model JSON")->required();
  fit->add_option("--h-fraction", fo.h_fraction, "Coverage fraction h/n")->check(CLI::Range(0.5, 1.0));
  fit->add_option("--lambda", fo.lambda, "Ridge penalty")->check(CLI::PositiveNumber);
  fit->add_option("--k", fo.k, "Permutations for the pair scheme")->check(CLI::PositiveNumber);
  fit->add_flag("--full-pairs", fo.full_pairs, "Use all n(n-1)/2 pairs");
  fit->add_option("--label-column", label_col, "Non-numeric row label column to ignore");
  fit->add_option("--seed", seed, "Random seed");

  auto* pred = app.add_subcommand("predict", "Predict responses for new rows");
  pred->add_option("--model", model_path, "Model JSON")->required();
  pred->add_option("--data", data, "CSV containing the model's predictor columns")->required();
  pred->add_option("--out", out, "Output CSV (default stdout)");

  auto* cmap = app.add_subcommand("cellmap", "Render standardized cellwise residuals as SVG");
  cmap->add_option("--model", model_path, "Model JSON")->required();
  cmap->add_option("--data", data, "CSV with predictor and response columns")->required();
  cmap->add_option("--out-svg", out_svg, "Output SVG")->required();
  cmap->add_option("--top-n", top_n, "Rows to show (0 = all)")->check(CLI::NonNegativeNumber);
  cmap->add_option("--sort-by", sort_by, "abs-residual-sum or flag-count")
      ->check(CLI::IsMember({"abs-residual-sum", "flag-count"}));
  cmap->add_option("--label-column", label_col, "Column holding row labels");

  auto* sim = app.add_subcommand("simulate", "Run a contamination grid");
  sim->add_option("--config", config, "key = value config file")->required();
  sim->add_option("--out-csv", out, "Result CSV")->required();
  sim->add_option("--seed", seed, "Overrides the config seed");
  sim->add_option("--workers", workers, "Worker threads (default CELLLTS_WORKERS or 1)");

  auto* ms = app.add_subcommand("mstar", "Per-column contamination count tolerated after symmetrization");
  ms->add_option("n", mstar_n, "Sample size")->required()->check(CLI::Range(2LL, 1LL << 40));

  auto* cur = app.add_subcommand("curves", "Average a result CSV over replications");
  cur->add_option("--results", results, "Result CSV from simulate")->required();
  cur->add_option("--out", out, "Output table CSV (default stdout)");
  cur->add_option("--out-svg", out_svg, "Optional line plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*fit) {
      fo.seed = seed;
      const CsvData d = parse_csv(data, response, label_col);
      CellLtsModel m = fit_celllts(d.x, d.y, fo);
      m.response_name = d.response_name;
      write_file(out_model, serialize_model(m));
    } else if (*pred) {
      const CellLtsModel m = deserialize_model(read_file(model_path));
      const Aligned a = align(m, data, "");
      const GaussianConditioner g(m.cov_model.mu, m.cov_model.sigma);
      std::string csv = "row,yhat,flagged_cells\n";
      for (Index i = 0; i < a.x.rows(); ++i) {
        const Prediction p = predict(m, g, a.x.row(i));
        Index flagged = 0;
        for (Index j = 0; j < a.x.cols(); ++j) flagged += a.x.is_observed(i, j) && !p.w_row(j);
        csv += std::to_string(i + 1) + "," + fmt(p.yhat) + "," + std::to_string(flagged) + "\n";
      }
      emit(out, csv);
    } else if (*cmap) {
      const CellLtsModel m = deserialize_model(read_file(model_path));
      const Aligned a = align(m, data, label_col);
      const CellResiduals res = cell_residuals(m, a.x, a.y);
      CellmapOptions opts;
      opts.top_n = static_cast<Index>(top_n);
      opts.sort_by = parse_cellmap_sort(sort_by);
      opts.cutoff = flag_cutoff(m.options.flag_quantile);
      std::vector<std::string> cols = m.column_names;
      cols.push_back(m.response_name.empty() ? "y" : m.response_name);
      write_file(out_svg, render_cellmap(res, a.labels, cols, opts));
    } else if (*sim) {
      ExperimentConfig cfg = parse_config(read_file(config));
      if (sim->count("--seed")) cfg.seed = seed;
      write_file(out, results_to_csv(run_experiment(cfg, workers)));
    } else if (*ms) {
      const Index m = breakdown_mstar(static_cast<Index>(mstar_n));
      std::cout << m << "\n";
    } else if (*cur) {
      const auto pts = emit_curves(results_from_csv(read_file(results)));
      emit(out, curves_to_csv(pts));
      if (!out_svg.empty()) write_file(out_svg, curves_to_svg(pts));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
