#pragma once

#include "celllts/numeric_core.hpp"
#include "celllts/pipeline.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace celllts {

enum class SigmaKind { A09, ALYZ };
enum class PredictorDist { Normal, Exponential, Lognormal };
enum class Estimator { CellLTS, OLS };

std::string to_string(SigmaKind k);
std::string to_string(PredictorDist k);
std::string to_string(Estimator e);

struct ExperimentConfig {
  Index n = 100;
  Index d = 10;
  Index n_test = 0;  // 0 means n
  double eps = 0.2;
  std::vector<double> gamma_grid{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  SigmaKind sigma_kind = SigmaKind::A09;
  PredictorDist predictor_dist = PredictorDist::Normal;
  double R2 = 0.9;
  int n_reps = 10;
  std::uint64_t seed = 1;
  std::vector<Estimator> estimators{Estimator::CellLTS, Estimator::OLS};
  CellLtsOptions fit;          // seed is overridden per replication
  bool record_runtime = false;  // runtimes are nondeterministic; 0 when off

  void validate() const;
};

struct ResultRow {
  std::string estimator;
  double gamma = 0.0;
  int rep = 0;
  double md = 0.0;
  double mse = 0.0;
  double runtime_seconds = 0.0;
};

struct ResponseDraw {
  Vector y;
  double sigma2 = 0.0;
};

struct Contamination {
  Matrix data;
  BinaryMatrix mask;  // 1 = replaced
};

Matrix gen_sigma_a09(Index d);
Matrix gen_sigma_alyz(Index d, std::uint64_t seed);
Matrix gen_predictors(Index n, Index d, PredictorDist dist, const Matrix& sigma, std::uint64_t seed);
Vector default_beta(Index d);  // (d, d-1, ..., 1)
ResponseDraw gen_response(const Matrix& x, const Vector& beta, const Matrix& sigma_x, double R2,
                          std::uint64_t seed);

// Replaces floor(eps n) distinct random cells of each column j by
// centers_j + gamma * scales_j.
Contamination contaminate(const Matrix& m, double eps, double gamma, const Vector& centers,
                          const Vector& scales, std::uint64_t seed);

double metric_md(const Vector& beta_hat, const Vector& beta, const Matrix& sigma_x, double sigma2);
double metric_mse(const Vector& yhat, const Vector& ystar);

struct OlsFit {
  double alpha = 0.0;
  Vector beta;
  Vector column_means;
};
OlsFit fit_ols(const MaskedMatrix& x, const Vector& y);
double predict_ols(const OlsFit& fit, const Vector& x_new);

// Rows ordered by (gamma, rep, estimator) regardless of `workers`.
// workers <= 0 reads CELLLTS_WORKERS (default 1).
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, int workers = 0);

std::string results_to_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> results_from_csv(const std::string& text);

// Plain `key = value` lines; '#' starts a comment.
ExperimentConfig parse_config(const std::string& text);

int workers_from_env();

}  // namespace celllts
