#include "celllts/simharness.hpp"

#include "celllts/seeding.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <thread>

namespace celllts {

std::string to_string(SigmaKind k) { return k == SigmaKind::A09 ? "A09" : "ALYZ"; }

std::string to_string(PredictorDist k) {
  switch (k) {
    case PredictorDist::Normal: return "normal";
    case PredictorDist::Exponential: return "exponential";
    case PredictorDist::Lognormal: return "lognormal";
  }
  return "normal";
}

std::string to_string(Estimator e) { return e == Estimator::CellLTS ? "cellLTS" : "OLS"; }

void ExperimentConfig::validate() const {
  if (n < 3 || d < 1) throw Error("config: need n >= 3 and d >= 1");
  if (!(eps >= 0.0 && eps < 0.5)) throw Error("config: eps must lie in [0, 0.5)");
  if (!(R2 > 0.0 && R2 < 1.0)) throw Error("config: R2 must lie in (0, 1)");
  if (n_reps < 1) throw Error("config: reps must be positive");
  if (gamma_grid.empty()) throw Error("config: empty gamma grid");
  if (estimators.empty()) throw Error("config: no estimators");
  if (sigma_kind == SigmaKind::ALYZ && d < 2) throw Error("config: ALYZ needs d >= 2");
}

Matrix gen_sigma_a09(Index d) {
  if (d < 1) throw Error("gen_sigma_a09: d must be positive");
  Matrix s(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) s(i, j) = std::pow(-0.9, static_cast<double>(std::abs(i - j)));
  return s;
}

namespace {

Matrix normal_matrix(Index n, Index d, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix g(n, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = nd(rng);
  return g;
}

Matrix to_correlation(const Matrix& s) {
  const Vector inv = s.diagonal().cwiseSqrt().cwiseInverse();
  const Matrix raw = inv.asDiagonal() * s * inv.asDiagonal();
  Matrix c = 0.5 * (raw + raw.transpose());
  c.diagonal().setOnes();
  return c;
}

Matrix sample_covariance(const Matrix& x) {
  const Matrix centered = x.rowwise() - x.colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

}  // namespace

Matrix gen_sigma_alyz(Index d, std::uint64_t seed) {
  if (d < 2) throw Error("gen_sigma_alyz: d must be at least 2");
  constexpr double kCond = 100.0;
  Rng rng = make_rng(seed, {0xa1b2ULL});
  Eigen::HouseholderQR<Matrix> qr(normal_matrix(d, d, rng));
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;

  Vector lam(d);
  for (Index j = 0; j < d; ++j)
    lam(j) = std::pow(kCond, static_cast<double>(j) / static_cast<double>(d - 1));
  Matrix s = q * lam.asDiagonal() * q.transpose();

  // Alternate between unit diagonal and a spectrum with condition number 100.
  for (int it = 0; it < 500; ++it) {
    s = to_correlation(s);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    const Vector ev = es.eigenvalues();
    const double lo = ev.minCoeff(), hi = ev.maxCoeff();
    if (std::abs(hi / lo - kCond) < 1e-10 * kCond) break;
    const double shift = (hi - kCond * lo) / (kCond - 1.0);
    const Vector shifted = ev.array() + shift;
    s = es.eigenvectors() * shifted.asDiagonal() * es.eigenvectors().transpose();
  }
  return to_correlation(s);
}

Matrix gen_predictors(Index n, Index d, PredictorDist dist, const Matrix& sigma, std::uint64_t seed) {
  if (sigma.rows() != d || sigma.cols() != d) throw Error("gen_predictors: sigma has wrong shape");
  Eigen::LLT<Matrix> target(sigma);
  if (target.info() != Eigen::Success) throw Error("gen_predictors: sigma is not positive definite");
  const Matrix k = target.matrixL();
  Rng rng = make_rng(seed, {0x9e11ULL});

  if (dist == PredictorDist::Normal) return normal_matrix(n, d, rng) * k.transpose();

  Matrix g(n, d);
  if (dist == PredictorDist::Exponential) {
    std::exponential_distribution<double> ed(1.0);
    for (Index j = 0; j < d; ++j)
      for (Index i = 0; i < n; ++i) g(i, j) = ed(rng) - 1.0;
  } else {
    std::normal_distribution<double> nd(0.0, 1.0);
    const double mean = std::exp(0.5);
    for (Index j = 0; j < d; ++j)
      for (Index i = 0; i < n; ++i) g(i, j) = std::exp(nd(rng)) - mean;
  }
  Eigen::LLT<Matrix> own(sample_covariance(g));
  if (own.info() != Eigen::Success) throw Error("gen_predictors: degenerate draw");
  // X = G L^{-T} K' has sample covariance K K' = Sigma exactly.
  const Matrix lt_inv = own.matrixU().solve(Matrix::Identity(d, d));
  return g * lt_inv * k.transpose();
}

Vector default_beta(Index d) {
  Vector b(d);
  for (Index j = 0; j < d; ++j) b(j) = static_cast<double>(d - j);
  return b;
}

ResponseDraw gen_response(const Matrix& x, const Vector& beta, const Matrix& sigma_x, double R2,
                          std::uint64_t seed) {
  if (!(R2 > 0.0 && R2 < 1.0)) throw Error("gen_response: R2 must lie in (0, 1)");
  ResponseDraw out;
  out.sigma2 = beta.dot(sigma_x * beta) / (1.0 / R2 - 1.0);
  Rng rng = make_rng(seed, {0xe77ULL});
  std::normal_distribution<double> nd(0.0, std::sqrt(out.sigma2));
  out.y = x * beta;
  for (Index i = 0; i < out.y.size(); ++i) out.y(i) += nd(rng);
  return out;
}

Contamination contaminate(const Matrix& m, double eps, double gamma, const Vector& centers,
                          const Vector& scales, std::uint64_t seed) {
  if (!(eps >= 0.0 && eps < 0.5)) throw Error("contaminate: eps must lie in [0, 0.5)");
  const Index n = m.rows(), d = m.cols();
  if (centers.size() != d || scales.size() != d) throw Error("contaminate: shape mismatch");
  Contamination out{m, BinaryMatrix::Zero(n, d)};
  const auto count = static_cast<Index>(std::floor(eps * static_cast<double>(n) + 1e-9));
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index j = 0; j < d; ++j) {
    Rng rng = make_rng(seed, {0xc0ULL, static_cast<std::uint64_t>(j)});
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index t = 0; t < count; ++t) {
      std::uniform_int_distribution<Index> pick(t, n - 1);
      std::swap(idx[static_cast<std::size_t>(t)], idx[static_cast<std::size_t>(pick(rng))]);
      const Index i = idx[static_cast<std::size_t>(t)];
      out.data(i, j) = centers(j) + gamma * scales(j);
      out.mask(i, j) = 1;
    }
  }
  return out;
}

double metric_md(const Vector& beta_hat, const Vector& beta, const Matrix& sigma_x, double sigma2) {
  if (!(sigma2 > 0.0)) throw Error("metric_md: sigma2 must be positive");
  const Vector diff = beta_hat - beta;
  return std::sqrt(std::max(0.0, diff.dot(sigma_x * diff)) / sigma2);
}

double metric_mse(const Vector& yhat, const Vector& ystar) {
  if (yhat.size() != ystar.size()) throw Error("metric_mse: length mismatch");
  if (yhat.size() == 0) return 0.0;
  return (yhat - ystar).squaredNorm() / static_cast<double>(yhat.size());
}

OlsFit fit_ols(const MaskedMatrix& x, const Vector& y) {
  const Index n = x.rows(), d = x.cols();
  OlsFit f;
  f.column_means.resize(d);
  for (Index j = 0; j < d; ++j) {
    double s = 0.0;
    Index c = 0;
    for (Index i = 0; i < n; ++i)
      if (x.is_observed(i, j)) {
        s += x.values(i, j);
        ++c;
      }
    f.column_means(j) = c > 0 ? s / static_cast<double>(c) : 0.0;
  }
  std::vector<Index> rows;
  for (Index i = 0; i < n; ++i)
    if (!is_missing(y(i))) rows.push_back(i);
  Matrix a(static_cast<Index>(rows.size()), d + 1);
  Vector b(a.rows());
  for (Index r = 0; r < a.rows(); ++r) {
    const Index i = rows[static_cast<std::size_t>(r)];
    a(r, 0) = 1.0;
    for (Index j = 0; j < d; ++j) a(r, j + 1) = x.is_observed(i, j) ? x.values(i, j) : f.column_means(j);
    b(r) = y(i);
  }
  const Vector coef = a.colPivHouseholderQr().solve(b);
  f.alpha = coef(0);
  f.beta = coef.tail(d);
  return f;
}

double predict_ols(const OlsFit& fit, const Vector& x_new) {
  double s = fit.alpha;
  for (Index j = 0; j < x_new.size(); ++j)
    s += fit.beta(j) * (is_missing(x_new(j)) ? fit.column_means(j) : x_new(j));
  return s;
}

int workers_from_env() {
  const char* v = std::getenv("CELLLTS_WORKERS");
  if (!v) return 1;
  const int w = std::atoi(v);
  return w > 0 ? w : 1;
}

namespace {

struct RepData {
  Matrix sigma_x;
  Vector beta;
  double sigma2 = 0.0;
  Matrix x_train;
  Vector y_train;
  Matrix x_test;
  Vector y_test;
};

RepData make_rep(const ExperimentConfig& cfg, int rep) {
  const auto r = static_cast<std::uint64_t>(rep);
  RepData rd;
  rd.sigma_x = cfg.sigma_kind == SigmaKind::A09 ? gen_sigma_a09(cfg.d)
                                                : gen_sigma_alyz(cfg.d, derive_seed(cfg.seed, {r, 1}));
  rd.beta = default_beta(cfg.d);
  const Index n_test = cfg.n_test > 0 ? cfg.n_test : cfg.n;
  rd.x_train = gen_predictors(cfg.n, cfg.d, cfg.predictor_dist, rd.sigma_x, derive_seed(cfg.seed, {r, 2}));
  rd.x_test = gen_predictors(n_test, cfg.d, cfg.predictor_dist, rd.sigma_x, derive_seed(cfg.seed, {r, 3}));
  ResponseDraw tr = gen_response(rd.x_train, rd.beta, rd.sigma_x, cfg.R2, derive_seed(cfg.seed, {r, 4}));
  ResponseDraw te = gen_response(rd.x_test, rd.beta, rd.sigma_x, cfg.R2, derive_seed(cfg.seed, {r, 5}));
  rd.sigma2 = tr.sigma2;
  rd.y_train = std::move(tr.y);
  rd.y_test = std::move(te.y);
  return rd;
}

std::vector<ResultRow> run_task(const ExperimentConfig& cfg, std::size_t gi, int rep) {
  const double gamma = cfg.gamma_grid[gi];
  const auto r = static_cast<std::uint64_t>(rep);
  const RepData rd = make_rep(cfg, rep);
  const Index d = cfg.d;

  Matrix train(cfg.n, d + 1);
  train << rd.x_train, rd.y_train;
  Vector centers = Vector::Zero(d + 1), scales(d + 1);
  scales.head(d) = rd.sigma_x.diagonal().cwiseSqrt();
  scales(d) = std::sqrt(rd.sigma2);
  const Contamination ct = contaminate(train, cfg.eps, gamma, centers, scales, derive_seed(cfg.seed, {r, 6}));
  const Contamination cx = contaminate(rd.x_test, cfg.eps, gamma, centers.head(d), scales.head(d),
                                       derive_seed(cfg.seed, {r, 7}));
  const MaskedMatrix xtr = MaskedMatrix::from_dense(ct.data.leftCols(d));
  const Vector ytr = ct.data.col(d);

  std::vector<ResultRow> rows;
  for (Estimator e : cfg.estimators) {
    ResultRow row;
    row.estimator = to_string(e);
    row.gamma = gamma;
    row.rep = rep;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      Vector yhat(cx.data.rows());
      Vector beta_hat;
      if (e == Estimator::CellLTS) {
        CellLtsOptions fo = cfg.fit;
        fo.seed = derive_seed(cfg.seed, {r, 8});
        const CellLtsModel m = fit_celllts(xtr, ytr, fo);
        const GaussianConditioner g(m.cov_model.mu, m.cov_model.sigma);
        for (Index i = 0; i < yhat.size(); ++i) yhat(i) = predict(m, g, cx.data.row(i).transpose()).yhat;
        beta_hat = m.beta;
      } else {
        const OlsFit f = fit_ols(xtr, ytr);
        for (Index i = 0; i < yhat.size(); ++i) yhat(i) = predict_ols(f, cx.data.row(i).transpose());
        beta_hat = f.beta;
      }
      row.md = metric_md(beta_hat, rd.beta, rd.sigma_x, rd.sigma2);
      row.mse = metric_mse(yhat, rd.y_test);
    } catch (const Error&) {
      row.md = kMissing;
      row.mse = kMissing;
    }
    if (cfg.record_runtime) {
      row.runtime_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, int workers) {
  cfg.validate();
  if (workers <= 0) workers = workers_from_env();
  const std::size_t n_gamma = cfg.gamma_grid.size();
  const std::size_t n_tasks = n_gamma * static_cast<std::size_t>(cfg.n_reps);
  std::vector<std::vector<ResultRow>> slots(n_tasks);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < n_tasks; t = next++) {
      slots[t] = run_task(cfg, t / static_cast<std::size_t>(cfg.n_reps),
                          static_cast<int>(t % static_cast<std::size_t>(cfg.n_reps)));
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(workers), n_tasks));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<ResultRow> out;
  for (auto& s : slots)
    for (auto& r : s) out.push_back(std::move(r));
  return out;
}

namespace {

std::string fmt_double(double v) {
  if (is_missing(v)) return "NaN";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "NaN" || s == "nan" || s == "NA" || s.empty()) return kMissing;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error("not a number: '" + s + "'");
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("config: not a boolean: '" + v + "'");
}

}  // namespace

std::string results_to_csv(const std::vector<ResultRow>& rows) {
  std::string out = "estimator,gamma,rep,md,mse,runtime_seconds\n";
  for (const auto& r : rows) {
    out += r.estimator + "," + fmt_double(r.gamma) + "," + std::to_string(r.rep) + "," +
           fmt_double(r.md) + "," + fmt_double(r.mse) + "," + fmt_double(r.runtime_seconds) + "\n";
  }
  return out;
}

std::vector<ResultRow> results_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "estimator,gamma,rep,md,mse,runtime_seconds") {
    throw Error("results csv: missing or unexpected header");
  }
  std::vector<ResultRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw Error("results csv: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
    try {
      ResultRow r;
      r.estimator = f[0];
      r.gamma = parse_double(f[1]);
      r.rep = std::stoi(f[2]);
      r.md = parse_double(f[3]);
      r.mse = parse_double(f[4]);
      r.runtime_seconds = parse_double(f[5]);
      rows.push_back(r);
    } catch (const std::exception& e) {
      throw Error("results csv: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "n") cfg.n = std::stol(val);
      else if (key == "d") cfg.d = std::stol(val);
      else if (key == "n_test") cfg.n_test = std::stol(val);
      else if (key == "eps") cfg.eps = std::stod(val);
      else if (key == "gamma") {
        cfg.gamma_grid.clear();
        for (const auto& g : split(val, ',')) cfg.gamma_grid.push_back(std::stod(g));
      } else if (key == "sigma") {
        if (val == "A09") cfg.sigma_kind = SigmaKind::A09;
        else if (val == "ALYZ") cfg.sigma_kind = SigmaKind::ALYZ;
        else throw Error("unknown sigma '" + val + "'");
      } else if (key == "dist") {
        if (val == "normal") cfg.predictor_dist = PredictorDist::Normal;
        else if (val == "exponential") cfg.predictor_dist = PredictorDist::Exponential;
        else if (val == "lognormal") cfg.predictor_dist = PredictorDist::Lognormal;
        else throw Error("unknown dist '" + val + "'");
      } else if (key == "R2") cfg.R2 = std::stod(val);
      else if (key == "reps") cfg.n_reps = std::stoi(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "estimators") {
        cfg.estimators.clear();
        for (const auto& e : split(val, ',')) {
          if (e == "celllts" || e == "cellLTS") cfg.estimators.push_back(Estimator::CellLTS);
          else if (e == "ols" || e == "OLS") cfg.estimators.push_back(Estimator::OLS);
          else throw Error("unknown estimator '" + e + "'");
        }
      } else if (key == "h_fraction") cfg.fit.h_fraction = std::stod(val);
      else if (key == "lambda") cfg.fit.lambda = std::stod(val);
      else if (key == "k") cfg.fit.k = std::stoi(val);
      else if (key == "full_pairs") cfg.fit.full_pairs = parse_bool(val);
      else if (key == "lts_starts") cfg.fit.lts_starts = std::stoi(val);
      else if (key == "flag_quantile") cfg.fit.flag_quantile = std::stod(val);
      else if (key == "record_runtime") cfg.record_runtime = parse_bool(val);
      else throw Error("unknown key '" + key + "'");
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception&) {
      throw Error("config line " + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace celllts
