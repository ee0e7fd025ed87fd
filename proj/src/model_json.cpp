#include "celllts/cli_io.hpp"

#include <json.hpp>

namespace celllts {

using nlohmann::json;

namespace {

json vec_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json mat_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(vec_to_json(m.row(i).transpose()));
  return rows;
}

template <class B>
json binary_to_json(const B& b) {
  json rows = json::array();
  for (Index i = 0; i < b.rows(); ++i) {
    std::string s;
    for (Index j = 0; j < b.cols(); ++j) s += b(i, j) ? '1' : '0';
    rows.push_back(s);
  }
  return rows;
}

Vector json_to_vec(const json& j, Index expect, const char* what) {
  if (!j.is_array()) throw Error(std::string("model: '") + what + "' is not an array");
  if (expect >= 0 && static_cast<Index>(j.size()) != expect) {
    throw Error(std::string("model: '") + what + "' has wrong length");
  }
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

Matrix json_to_mat(const json& j, Index rows, Index cols, const char* what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
    throw Error(std::string("model: '") + what + "' has wrong number of rows");
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) m.row(i) = json_to_vec(j[static_cast<std::size_t>(i)], cols, what).transpose();
  return m;
}

BinaryMatrix json_to_binary(const json& j, Index rows, Index cols, const char* what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
    throw Error(std::string("model: '") + what + "' has wrong number of rows");
  }
  BinaryMatrix b(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto s = j[static_cast<std::size_t>(i)].get<std::string>();
    if (static_cast<Index>(s.size()) != cols) throw Error(std::string("model: '") + what + "' has wrong width");
    for (Index c = 0; c < cols; ++c) {
      if (s[static_cast<std::size_t>(c)] != '0' && s[static_cast<std::size_t>(c)] != '1') {
        throw Error(std::string("model: '") + what + "' must contain only 0 and 1");
      }
      b(i, c) = s[static_cast<std::size_t>(c)] == '1' ? 1 : 0;
    }
  }
  return b;
}

}  // namespace

std::string serialize_model(const CellLtsModel& m) {
  const CellMcdModel& c = m.cov_model;
  const CellLtsOptions& o = m.options;
  json j;
  j["schema_version"] = kModelSchemaVersion;
  j["dim"] = m.dim();
  j["n"] = m.fitted.size();
  j["column_names"] = m.column_names;
  j["response_name"] = m.response_name;
  j["alpha"] = m.alpha;
  j["beta"] = vec_to_json(m.beta);
  j["beta_std"] = vec_to_json(m.beta_std);
  j["resid_scale"] = m.resid_scale;
  j["h"] = m.h;
  j["h_pairs"] = m.h_pairs;
  j["lts_objective"] = m.lts_objective;
  j["lts_csteps"] = m.lts_csteps;
  j["case_weights"] = binary_to_json(BinaryMatrix(m.case_weights.transpose()));
  j["fitted"] = vec_to_json(m.fitted);
  j["options"] = {{"h_fraction", o.h_fraction}, {"lambda", o.lambda},
                  {"full_pairs", o.full_pairs}, {"k", o.k},
                  {"seed", o.seed},             {"flag_quantile", o.flag_quantile},
                  {"lts_starts", o.lts_starts}};
  j["standardization"] = {{"column_scales", vec_to_json(m.standardization.column_scales)},
                          {"column_centers", vec_to_json(m.standardization.column_centers)},
                          {"response_scale", m.standardization.response_scale}};
  j["cov_model"] = {{"mu", vec_to_json(c.mu)},
                    {"sigma", mat_to_json(c.sigma)},
                    {"W", binary_to_json(c.W)},
                    {"q", vec_to_json(c.q)},
                    {"h", c.h},
                    {"eig_floor", c.eig_floor},
                    {"objective_trace", c.objective_trace},
                    {"fixed_center", c.fixed_center}};
  return j.dump(2) + "\n";
}

CellLtsModel deserialize_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("model: invalid JSON: ") + e.what());
  }
  CellLtsModel m;
  try {
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != kModelSchemaVersion) {
      throw Error("model: unsupported schema version (expected " + std::to_string(kModelSchemaVersion) + ")");
    }
    const Index d = j.at("dim").get<Index>();
    const Index n = j.at("n").get<Index>();
    if (d < 1 || n < 1) throw Error("model: bad dimensions");
    m.column_names = j.at("column_names").get<std::vector<std::string>>();
    if (!m.column_names.empty() && static_cast<Index>(m.column_names.size()) != d) {
      throw Error("model: 'column_names' has wrong length");
    }
    m.response_name = j.at("response_name").get<std::string>();
    m.alpha = j.at("alpha").get<double>();
    m.beta = json_to_vec(j.at("beta"), d, "beta");
    m.beta_std = json_to_vec(j.at("beta_std"), d, "beta_std");
    m.resid_scale = j.at("resid_scale").get<double>();
    m.h = j.at("h").get<Index>();
    m.h_pairs = j.at("h_pairs").get<Index>();
    m.lts_objective = j.at("lts_objective").get<double>();
    m.lts_csteps = j.at("lts_csteps").get<int>();
    m.case_weights = json_to_binary(j.at("case_weights"), 1, n, "case_weights").transpose();
    m.fitted = json_to_vec(j.at("fitted"), n, "fitted");

    const json& o = j.at("options");
    m.options.h_fraction = o.at("h_fraction").get<double>();
    m.options.lambda = o.at("lambda").get<double>();
    m.options.full_pairs = o.at("full_pairs").get<bool>();
    m.options.k = o.at("k").get<int>();
    m.options.seed = o.at("seed").get<std::uint64_t>();
    m.options.flag_quantile = o.at("flag_quantile").get<double>();
    m.options.lts_starts = o.at("lts_starts").get<int>();

    const json& s = j.at("standardization");
    m.standardization.column_scales = json_to_vec(s.at("column_scales"), d, "column_scales");
    m.standardization.column_centers = json_to_vec(s.at("column_centers"), d, "column_centers");
    m.standardization.response_scale = s.at("response_scale").get<double>();

    const json& c = j.at("cov_model");
    CellMcdModel& cm = m.cov_model;
    cm.mu = json_to_vec(c.at("mu"), d, "mu");
    cm.sigma = json_to_mat(c.at("sigma"), d, d, "sigma");
    cm.W = json_to_binary(c.at("W"), n, d, "W");
    cm.q = json_to_vec(c.at("q"), d, "q");
    cm.h = c.at("h").get<Index>();
    cm.eig_floor = c.at("eig_floor").get<double>();
    cm.objective_trace = c.at("objective_trace").get<std::vector<double>>();
    cm.fixed_center = c.at("fixed_center").get<bool>();
  } catch (const json::exception& e) {
    throw Error(std::string("model: ") + e.what());
  }

  const Matrix& sg = m.cov_model.sigma;
  if ((sg - sg.transpose()).cwiseAbs().maxCoeff() > 1e-12 * sg.cwiseAbs().maxCoeff()) {
    throw Error("model: sigma is not symmetric");
  }
  Eigen::LLT<Matrix> llt(sg);
  if (llt.info() != Eigen::Success) throw Error("model: sigma is not positive definite");
  return m;
}

}  // namespace celllts
