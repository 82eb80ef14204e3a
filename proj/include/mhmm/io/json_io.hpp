#pragma once

// JSON schemas:
//   model:  {"family": "vmf"|"disk_gaussian"|"spd_gaussian", "states": N,
//            "P": [[...]], "pi1": [...],
//            "emissions": [{"ybar": <point>, "sigma": s}, ...]}
//   points: sphere = array of d reals, disk = {"re": x, "im": y},
//           spd = row-major nested arrays
//   fitted: model plus {"loglik_trace": [...], "final_loglik": l,
//           "iterations": k, "flags": [...]}
//   field:  model plus {"grid": [w, h], "V": [...], "J": [[...]]} (no P/pi1)

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "mhmm/errors.hpp"
#include "mhmm/hmm/em.hpp"
#include "mhmm/hmm/params.hpp"
#include "mhmm/mrf/field.hpp"

namespace mhmm::io {

using nlohmann::json;

inline json point_to_json(const geometry::ManifoldPoint& p) {
  switch (p.manifold()) {
    case geometry::Manifold::Sphere: {
      json arr = json::array();
      for (Eigen::Index i = 0; i < p.sphere_coords().size(); ++i)
        arr.push_back(p.sphere_coords()[i]);
      return arr;
    }
    case geometry::Manifold::Disk:
      return json{{"re", p.disk_coord().real()}, {"im", p.disk_coord().imag()}};
    case geometry::Manifold::Spd: {
      json rows = json::array();
      const Eigen::MatrixXd& m = p.spd_matrix();
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
      }
      return rows;
    }
  }
  throw Error("unreachable");
}

inline geometry::ManifoldPoint point_from_json(const json& j,
                                               geometry::Manifold m) {
  try {
    switch (m) {
      case geometry::Manifold::Sphere: {
        Eigen::VectorXd y(j.size());
        for (std::size_t i = 0; i < j.size(); ++i) y[i] = j[i].get<double>();
        return geometry::ManifoldPoint::sphere(std::move(y));
      }
      case geometry::Manifold::Disk:
        return geometry::ManifoldPoint::disk(
            {j.at("re").get<double>(), j.at("im").get<double>()});
      case geometry::Manifold::Spd: {
        const std::size_t d = j.size();
        Eigen::MatrixXd y(d, d);
        for (std::size_t r = 0; r < d; ++r)
          for (std::size_t c = 0; c < d; ++c)
            y(r, c) = j[r][c].get<double>();
        return geometry::ManifoldPoint::spd(std::move(y));
      }
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("bad point JSON: ") + e.what());
  }
  throw Error("unreachable");
}

inline int point_dimension(const json& ybar, const std::string& family_name) {
  if (family_name == "disk_gaussian") return 2;
  return static_cast<int>(ybar.size());
}

inline json model_to_json(const hmm::HmmParams& params) {
  const int s = params.n_states();
  json j;
  j["family"] = params.family->name();
  j["states"] = s;
  j["P"] = json::array();
  for (int a = 0; a < s; ++a) {
    json row = json::array();
    for (int b = 0; b < s; ++b) row.push_back(params.P(a, b));
    j["P"].push_back(row);
  }
  j["pi1"] = json::array();
  for (int a = 0; a < s; ++a) j["pi1"].push_back(params.pi1[a]);
  j["emissions"] = json::array();
  for (const hmm::Emission& e : params.emissions)
    j["emissions"].push_back(
        json{{"ybar", point_to_json(e.ybar)}, {"sigma", e.sigma}});
  return j;
}

inline hmm::HmmParams model_from_json(const json& j) {
  try {
    const std::string family_name = j.at("family").get<std::string>();
    const int s = j.at("states").get<int>();
    const json& emissions = j.at("emissions");
    if (static_cast<int>(emissions.size()) != s)
      throw IoError("model JSON: emissions length != states");
    hmm::HmmParams params;
    params.family = geometry::make_family(
        family_name,
        point_dimension(emissions.at(0).at("ybar"), family_name));
    params.P.resize(s, s);
    for (int a = 0; a < s; ++a)
      for (int b = 0; b < s; ++b)
        params.P(a, b) = j.at("P").at(a).at(b).get<double>();
    params.pi1.resize(s);
    for (int a = 0; a < s; ++a) params.pi1[a] = j.at("pi1").at(a).get<double>();
    for (const json& e : emissions)
      params.emissions.push_back(hmm::Emission{
          point_from_json(e.at("ybar"), params.family->manifold()),
          e.at("sigma").get<double>()});
    params.validate();
    return params;
  } catch (const json::exception& e) {
    throw IoError(std::string("bad model JSON: ") + e.what());
  }
}

inline json fit_result_to_json(const hmm::EmResult& result) {
  json j = model_to_json(result.params);
  j["loglik_trace"] = result.loglik_trace;
  j["final_loglik"] = result.final_loglik;
  j["iterations"] = result.iterations;
  j["flags"] = result.flags;
  return j;
}

inline json field_to_json(const mrf::FieldParams& field,
                          const mrf::GridGraph& grid) {
  const int s = field.n_states();
  json j;
  j["family"] = field.family->name();
  j["states"] = s;
  j["grid"] = {grid.width(), grid.height()};
  j["V"] = json::array();
  for (int a = 0; a < s; ++a) j["V"].push_back(field.V[a]);
  j["J"] = json::array();
  for (int a = 0; a < s; ++a) {
    json row = json::array();
    for (int b = 0; b < s; ++b) row.push_back(field.J(a, b));
    j["J"].push_back(row);
  }
  j["emissions"] = json::array();
  for (const hmm::Emission& e : field.emissions)
    j["emissions"].push_back(
        json{{"ybar", point_to_json(e.ybar)}, {"sigma", e.sigma}});
  return j;
}

struct FieldModel {
  mrf::FieldParams params;
  mrf::GridGraph grid;
};

inline FieldModel field_from_json(const json& j) {
  try {
    const std::string family_name = j.at("family").get<std::string>();
    const int s = j.at("states").get<int>();
    const json& emissions = j.at("emissions");
    if (static_cast<int>(emissions.size()) != s)
      throw IoError("field JSON: emissions length != states");
    mrf::FieldParams field;
    field.family = geometry::make_family(
        family_name,
        point_dimension(emissions.at(0).at("ybar"), family_name));
    field.V.resize(s);
    for (int a = 0; a < s; ++a) field.V[a] = j.at("V").at(a).get<double>();
    field.J.resize(s, s);
    for (int a = 0; a < s; ++a)
      for (int b = 0; b < s; ++b)
        field.J(a, b) = j.at("J").at(a).at(b).get<double>();
    for (const json& e : emissions)
      field.emissions.push_back(hmm::Emission{
          point_from_json(e.at("ybar"), field.family->manifold()),
          e.at("sigma").get<double>()});
    field.validate();
    mrf::GridGraph grid(j.at("grid").at(0).get<int>(),
                        j.at("grid").at(1).get<int>());
    return FieldModel{std::move(field), std::move(grid)};
  } catch (const json::exception& e) {
    throw IoError(std::string("bad field JSON: ") + e.what());
  }
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("cannot parse " + path + ": " + e.what());
  }
}

inline void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace mhmm::io
