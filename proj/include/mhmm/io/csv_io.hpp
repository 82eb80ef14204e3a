#pragma once

// Observation CSV. Chain files have a header
//   t[,state],<coords>
// and field files
//   x,y[,state],<coords>
// where <coords> depends on the manifold: "re,im" for the disk, "y0..y{d-1}"
// for the sphere, row-major "m00,m01,..." for SPD matrices. Reals are
// written in shortest round-trip form.

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mhmm/errors.hpp"
#include "mhmm/geometry/point.hpp"

namespace mhmm::io {

inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

inline double parse_double(const std::string& s, long line_no) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && *begin == ' ') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw IoError("bad number '" + s + "'", line_no);
  return v;
}

inline std::vector<std::string> coordinate_names(geometry::Manifold m,
                                                 int dim) {
  std::vector<std::string> names;
  switch (m) {
    case geometry::Manifold::Disk:
      names = {"re", "im"};
      break;
    case geometry::Manifold::Sphere:
      for (int i = 0; i < dim; ++i) names.push_back("y" + std::to_string(i));
      break;
    case geometry::Manifold::Spd:
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
          names.push_back("m" + std::to_string(r) + std::to_string(c));
      break;
  }
  return names;
}

inline void append_coords(const geometry::ManifoldPoint& p,
                          std::vector<double>& out) {
  switch (p.manifold()) {
    case geometry::Manifold::Disk:
      out.push_back(p.disk_coord().real());
      out.push_back(p.disk_coord().imag());
      break;
    case geometry::Manifold::Sphere:
      for (Eigen::Index i = 0; i < p.sphere_coords().size(); ++i)
        out.push_back(p.sphere_coords()[i]);
      break;
    case geometry::Manifold::Spd:
      for (Eigen::Index r = 0; r < p.spd_matrix().rows(); ++r)
        for (Eigen::Index c = 0; c < p.spd_matrix().cols(); ++c)
          out.push_back(p.spd_matrix()(r, c));
      break;
  }
}

inline geometry::ManifoldPoint point_from_coords(
    geometry::Manifold m, const std::vector<double>& coords, long line_no) {
  switch (m) {
    case geometry::Manifold::Disk:
      if (coords.size() != 2) throw IoError("expected 2 coordinates", line_no);
      return geometry::ManifoldPoint::disk({coords[0], coords[1]});
    case geometry::Manifold::Sphere: {
      Eigen::VectorXd y(coords.size());
      for (std::size_t i = 0; i < coords.size(); ++i) y[i] = coords[i];
      return geometry::ManifoldPoint::sphere(std::move(y));
    }
    case geometry::Manifold::Spd: {
      const int d = static_cast<int>(std::lround(std::sqrt(
          static_cast<double>(coords.size()))));
      if (d * d != static_cast<int>(coords.size()))
        throw IoError("spd coordinates are not a square matrix", line_no);
      Eigen::MatrixXd y(d, d);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) y(r, c) = coords[r * d + c];
      y = 0.5 * (y + y.transpose().eval());
      return geometry::ManifoldPoint::spd(std::move(y));
    }
  }
  throw Error("unreachable");
}

}  // namespace detail

struct ObservationFile {
  std::vector<geometry::ManifoldPoint> obs;
  std::vector<int> states;               // empty if the file has no state column
  std::vector<std::pair<int, int>> xy;   // field files only
  bool is_field = false;
};

/// Chain observations: t[,state],<coords>. States are written 1-based.
inline void write_observations(const std::string& path,
                               const std::vector<geometry::ManifoldPoint>& obs,
                               const std::vector<int>* states = nullptr) {
  if (obs.empty()) throw DomainError("write_observations: no observations");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  const geometry::Manifold m = obs[0].manifold();
  std::vector<double> coords;
  detail::append_coords(obs[0], coords);
  const auto names =
      detail::coordinate_names(m, m == geometry::Manifold::Spd
                                      ? static_cast<int>(std::lround(std::sqrt(
                                            (double)coords.size())))
                                      : static_cast<int>(coords.size()));
  out << "t";
  if (states) out << ",state";
  for (const auto& n : names) out << "," << n;
  out << "\n";
  for (std::size_t t = 0; t < obs.size(); ++t) {
    coords.clear();
    detail::append_coords(obs[t], coords);
    out << (t + 1);
    if (states) out << "," << ((*states)[t] + 1);
    for (double c : coords) out << "," << format_double(c);
    out << "\n";
  }
}

/// Field observations: x,y[,state],<coords>, row-major site order.
inline void write_field_observations(
    const std::string& path, int width,
    const std::vector<geometry::ManifoldPoint>& obs,
    const std::vector<int>* states = nullptr) {
  if (obs.empty()) throw DomainError("write_field_observations: empty");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  std::vector<double> coords;
  detail::append_coords(obs[0], coords);
  const geometry::Manifold m = obs[0].manifold();
  const auto names =
      detail::coordinate_names(m, m == geometry::Manifold::Spd
                                      ? static_cast<int>(std::lround(std::sqrt(
                                            (double)coords.size())))
                                      : static_cast<int>(coords.size()));
  out << "x,y";
  if (states) out << ",state";
  for (const auto& n : names) out << "," << n;
  out << "\n";
  for (std::size_t z = 0; z < obs.size(); ++z) {
    coords.clear();
    detail::append_coords(obs[z], coords);
    out << (z % width) << "," << (z / width);
    if (states) out << "," << ((*states)[z] + 1);
    for (double c : coords) out << "," << format_double(c);
    out << "\n";
  }
}

/// Reads either layout; the manifold is inferred from the header names.
inline ObservationFile read_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file: " + path, 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);

  ObservationFile file;
  std::size_t at = 0;
  if (header.size() >= 2 && header[0] == "x" && header[1] == "y") {
    file.is_field = true;
    at = 2;
  } else if (!header.empty() && header[0] == "t") {
    at = 1;
  } else {
    throw IoError("unrecognized header in " + path, 1);
  }
  bool has_state = at < header.size() && header[at] == "state";
  if (has_state) ++at;

  geometry::Manifold manifold;
  const std::size_t n_coords = header.size() - at;
  if (n_coords == 2 && header[at] == "re") {
    manifold = geometry::Manifold::Disk;
  } else if (!header[at].empty() && header[at][0] == 'y') {
    manifold = geometry::Manifold::Sphere;
  } else if (!header[at].empty() && header[at][0] == 'm') {
    manifold = geometry::Manifold::Spd;
  } else {
    throw IoError("unrecognized coordinate columns in " + path, 1);
  }

  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw IoError("wrong number of fields", line_no);
    std::size_t i = 0;
    if (file.is_field) {
      const int x = static_cast<int>(detail::parse_double(fields[0], line_no));
      const int y = static_cast<int>(detail::parse_double(fields[1], line_no));
      file.xy.emplace_back(x, y);
      i = 2;
    } else {
      i = 1;
    }
    if (has_state) {
      file.states.push_back(
          static_cast<int>(detail::parse_double(fields[i], line_no)) - 1);
      ++i;
    }
    std::vector<double> coords;
    for (; i < fields.size(); ++i)
      coords.push_back(detail::parse_double(fields[i], line_no));
    try {
      file.obs.push_back(detail::point_from_coords(manifold, coords, line_no));
    } catch (const DomainError& e) {
      throw IoError(std::string("invalid point: ") + e.what(), line_no);
    }
  }
  if (file.obs.empty()) throw IoError("no observations in " + path, line_no);
  return file;
}

}  // namespace mhmm::io
