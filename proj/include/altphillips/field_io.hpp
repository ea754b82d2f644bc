#pragma once

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "altphillips/fields.hpp"

namespace altphillips {

// Shortest round-trip decimal form of a double.
inline std::string format_real(double x) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

// One JSON header line, then one CSV line per node: coordinates and value.
inline void write_field(std::ostream& os, const ScalarField& f, const nlohmann::json& extra = {}) {
  const Grid& g = f.grid();
  nlohmann::json h;
  h["format"] = "altphillips-field";
  h["dim"] = g.dim;
  h["origin"] = std::vector<double>(g.origin.begin(), g.origin.begin() + g.dim);
  h["spacing"] = std::vector<double>(g.spacing.begin(), g.spacing.begin() + g.dim);
  h["nodes"] = std::vector<std::size_t>(g.nodes.begin(), g.nodes.begin() + g.dim);
  if (!extra.is_null())
    for (auto it = extra.begin(); it != extra.end(); ++it) h[it.key()] = it.value();
  os << h.dump() << '\n';
  const char* names[3] = {"x1", "x2", "x3"};
  for (int k = 0; k < g.dim; ++k) os << names[k] << ',';
  os << "value\n";
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Vec3 x = g.point(i);
    for (int k = 0; k < g.dim; ++k) os << format_real(x[k]) << ',';
    os << format_real(f[i]) << '\n';
  }
}

struct FieldFile {
  ScalarField field;
  nlohmann::json header;
};

inline FieldFile read_field(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ShapeError("read_field: missing header");
  nlohmann::json h = nlohmann::json::parse(line);
  Grid g;
  g.dim = h.at("dim").get<int>();
  const auto o = h.at("origin").get<std::vector<double>>();
  const auto sp = h.at("spacing").get<std::vector<double>>();
  const auto n = h.at("nodes").get<std::vector<std::size_t>>();
  if (static_cast<int>(o.size()) != g.dim || static_cast<int>(sp.size()) != g.dim ||
      static_cast<int>(n.size()) != g.dim)
    throw ShapeError("read_field: header arrays disagree with dim");
  for (int k = 0; k < g.dim; ++k) {
    g.origin[k] = o[k];
    g.spacing[k] = sp[k];
    g.nodes[k] = n[k];
  }
  g.validate();
  std::getline(is, line);  // column names
  std::vector<double> v;
  v.reserve(g.size());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find_last_of(',');
    v.push_back(std::stod(line.substr(comma + 1)));
  }
  return {ScalarField(g, std::move(v)), h};
}

}  // namespace altphillips
