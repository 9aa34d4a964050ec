#pragma once

#include <json.hpp>
#include <string>

#include "phl/error.hpp"
#include "phl/matrix.hpp"
#include "phl/system.hpp"

namespace phl::detail {

using nlohmann::json;

// Nested row-major arrays. A bare number is accepted as a 1x1 matrix.
inline Matrix matrix_from_json(const json& j, const std::string& name) {
  if (j.is_number()) return Matrix::from_rows({{j.get<double>()}});
  if (!j.is_array()) throw Error(ErrorKind::InvalidModel, name + " must be a nested array");
  std::vector<std::vector<double>> rows;
  for (const auto& row : j) {
    if (!row.is_array()) throw Error(ErrorKind::InvalidModel, name + " rows must be arrays");
    std::vector<double> r;
    for (const auto& v : row) {
      if (!v.is_number()) throw Error(ErrorKind::InvalidModel, name + " entries must be numbers");
      r.push_back(v.get<double>());
    }
    rows.push_back(std::move(r));
  }
  return Matrix::from_rows(rows);
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline LtiModel model_from_json_object(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidModel, "model must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "A" && key != "B" && key != "B_w" && key != "C" && key != "D_v") {
      throw Error(ErrorKind::InvalidModel, "unknown model key '" + key + "'");
    }
  }
  for (const char* key : {"A", "B_w", "C", "D_v"}) {
    if (!j.contains(key)) throw Error(ErrorKind::InvalidModel, std::string("missing ") + key);
  }
  Matrix a = matrix_from_json(j.at("A"), "A");
  Matrix b = j.contains("B") ? matrix_from_json(j.at("B"), "B") : Matrix(a.rows(), 0);
  if (b.rows() == 0 && b.cols() == 0) b = Matrix(a.rows(), 0);
  return LtiModel(std::move(a), std::move(b), matrix_from_json(j.at("B_w"), "B_w"),
                  matrix_from_json(j.at("C"), "C"), matrix_from_json(j.at("D_v"), "D_v"));
}

inline json model_to_json_object(const LtiModel& m) {
  json j;
  j["A"] = matrix_to_json(m.a());
  if (m.du() > 0) j["B"] = matrix_to_json(m.b());
  j["B_w"] = matrix_to_json(m.b_w());
  j["C"] = matrix_to_json(m.c());
  j["D_v"] = matrix_to_json(m.d_v());
  return j;
}

}  // namespace phl::detail
