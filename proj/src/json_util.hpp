#pragma once

// Internal helpers shared by the serializers; not part of the public interface.

#include <json.hpp>

#include <string>
#include <vector>

#include "mmfusion/error.hpp"
#include "mmfusion/matrix.hpp"

namespace mmf::detail {

using nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + ": expected array of rows");
  std::vector<std::vector<double>> rows;
  rows.reserve(j.size());
  for (const auto& r : j) {
    if (!r.is_array()) throw ValidationError(std::string(what) + ": expected array of rows");
    rows.push_back(r.get<std::vector<double>>());
  }
  try {
    return Matrix::from_rows(rows);
  } catch (const ShapeError&) {
    throw ValidationError(std::string(what) + ": rows have different widths");
  }
}

template <class T>
T require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace mmf::detail
