#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fstore/types.hpp"

namespace fstore {

struct Column {
  std::string name;
  ScalarType type = ScalarType::String;

  friend bool operator==(const Column&, const Column&) = default;
};

using Schema = std::vector<Column>;
using Row = std::vector<Scalar>;

/// A small row-major table. Every row has schema.size() cells, each null or of the column's type.
struct Frame {
  Schema schema;
  std::vector<Row> rows;

  std::optional<size_t> column_index(const std::string& name) const;
  /// Throws TypeMismatch on arity or cell type violations.
  void check_well_formed() const;

  friend bool operator==(const Frame&, const Frame&) = default;
};

}  // namespace fstore
