#pragma once

#include <Eigen/Core>

#include <string>
#include <variant>
#include <vector>

#include "sievei/errors.hpp"
#include "sievei/linalg.hpp"

namespace sievei {

// One i.i.d. sample: outcome y1, endogenous regressor y2, instruments x.
struct Dataset {
  Vec y1;
  Vec y2;
  Mat x;  // n x d_x
  Eigen::Index n = 0;

  void validate() const;
};

struct ColumnSchema {
  std::string y1 = "y1";
  std::string y2 = "y2";
  std::vector<std::string> x = {"x"};
};

Dataset load_dataset(const std::string& path, const ColumnSchema& schema);

// A flat table with named columns; cells are numbers or strings.
using Cell = std::variant<double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
};

// RFC-4180-style CSV with a header row; floating values are rendered with 17
// significant digits (round-trips exactly in binary64).
void write_table(const Table& table, const std::string& path);

Table load_table(const std::string& path);

// Key/value report rendered as a two-column CSV.
void write_kv(const std::vector<std::pair<std::string, Cell>>& kv,
              const std::string& path);

}  // namespace sievei
