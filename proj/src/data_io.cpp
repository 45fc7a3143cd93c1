#include "sievei/data_io.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sievei {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& s, long row, const std::string& col) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (s.empty() || end == begin || (end && *end != '\0'))
    throw ParseError("non-numeric cell in column '" + col + "'", row);
  if (!std::isfinite(v))
    throw ParseError("non-finite value in column '" + col + "'", row);
  return v;
}

std::string format_cell(const Cell& cell) {
  if (std::holds_alternative<double>(cell)) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", std::get<double>(cell));
    return buf;
  }
  const std::string& s = std::get<std::string>(cell);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += "\"\"";
    else quoted.push_back(c);
  }
  quoted.push_back('"');
  return quoted;
}

}  // namespace

void Dataset::validate() const {
  if (n < 1) throw ConfigError("Dataset: empty sample");
  if (y1.size() != n || y2.size() != n || x.rows() != n)
    throw ConfigError("Dataset: column lengths differ");
  if (!y1.allFinite() || !y2.allFinite() || !x.allFinite())
    throw ConfigError("Dataset: non-finite values");
}

Dataset load_dataset(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open data file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty data file: " + path);
  const auto header = split_csv_line(line);

  auto find_col = [&](const std::string& name) -> size_t {
    for (size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw ConfigError("missing column '" + name + "' in " + path);
  };
  const size_t jy1 = find_col(schema.y1);
  const size_t jy2 = find_col(schema.y2);
  std::vector<size_t> jx;
  jx.reserve(schema.x.size());
  for (const auto& name : schema.x) jx.push_back(find_col(name));

  std::vector<double> y1, y2;
  std::vector<std::vector<double>> x(jx.size());
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("wrong number of cells", row);
    y1.push_back(parse_cell(cells[jy1], row, schema.y1));
    y2.push_back(parse_cell(cells[jy2], row, schema.y2));
    for (size_t k = 0; k < jx.size(); ++k)
      x[k].push_back(parse_cell(cells[jx[k]], row, schema.x[k]));
  }
  Dataset d;
  d.n = static_cast<Eigen::Index>(y1.size());
  d.y1 = Eigen::Map<Vec>(y1.data(), d.n);
  d.y2 = Eigen::Map<Vec>(y2.data(), d.n);
  d.x.resize(d.n, static_cast<Eigen::Index>(jx.size()));
  for (size_t k = 0; k < jx.size(); ++k)
    d.x.col(static_cast<Eigen::Index>(k)) = Eigen::Map<Vec>(x[k].data(), d.n);
  d.validate();
  return d;
}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size())
    throw ConfigError("Table: row width does not match header");
  rows.push_back(std::move(row));
}

void write_table(const Table& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (size_t j = 0; j < table.columns.size(); ++j) {
    if (j) out << ',';
    out << format_cell(Cell{table.columns[j]});
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << format_cell(row[j]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Table load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file: " + path);
  Table t;
  for (auto& name : split_csv_line(line)) t.columns.push_back(name);
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.columns.size())
      throw ParseError("wrong number of cells", row);
    std::vector<Cell> r;
    r.reserve(cells.size());
    for (const auto& s : cells) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (!s.empty() && end && *end == '\0' && std::isfinite(v))
        r.emplace_back(v);
      else
        r.emplace_back(s);
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

void write_kv(const std::vector<std::pair<std::string, Cell>>& kv,
              const std::string& path) {
  Table t;
  t.columns = {"key", "value"};
  for (const auto& [k, v] : kv) t.add_row({Cell{k}, v});
  write_table(t, path);
}

}  // namespace sievei
