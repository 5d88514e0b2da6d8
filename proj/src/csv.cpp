#include "teamlab/csv.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace teamlab::csv {

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string format_double_exact(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void write_line(std::ofstream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].find_first_of(",\"\n") != std::string::npos) {
      throw std::invalid_argument("csv cell needs quoting, which this writer does not do: " +
                                  cells[i]);
    }
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

}  // namespace

Writer::Writer(const std::string& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary), columns_(header.size()) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  if (header.empty()) throw std::invalid_argument("csv header must not be empty");
  write_line(out_, header);
}

void Writer::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw std::invalid_argument("csv row has " + std::to_string(cells.size()) +
                                " cells, header has " + std::to_string(columns_));
  }
  write_line(out_, cells);
}

void Writer::close() {
  out_.close();
  if (out_.fail()) throw std::runtime_error("failed writing " + path_);
}

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int Table::require_column(const std::string& name) const {
  const int i = column(name);
  if (i < 0) throw std::runtime_error("missing required column: " + name);
  return i;
}

Table read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == EOF) break;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw std::runtime_error("csv file has no header row: " + path);
  return t;
}

}  // namespace teamlab::csv
