#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace teamlab::csv {

// Shortest round-trippable-ish decimal for reporting; stable across runs.
std::string format_double(double v);
// Full-precision form used where exact reload matters.
std::string format_double_exact(double v);

class Writer {
 public:
  Writer(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  void close();
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t columns_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
  int require_column(const std::string& name) const;
};

Table read(const std::string& path);

}  // namespace teamlab::csv
