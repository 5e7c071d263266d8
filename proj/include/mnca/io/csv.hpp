#pragma once

#include <fstream>
#include <string>
#include <variant>
#include <vector>

namespace mnca {

/// Minimal CSV writer. Reals are printed with %.17g so values round-trip.
class CsvWriter {
 public:
  using Cell = std::variant<std::string, long long, double>;

  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void row(const std::vector<Cell>& cells);
  void close();

  static std::string format(double v);

 private:
  void write(const std::vector<Cell>& cells);

  std::string path_;
  std::size_t columns_;
  std::ofstream out_;
};

/// Reads a CSV written by CsvWriter (no quoting support). Returns rows
/// including the header.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace mnca
