#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

namespace ionfb {

/// Shortest round-trip form is not required; 17 significant digits always are.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);

  void row(const std::vector<double>& values);
  void row(std::initializer_list<double> values) { row(std::vector<double>(values)); }

 private:
  std::ostream& out_;
  std::size_t columns_;
};

}  // namespace ionfb
