#ifndef VACSING_TOOLS_CSV_HPP
#define VACSING_TOOLS_CSV_HPP

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vacsing::tools {

// CSV writer with all floating-point values printed at 17 significant
// digits, so reruns of a scenario are byte-identical.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
    width_ = columns.size();
  }

  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw std::logic_error("csv row width mismatch");
    char buf[64];
    for (size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
      out_ << buf;
    }
    out_ << '\n';
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
  size_t width_ = 0;
};

}  // namespace vacsing::tools

#endif
