#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "qnd/errors.hpp"

namespace qnd {

// Floating-point cells are emitted with 17 significant digits so that a value
// round-trips exactly and regression diffs are stable.
inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    require(out_.good(), ErrKind::io, "cannot open for writing: " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ << ',';
      out_ << header[i];
    }
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_num(values[i]);
    }
    out_ << '\n';
  }

  // Mixed rows: cells already rendered by the caller.
  void raw_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void close() {
    out_.close();
    require(out_.good(), ErrKind::io, "write failure on close");
  }

 private:
  std::ofstream out_;
};

}  // namespace qnd
