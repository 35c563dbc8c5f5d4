#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

#include "pcnn/errors.hpp"

namespace pcnn {

/// Shortest decimal string that round-trips a double (17 significant digits).
inline std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw DataError("cannot open " + path.string() + " for writing");
  }

  void row(std::initializer_list<std::string> cells) {
    bool first = true;
    for (const auto& c : cells) {
      if (!first) out_ << ',';
      out_ << c;
      first = false;
    }
    out_ << '\n';
  }

  void line(const std::string& text) { out_ << text << '\n'; }

 private:
  std::ofstream out_;
};

}  // namespace pcnn
