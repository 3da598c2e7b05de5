#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace emc::io {

/** Shortest decimal string that round-trips the double (stable across runs). */
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // prefer the shortest representation that still parses back exactly;
  // %g can pick "1e+01" over "10", so scan every precision
  std::string best = buf;
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v && std::strlen(probe) < best.size()) best = probe;
  }
  return best;
}

/**
 * CSV writer with atomic commit: rows accumulate in a temporary file that is
 * renamed over the target on commit, so readers never observe a partial file.
 * Cells are written verbatim; use the field helpers for numbers.
 */
class CsvWriter {
 public:
  explicit CsvWriter(std::filesystem::path path) : path_(std::move(path)) {
    temp_ = path_;
    temp_ += ".tmp";
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(temp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open output file: " + temp_.string());
  }

  ~CsvWriter() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(temp_, ec);
    }
  }

  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void commit() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + temp_.string());
    out_.close();
    std::filesystem::rename(temp_, path_);
    committed_ = true;
  }

 private:
  std::filesystem::path path_;
  std::filesystem::path temp_;
  std::ofstream out_;
  bool committed_ = false;
};

}  // namespace emc::io
