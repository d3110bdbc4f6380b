#pragma once

// CSV emission helpers. Values are printed with 17 significant digits so
// runs can be reproduced bit-faithfully from the archived artifacts.

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fphs {

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
        cols_ = header.size();
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != cols_) throw std::logic_error("CsvWriter: column count mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

  private:
    std::ofstream out_;
    std::size_t cols_ = 0;
};

}  // namespace fphs
