#pragma once

// CSV and legacy ASCII VTK output.

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "mhmm/mesh.hpp"
#include "mhmm/types.hpp"

namespace mhmm {

/// Shortest round-trip-safe form with 17 significant digits.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out), columns_(header.size()) {
    row_.reserve(columns_);
    for (const auto& h : header) row_.push_back(h);
    flush_row();
  }

  CsvWriter& operator<<(double v) { return push(format_double(v)); }
  CsvWriter& operator<<(int v) { return push(std::to_string(v)); }
  CsvWriter& operator<<(long v) { return push(std::to_string(v)); }
  CsvWriter& operator<<(std::size_t v) { return push(std::to_string(v)); }
  CsvWriter& operator<<(const std::string& v) { return push(v); }
  CsvWriter& operator<<(const char* v) { return push(v); }

 private:
  CsvWriter& push(std::string cell) {
    row_.push_back(std::move(cell));
    if (row_.size() == columns_) flush_row();
    return *this;
  }

  void flush_row() {
    for (std::size_t c = 0; c < row_.size(); ++c) out_ << (c ? "," : "") << row_[c];
    out_ << '\n';
    row_.clear();
  }

  std::ostream& out_;
  std::size_t columns_;
  std::vector<std::string> row_;
};

/// Cell data: real and imaginary parts of one complex vector per tet.
struct VtkCellVector {
  std::string name;
  std::vector<CVec3> values;
};

inline void write_vtk(std::ostream& out, const TetMesh& mesh, const std::string& title,
                      const std::vector<VtkCellVector>& fields) {
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.vertices.size() << " double\n";
  for (const auto& v : mesh.vertices) out << format_double(v[0]) << ' ' << format_double(v[1]) << ' ' << format_double(v[2]) << '\n';
  const std::size_t nt = mesh.num_tets();
  out << "CELLS " << nt << ' ' << 5 * nt << '\n';
  for (const auto& t : mesh.tets) out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  out << "CELL_TYPES " << nt << '\n';
  for (std::size_t t = 0; t < nt; ++t) out << "10\n";
  if (fields.empty()) return;
  out << "CELL_DATA " << nt << '\n';
  for (const auto& f : fields) {
    for (int part = 0; part < 2; ++part) {
      out << "VECTORS " << f.name << (part ? "_im" : "_re") << " double\n";
      for (const auto& v : f.values) {
        for (int c = 0; c < 3; ++c) out << (c ? " " : "") << format_double(part ? v[c].imag() : v[c].real());
        out << '\n';
      }
    }
  }
}

}  // namespace mhmm
