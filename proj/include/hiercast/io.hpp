#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace hiercast {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Round-trip-exact decimal representation; every writer in the library goes
// through this so repeated runs emit byte-identical files.
std::string format_double(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Reads a comma-separated table with a header row. Paths ending in .gz are
// decompressed transparently.
CsvTable read_csv_table(const std::string& path);

// Writes text to a file; paths ending in .gz are gzip-compressed.
void write_text_file(const std::string& path, const std::string& content);

std::string read_text_file(const std::string& path);

// Numeric matrix as bare CSV rows (no header).
void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

}  // namespace hiercast
