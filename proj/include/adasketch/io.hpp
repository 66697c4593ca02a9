#pragma once

#include <filesystem>
#include <vector>

#include "adasketch/linalg.hpp"

namespace adasketch {

enum class LabelMode { Class, Real, None };

struct Dataset {
  Matrix features;
  Matrix targets;               // one-hot for Class, single column for Real, empty for None
  std::vector<double> classes;  // ascending label values, Class mode only
};

/// Comma-separated numeric table; a first row with any non-numeric field is
/// taken as a header. The label, if any, is the last column.
Dataset load_csv(const std::filesystem::path& path, LabelMode mode);

/// Writes rows of M with round-trip precision and no header.
void write_csv(const std::filesystem::path& path, const Matrix& M);

/// Binary cache: "ADSK1", u64 rows, u64 cols, little-endian f64 in row-major order.
void write_adsk(const std::filesystem::path& path, const Matrix& M);
Matrix read_adsk(const std::filesystem::path& path);

}  // namespace adasketch
