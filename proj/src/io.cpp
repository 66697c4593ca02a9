#include "adasketch/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "adasketch/errors.hpp"

namespace adasketch {

static_assert(std::endian::native == std::endian::little,
              "the ADSK1 reader and writer assume a little-endian host");

namespace {

constexpr char kMagic[5] = {'A', 'D', 'S', 'K', '1'};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::optional<double> parse_number(std::string_view field) {
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) return std::nullopt;
  return value;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, LabelMode mode) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());

  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> values;
    values.reserve(fields.size());
    std::optional<std::size_t> bad_col;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const auto v = parse_number(fields[j]);
      if (!v) {
        bad_col = j;
        break;
      }
      values.push_back(*v);
    }
    if (first) {
      first = false;
      width = fields.size();
      if (bad_col) continue;  // header row
    }
    if (fields.size() != width) {
      throw Error(Errc::MalformedCsv, "row " + std::to_string(line_no) + " has " +
                                          std::to_string(fields.size()) + " fields, expected " +
                                          std::to_string(width));
    }
    if (bad_col) {
      throw Error(Errc::NonNumericField, "row " + std::to_string(line_no) + ", column " +
                                             std::to_string(*bad_col + 1) + ": '" +
                                             std::string(fields[*bad_col]) + "'");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw Error(Errc::MalformedCsv, path.string() + " has no data rows");

  const Index n = static_cast<Index>(rows.size());
  const Index feature_cols = static_cast<Index>(mode == LabelMode::None ? width : width - 1);
  if (feature_cols < 1) {
    throw Error(Errc::MalformedCsv, "need at least one feature column besides the label");
  }
  Dataset out;
  out.features.resize(n, feature_cols);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < feature_cols; ++j) out.features(i, j) = rows[i][j];
  }
  if (mode == LabelMode::Real) {
    out.targets.resize(n, 1);
    for (Index i = 0; i < n; ++i) out.targets(i, 0) = rows[i][width - 1];
  } else if (mode == LabelMode::Class) {
    std::map<double, Index> index;
    for (Index i = 0; i < n; ++i) {
      const double label = rows[i][width - 1];
      if (label != std::round(label)) {
        throw Error(Errc::NonNumericField, "row " + std::to_string(i + 1) +
                                               ": class label is not an integer");
      }
      index.emplace(label, 0);
    }
    Index k = 0;
    for (auto& [label, slot] : index) {
      slot = k++;
      out.classes.push_back(label);
    }
    out.targets = Matrix::Zero(n, k);
    for (Index i = 0; i < n; ++i) out.targets(i, index.at(rows[i][width - 1])) = 1.0;
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Matrix& M) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  char buf[32];
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), M(i, j));
      if (j) out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

void write_adsk(const std::filesystem::path& path, const Matrix& M) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  const std::uint64_t rows = static_cast<std::uint64_t>(M.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(M.cols());
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = M;
  out.write(reinterpret_cast<const char*>(row_major.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

Matrix read_adsk(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  char magic[sizeof(kMagic)];
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(Errc::IoError, path.string() + " is not an ADSK1 file");
  }
  if (rows > (1ULL << 32) || cols > (1ULL << 32)) {
    throw Error(Errc::IoError, path.string() + " declares implausible dimensions");
  }
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major(
      static_cast<Index>(rows), static_cast<Index>(cols));
  in.read(reinterpret_cast<char*>(row_major.data()),
          static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!in) throw Error(Errc::IoError, path.string() + " is truncated");
  return row_major;
}

}  // namespace adasketch
