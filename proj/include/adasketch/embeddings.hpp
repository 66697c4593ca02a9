#pragma once

#include <cstdint>
#include <string_view>

#include "adasketch/linalg.hpp"

namespace adasketch {

enum class SketchFamily { Gaussian, Srht, Sjlt };

std::string_view to_string(SketchFamily family);
/// Accepts "gaussian", "srht" and "sjlt"; throws InvalidArgument otherwise.
SketchFamily parse_sketch_family(std::string_view name);

struct SketchSpec {
  SketchFamily family = SketchFamily::Gaussian;
  Index m = 1;
  Index s = 1;  // nonzeros per column, SJLT only
  std::uint64_t seed = 0;
};

struct SketchedData {
  Matrix SA;
  SketchSpec spec;
  Index n_original = 0;
};

/// S has i.i.d. N(0, 1/m) entries, one RNG stream per row of S.
SketchedData sketch_gaussian(const Matrix& A, Index m, std::uint64_t seed);

/// S = √(n_p/m)·R·H·E on A zero-padded to n_p = 2^⌈log₂ n⌉ rows, where E holds
/// random signs, H is the orthonormal Hadamard transform and R keeps m rows
/// drawn without replacement.
SketchedData sketch_srht(const Matrix& A, Index m, std::uint64_t seed);

/// Each column of S has exactly s entries ±1/√s in distinct rows. One RNG
/// stream per column of S.
SketchedData sketch_sjlt(const Matrix& A, Index m, Index s, std::uint64_t seed);

SketchedData sketch(const Matrix& A, const SketchSpec& spec);

/// Largest meaningful m: n for Gaussian and SJLT, the padded length for SRHT.
Index max_sketch_rows(SketchFamily family, Index n);

/// 16·log(16 d_e/δ)·(√d_e + √(8 log(2n/δ)))².
double critical_m_srht(double d_e, Index n, double delta);

/// (√d_e + √(8 log(16/δ)))².
double critical_m_gaussian(double d_e, double delta);

}  // namespace adasketch
