#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "qfix/errors.hpp"

namespace qfix {

using Matrix = std::vector<std::vector<double>>;

// Dense Gaussian elimination with partial pivoting. The callers solve
// strictly diagonally dominant systems at desk scale, so no refinement is
// needed.
inline std::vector<double> solve_linear(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  if (a.size() != n) fail(Errc::DimensionMismatch, "matrix rows");
  for (const auto& row : a)
    if (row.size() != n) fail(Errc::DimensionMismatch, "matrix columns");

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-14)
      fail(Errc::ModelEvaluationFailure, "singular linear system");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double acc = b[r];
    for (std::size_t k = r + 1; k < n; ++k) acc -= a[r][k] * x[k];
    x[r] = acc / a[r][r];
  }
  return x;
}

}  // namespace qfix
