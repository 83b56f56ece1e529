#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace icl {

// Cosine-similarity scoring kernel over a row-major matrix. out[i] is the
// cosine of `query` against row rows[i], clamped to [-1, 1]. row_norms and
// query_norm are precomputed Euclidean norms; callers guarantee they are
// non-zero. Each output element is computed independently with a fixed
// summation order, so the serial and parallel variants are bitwise equal.
void cosine_scan_serial(const float* data, std::size_t dim, const double* row_norms,
                        std::span<const std::uint32_t> rows, const float* query,
                        double query_norm, double* out);

// OpenMP variant of cosine_scan_serial. Falls back to the serial loop when
// built without OpenMP.
void cosine_scan_parallel(const float* data, std::size_t dim, const double* row_norms,
                          std::span<const std::uint32_t> rows, const float* query,
                          double query_norm, double* out);

}  // namespace icl
