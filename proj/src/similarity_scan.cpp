#include "icl/similarity_scan.hpp"

#include <algorithm>

namespace icl {

namespace {

inline double score_row(const float* row, const float* query, std::size_t dim, double norms) {
  double dot = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    dot += static_cast<double>(row[d]) * static_cast<double>(query[d]);
  }
  return std::clamp(dot / norms, -1.0, 1.0);
}

}  // namespace

void cosine_scan_serial(const float* data, std::size_t dim, const double* row_norms,
                        std::span<const std::uint32_t> rows, const float* query,
                        double query_norm, double* out) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::uint32_t r = rows[i];
    out[i] = score_row(data + static_cast<std::size_t>(r) * dim, query, dim,
                       row_norms[r] * query_norm);
  }
}

void cosine_scan_parallel(const float* data, std::size_t dim, const double* row_norms,
                          std::span<const std::uint32_t> rows, const float* query,
                          double query_norm, double* out) {
  const std::int64_t n = static_cast<std::int64_t>(rows.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const std::uint32_t r = rows[static_cast<std::size_t>(i)];
    out[i] = score_row(data + static_cast<std::size_t>(r) * dim, query, dim,
                       row_norms[r] * query_norm);
  }
}

}  // namespace icl
