// Compares the serial and OpenMP cosine-scan kernels on synthetic stores.
// Usage: bench_similarity [rows] [dim] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "icl/similarity_scan.hpp"

namespace {

double run_ms(void (*scan)(const float*, std::size_t, const double*,
                           std::span<const std::uint32_t>, const float*, double, double*),
              const std::vector<float>& data, std::size_t dim, const std::vector<double>& norms,
              const std::vector<std::uint32_t>& rows, const std::vector<float>& query,
              double query_norm, std::vector<double>& out, int repeats) {
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) {
    scan(data.data(), dim, norms.data(), rows, query.data(), query_norm, out.data());
  }
  const auto elapsed = std::chrono::steady_clock::now() - start;
  return std::chrono::duration<double, std::milli>(elapsed).count() / repeats;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 200000;
  const std::size_t dim = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 256;
  const int repeats = argc > 3 ? std::atoi(argv[3]) : 20;

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> data(n * dim);
  for (float& v : data) v = dist(rng);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      s += static_cast<double>(data[i * dim + d]) * data[i * dim + d];
    }
    norms[i] = std::sqrt(s);
  }
  std::vector<float> query(dim);
  for (float& v : query) v = dist(rng);
  double qs = 0.0;
  for (float v : query) qs += static_cast<double>(v) * v;
  const double query_norm = std::sqrt(qs);

  std::vector<std::uint32_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::uint32_t>(i);

  std::vector<double> serial_out(n), parallel_out(n);
  const double serial_ms = run_ms(icl::cosine_scan_serial, data, dim, norms, rows, query,
                                  query_norm, serial_out, repeats);
  const double parallel_ms = run_ms(icl::cosine_scan_parallel, data, dim, norms, rows, query,
                                    query_norm, parallel_out, repeats);

  for (std::size_t i = 0; i < n; ++i) {
    if (serial_out[i] != parallel_out[i]) {
      std::fprintf(stderr, "mismatch at row %zu\n", i);
      return 1;
    }
  }

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("rows=%zu dim=%zu repeats=%d threads=%d\n", n, dim, repeats, threads);
  std::printf("serial   %10.3f ms/scan\n", serial_ms);
  std::printf("parallel %10.3f ms/scan  (%.2fx)\n", parallel_ms,
              parallel_ms > 0 ? serial_ms / parallel_ms : 0.0);
  return 0;
}
