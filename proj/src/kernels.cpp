#include "epsfd/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <vector>

#ifdef EPSFD_HAS_OPENMP
#include <omp.h>
#endif

namespace epsfd::kernels {

namespace {

Backend g_backend =
#ifdef EPSFD_HAS_OPENMP
    Backend::openmp;
#else
    Backend::serial;
#endif

int g_threads = 0;  // 0 = library default

}  // namespace

Backend active_backend() { return g_backend; }

void set_backend(Backend b) { g_backend = b; }

bool openmp_compiled() {
#ifdef EPSFD_HAS_OPENMP
  return true;
#else
  return false;
#endif
}

int thread_count() {
#ifdef EPSFD_HAS_OPENMP
  return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
  return 1;
#endif
}

void set_thread_count(int n) {
  g_threads = n;
#ifdef EPSFD_HAS_OPENMP
  if (n > 0) omp_set_num_threads(n);
#endif
}

namespace detail {

bool use_openmp(std::int64_t work) {
#ifdef EPSFD_HAS_OPENMP
  return g_backend == Backend::openmp && work >= parallel_grain;
#else
  (void)work;
  return false;
#endif
}

}  // namespace detail

// Inner dot products run over k in ascending order in every variant, so the
// parallel and serial paths produce identical floating-point results.

namespace {

void matmul_rows(const double* a, const double* bt, double* y,
                 std::int64_t r0, std::int64_t r1,
                 std::int64_t k, std::int64_t n) {
  for (std::int64_t i = r0; i < r1; ++i) {
    const double* arow = a + i * k;
    double* yrow = y + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const double* bcol = bt + j * k;
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * bcol[p];
      yrow[j] = acc;
    }
  }
}

std::vector<double> transpose(const double* b, std::int64_t k, std::int64_t n) {
  std::vector<double> bt(static_cast<std::size_t>(k) * n);
  for (std::int64_t p = 0; p < k; ++p)
    for (std::int64_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  return bt;
}

}  // namespace

void matmul_serial(const double* a, const double* b, double* y,
                   std::int64_t m, std::int64_t k, std::int64_t n) {
  std::vector<double> bt = transpose(b, k, n);
  matmul_rows(a, bt.data(), y, 0, m, k, n);
}

void matmul(const double* a, const double* b, double* y,
            std::int64_t m, std::int64_t k, std::int64_t n) {
  if (!detail::use_openmp(m * k * n)) {
    matmul_serial(a, b, y, m, k, n);
    return;
  }
  std::vector<double> bt = transpose(b, k, n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i)
    matmul_rows(a, bt.data(), y, i, i + 1, k, n);
}

void matmul_nt_acc_serial(const double* a, const double* b, double* y,
                          std::int64_t m, std::int64_t n, std::int64_t k) {
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    double* yrow = y + i * k;
    for (std::int64_t j = 0; j < k; ++j) {
      const double* brow = b + j * n;
      double acc = 0.0;
      for (std::int64_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
      yrow[j] += acc;
    }
  }
}

void matmul_nt_acc(const double* a, const double* b, double* y,
                   std::int64_t m, std::int64_t n, std::int64_t k) {
  if (!detail::use_openmp(m * n * k)) {
    matmul_nt_acc_serial(a, b, y, m, n, k);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i)
    matmul_nt_acc_serial(a + i * n, b, y + i * k, 1, n, k);
}

void matmul_tn_acc_serial(const double* a, const double* b, double* y,
                          std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t j = 0; j < k; ++j) {
    double* yrow = y + j * n;
    for (std::int64_t q = 0; q < n; ++q) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < m; ++i) acc += a[i * k + j] * b[i * n + q];
      yrow[q] += acc;
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* y,
                   std::int64_t m, std::int64_t k, std::int64_t n) {
  if (!detail::use_openmp(m * k * n)) {
    matmul_tn_acc_serial(a, b, y, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < k; ++j) {
    double* yrow = y + j * n;
    for (std::int64_t q = 0; q < n; ++q) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < m; ++i) acc += a[i * k + j] * b[i * n + q];
      yrow[q] += acc;
    }
  }
}

namespace {

constexpr std::int64_t sum_block = 4096;

double sum_range(const double* x, std::int64_t n) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

}  // namespace

double block_sum_serial(const double* x, std::int64_t n) {
  if (n <= sum_block) return sum_range(x, n);
  std::int64_t blocks = (n + sum_block - 1) / sum_block;
  double acc = 0.0;
  for (std::int64_t b = 0; b < blocks; ++b) {
    std::int64_t lo = b * sum_block;
    acc += sum_range(x + lo, std::min(n, lo + sum_block) - lo);
  }
  return acc;
}

double block_sum(const double* x, std::int64_t n) {
  if (!detail::use_openmp(n) || n <= sum_block) return block_sum_serial(x, n);
  std::int64_t blocks = (n + sum_block - 1) / sum_block;
  std::vector<double> partial(static_cast<std::size_t>(blocks));
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < blocks; ++b) {
    std::int64_t lo = b * sum_block;
    partial[b] = sum_range(x + lo, std::min(n, lo + sum_block) - lo);
  }
  // Combine in block order: same order as the serial reference.
  double acc = 0.0;
  for (std::int64_t b = 0; b < blocks; ++b) acc += partial[b];
  return acc;
}

}  // namespace epsfd::kernels
