#pragma once

// Dense numeric kernels used by the tensor engine. Every kernel exists in a
// serial reference form and an OpenMP form; results are bitwise identical
// because each output element is always accumulated in the same fixed order,
// independent of the thread count. The active backend is a process-wide
// switch so a whole run can be forced serial for testing or benchmarking.

#include <cstdint>

namespace epsfd::kernels {

enum class Backend { serial, openmp };

Backend active_backend();
void set_backend(Backend b);

bool openmp_compiled();
int thread_count();
void set_thread_count(int n);

// y[m,n] = a[m,k] * b[k,n]
void matmul(const double* a, const double* b, double* y,
            std::int64_t m, std::int64_t k, std::int64_t n);

// y[m,k] += a[m,n] * b[k,n]^T        (dX of matmul)
void matmul_nt_acc(const double* a, const double* b, double* y,
                   std::int64_t m, std::int64_t n, std::int64_t k);

// y[k,n] += a[m,k]^T * b[m,n]        (dW of matmul)
void matmul_tn_acc(const double* a, const double* b, double* y,
                   std::int64_t m, std::int64_t k, std::int64_t n);

// Serial reference implementations, kept callable for tests and benchmarks.
void matmul_serial(const double* a, const double* b, double* y,
                   std::int64_t m, std::int64_t k, std::int64_t n);
void matmul_nt_acc_serial(const double* a, const double* b, double* y,
                          std::int64_t m, std::int64_t n, std::int64_t k);
void matmul_tn_acc_serial(const double* a, const double* b, double* y,
                          std::int64_t m, std::int64_t k, std::int64_t n);

// Fixed-block pairwise sum. Block partials are combined in block order, so
// the result does not depend on the backend or thread count.
double block_sum(const double* x, std::int64_t n);
double block_sum_serial(const double* x, std::int64_t n);

// Work threshold below which the OpenMP backend stays serial.
inline constexpr std::int64_t parallel_grain = 1 << 14;

namespace detail {
bool use_openmp(std::int64_t work);
}

// Elementwise maps. f is applied per index; iterations are independent, so
// serial and OpenMP execution agree bitwise.
template <class F>
void map(const double* x, double* y, std::int64_t n, F f) {
  if (detail::use_openmp(n)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) y[i] = f(x[i]);
  } else {
    for (std::int64_t i = 0; i < n; ++i) y[i] = f(x[i]);
  }
}

template <class F>
void zip(const double* a, const double* b, double* y, std::int64_t n, F f) {
  if (detail::use_openmp(n)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) y[i] = f(a[i], b[i]);
  } else {
    for (std::int64_t i = 0; i < n; ++i) y[i] = f(a[i], b[i]);
  }
}

}  // namespace epsfd::kernels
