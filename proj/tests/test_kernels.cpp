#include <doctest.h>

#include <vector>

#include "epsfd/kernels.hpp"
#include "epsfd/random.hpp"

using namespace epsfd;

namespace {

std::vector<double> random_vec(std::size_t n, RandomStream& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

struct BackendGuard {
  kernels::Backend saved = kernels::active_backend();
  ~BackendGuard() { kernels::set_backend(saved); }
};

}  // namespace

TEST_CASE("matmul matches hand arithmetic") {
  std::vector<double> a{1, 2, 3, 4};
  std::vector<double> b{1, 1};
  std::vector<double> y(2);
  kernels::matmul_serial(a.data(), b.data(), y.data(), 2, 2, 1);
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 7.0);
}

TEST_CASE("openmp kernels are bitwise identical to the serial reference") {
  BackendGuard guard;
  RandomStream rng(42);
  // Sizes above the parallel grain so the OpenMP path actually engages.
  std::int64_t m = 37, k = 41, n = 53;
  auto a = random_vec(static_cast<std::size_t>(m * k), rng);
  auto b = random_vec(static_cast<std::size_t>(k * n), rng);

  std::vector<double> y_serial(static_cast<std::size_t>(m * n));
  kernels::matmul_serial(a.data(), b.data(), y_serial.data(), m, k, n);

  kernels::set_backend(kernels::Backend::openmp);
  std::vector<double> y_omp(static_cast<std::size_t>(m * n));
  kernels::matmul(a.data(), b.data(), y_omp.data(), m, k, n);
  CHECK(y_serial == y_omp);

  // Accumulating backward kernels.
  auto dy = random_vec(static_cast<std::size_t>(m * n), rng);
  std::vector<double> da_serial(static_cast<std::size_t>(m * k), 0.5);
  std::vector<double> da_omp = da_serial;
  kernels::matmul_nt_acc_serial(dy.data(), b.data(), da_serial.data(), m, n, k);
  kernels::matmul_nt_acc(dy.data(), b.data(), da_omp.data(), m, n, k);
  CHECK(da_serial == da_omp);

  std::vector<double> db_serial(static_cast<std::size_t>(k * n), -0.25);
  std::vector<double> db_omp = db_serial;
  kernels::matmul_tn_acc_serial(a.data(), dy.data(), db_serial.data(), m, k, n);
  kernels::matmul_tn_acc(a.data(), dy.data(), db_omp.data(), m, k, n);
  CHECK(db_serial == db_omp);
}

TEST_CASE("block_sum is backend and size independent") {
  BackendGuard guard;
  RandomStream rng(11);
  for (std::size_t n : {std::size_t{1}, std::size_t{4095}, std::size_t{4096},
                        std::size_t{4097}, std::size_t{100000}}) {
    auto x = random_vec(n, rng);
    double serial = kernels::block_sum_serial(x.data(), static_cast<std::int64_t>(n));
    kernels::set_backend(kernels::Backend::openmp);
    double omp = kernels::block_sum(x.data(), static_cast<std::int64_t>(n));
    kernels::set_backend(kernels::Backend::serial);
    double forced_serial = kernels::block_sum(x.data(), static_cast<std::int64_t>(n));
    CHECK(serial == omp);
    CHECK(serial == forced_serial);
  }
}

TEST_CASE("map and zip agree across backends") {
  BackendGuard guard;
  RandomStream rng(3);
  std::size_t n = 50000;  // above grain
  auto a = random_vec(n, rng);
  auto b = random_vec(n, rng);
  std::vector<double> y1(n), y2(n);

  kernels::set_backend(kernels::Backend::serial);
  kernels::zip(a.data(), b.data(), y1.data(), static_cast<std::int64_t>(n),
               [](double x, double y) { return x * y + 1.0; });
  kernels::set_backend(kernels::Backend::openmp);
  kernels::zip(a.data(), b.data(), y2.data(), static_cast<std::int64_t>(n),
               [](double x, double y) { return x * y + 1.0; });
  CHECK(y1 == y2);
}
