// Benchmark comparing the serial reference kernels against the OpenMP
// variants, plus one end-to-end training-step timing per backend.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "epsfd/kernels.hpp"
#include "epsfd/nn.hpp"
#include "epsfd/random.hpp"
#include "epsfd/tensor.hpp"

using namespace epsfd;

namespace {

double seconds_per_run(const std::function<void()>& fn, int repeats) {
  // warm-up
  fn();
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(end - start).count() / repeats;
}

void bench_matmul(std::int64_t m, std::int64_t k, std::int64_t n, int repeats) {
  RandomStream rng(7);
  std::vector<double> a(static_cast<std::size_t>(m * k)), b(static_cast<std::size_t>(k * n)),
      y(static_cast<std::size_t>(m * n));
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();

  double serial = seconds_per_run(
      [&]() { kernels::matmul_serial(a.data(), b.data(), y.data(), m, k, n); }, repeats);

  kernels::set_backend(kernels::Backend::openmp);
  double parallel = seconds_per_run(
      [&]() { kernels::matmul(a.data(), b.data(), y.data(), m, k, n); }, repeats);
  kernels::set_backend(kernels::Backend::serial);

  double gflop = 2.0 * static_cast<double>(m) * k * n * 1e-9;
  std::printf("matmul %4lldx%4lldx%4lld   serial %8.3f ms (%6.2f GF/s)   omp %8.3f ms (%6.2f GF/s)   speedup %.2fx\n",
              static_cast<long long>(m), static_cast<long long>(k), static_cast<long long>(n),
              serial * 1e3, gflop / serial, parallel * 1e3, gflop / parallel,
              serial / parallel);
}

void bench_train_step(kernels::Backend backend, const char* label) {
  kernels::set_backend(backend);
  RandomStream rng(11);
  std::int64_t batch = 128, width = 100;
  nn::AutoencoderConfig cfg;
  cfg.encoder_widths = {256, 64};
  auto model = nn::AutoencoderModel::create(width, cfg, rng);
  auto params = model.parameters();

  std::vector<double> xv(static_cast<std::size_t>(batch * width));
  for (auto& v : xv) v = rng.uniform();
  ad::Tensor x = ad::Tensor::from_values({batch, width}, std::move(xv));

  double t = seconds_per_run(
      [&]() {
        for (auto& [name, p] : params) {
          (void)name;
          p.zero_grad();
        }
        ad::Graph graph;
        ad::Graph::Scope scope(graph);
        ad::Tensor loss = ad::mean(ad::square(ad::sub(model.forward(x), x)));
        graph.backward(loss);
      },
      20);
  std::printf("autoencoder fwd+bwd step (batch %lld, width %lld)  %-6s %8.3f ms\n",
              static_cast<long long>(batch), static_cast<long long>(width), label, t * 1e3);
}

}  // namespace

int main() {
  std::printf("openmp compiled: %s, threads: %d\n",
              kernels::openmp_compiled() ? "yes" : "no", kernels::thread_count());
  kernels::set_backend(kernels::Backend::serial);

  bench_matmul(128, 100, 64, 50);
  bench_matmul(256, 256, 256, 20);
  bench_matmul(512, 512, 512, 5);

  bench_train_step(kernels::Backend::serial, "serial");
  bench_train_step(kernels::Backend::openmp, "omp");
  kernels::set_backend(kernels::Backend::openmp);
  return 0;
}
