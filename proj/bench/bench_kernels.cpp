// Serial vs OpenMP timings for the batch kernels.
//
//   bench_kernels [samples] [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>

#include "protoclue/kernels.hpp"

using namespace protoclue;

namespace {

Vec random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

template <class F>
double best_ms(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-22s %10.3f %10.3f %8.2fx\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t samples = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;
  constexpr std::size_t dim = 512, internal = 512, classes = 20;

  std::mt19937_64 rng(1);
  const AnticipationHead head = AnticipationHead::random(dim, internal, classes, 2);
  std::vector<Vec> pooled;
  std::vector<LabeledSample> data;
  std::vector<ClueFeatures> clues;
  for (std::size_t i = 0; i < samples; ++i) {
    pooled.push_back(random_vec(rng, dim));
    data.push_back({pooled.back(), {i % classes}});
    clues.push_back({random_vec(rng, dim), random_vec(rng, dim)});
  }
  const ClassFeatureTable table = ClassFeatureTable::random_unit(classes, dim, 3);
  EngineConfig cfg;
  cfg.class_count = classes;

  std::printf("samples %zu, dim %zu, internal %zu, classes %zu, threads %d, best of %d\n", samples,
              dim, internal, classes, omp_get_max_threads(), repeats);
  std::printf("%-22s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");
  row("forward_batch",
      best_ms(repeats, [&] { kernels::forward_batch_serial(head, pooled); }),
      best_ms(repeats, [&] { kernels::forward_batch_parallel(head, pooled); }));
  row("dataset_bce_gradient",
      best_ms(repeats, [&] { kernels::dataset_bce_gradient_serial(head, data); }),
      best_ms(repeats, [&] { kernels::dataset_bce_gradient_parallel(head, data); }));
  row("consistency_batch",
      best_ms(repeats, [&] { kernels::consistency_batch_serial(clues, table, cfg); }),
      best_ms(repeats, [&] { kernels::consistency_batch_parallel(clues, table, cfg); }));
  return 0;
}
