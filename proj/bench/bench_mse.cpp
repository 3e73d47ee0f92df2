// Copyright 2026 The dpgrad-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Compares the serial reference Monte-Carlo loop against the OpenMP path on
// the clip+noise+compress error estimate. Both produce identical reports;
// this target measures the wall-clock gap.

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdio>

#include "dpgrad/error_analysis.hpp"
#include "dpgrad/tasks.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

int main() {
  using namespace dpgrad;

  const std::size_t dim = 4096;
  const int trials = 2000;
  OracleSpec spec{make_spike_gradient(dim, 64, 2.5), 1.0, 16};
  RngStream batch_rng = RngStream::labeled(7, "bench/batch");
  SampleBatchGradients batch = oracle_batch(spec, batch_rng);

  PrivacyParams privacy;
  privacy.clip_radius = 80.0;
  privacy.noise_multiplier = 0.8;
  std::unique_ptr<Compressor> compressor = make_topk_compressor(16.0);
  EstimatorMechanism mechanism =
      clip_noise_compress_mechanism(privacy, *compressor);
  const RngStream trials_rng = RngStream::labeled(7, "bench/trials");

  std::printf("estimate_mse benchmark: m=%zu B=%zu n=%d\n", dim,
              spec.batch_size, trials);

  auto start = Clock::now();
  ErrorReport serial =
      estimate_mse(mechanism, batch, trials, trials_rng, ExecPolicy::serial());
  const double serial_s = seconds_since(start);
  std::printf("  serial   %8.3f s  mse=%.6f\n", serial_s, serial.mse);

#ifdef _OPENMP
  const int threads = omp_get_max_threads();
#else
  const int threads = 1;
#endif
  start = Clock::now();
  ErrorReport parallel = estimate_mse(mechanism, batch, trials, trials_rng,
                                      ExecPolicy::parallel());
  const double parallel_s = seconds_since(start);
  std::printf("  openmp   %8.3f s  mse=%.6f  (%d threads, %.2fx)\n",
              parallel_s, parallel.mse, threads,
              parallel_s > 0 ? serial_s / parallel_s : 0.0);

  const bool identical = serial.mse == parallel.mse &&
                         serial.bias_sq == parallel.bias_sq &&
                         serial.variance == parallel.variance;
  std::printf("  reports bit-identical: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
