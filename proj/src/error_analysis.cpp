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

#include "dpgrad/error_analysis.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <atomic>
#include <cmath>
#include <vector>

#include "dpgrad/errors.hpp"

namespace dpgrad {
namespace {

// Kahan-compensated scalar accumulator; keeps the decomposition identity
// tight at n = 1e4 and beyond.
struct Accumulator {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

std::vector<std::vector<double>> run_trials_serial(
    const EstimatorMechanism& mechanism, const SampleBatchGradients& batch,
    int n, const RngStream& base_stream) {
  std::vector<std::vector<double>> estimates(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    RngStream stream = base_stream.fork(static_cast<std::uint64_t>(i));
    GradientVector estimate = mechanism.fn(batch, stream);
    if (!same_layout(estimate.layout_ptr(), batch.layout_ptr())) {
      throw LayoutError("estimate_mse: mechanism changed the layout");
    }
    auto v = estimate.values();
    estimates[static_cast<std::size_t>(i)].assign(v.begin(), v.end());
  }
  return estimates;
}

std::vector<std::vector<double>> run_trials_parallel(
    const EstimatorMechanism& mechanism, const SampleBatchGradients& batch,
    int n, const RngStream& base_stream, int threads) {
  std::vector<std::vector<double>> estimates(static_cast<std::size_t>(n));
#ifdef _OPENMP
  std::atomic<bool> failed{false};
  std::exception_ptr error;
#pragma omp parallel for schedule(static) num_threads(threads > 0 ? threads : omp_get_max_threads())
  for (int i = 0; i < n; ++i) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      RngStream stream = base_stream.fork(static_cast<std::uint64_t>(i));
      GradientVector estimate = mechanism.fn(batch, stream);
      if (!same_layout(estimate.layout_ptr(), batch.layout_ptr())) {
        throw LayoutError("estimate_mse: mechanism changed the layout");
      }
      auto v = estimate.values();
      estimates[static_cast<std::size_t>(i)].assign(v.begin(), v.end());
    } catch (...) {
#pragma omp critical
      {
        if (!failed.load(std::memory_order_relaxed)) {
          error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
        }
      }
    }
  }
  if (failed.load()) std::rethrow_exception(error);
  return estimates;
#else
  (void)threads;
  return run_trials_serial(mechanism, batch, n, base_stream);
#endif
}

}  // namespace

std::string_view stage_label(Stage stage) {
  switch (stage) {
    case Stage::clip:
      return "clip";
    case Stage::clip_noise:
      return "clip+noise";
    case Stage::clip_noise_compress:
      return "clip+noise+compress";
  }
  return "unknown";
}

ErrorReport estimate_mse(const EstimatorMechanism& mechanism,
                         const SampleBatchGradients& batch, int n,
                         const RngStream& base_stream, ExecPolicy policy) {
  if (n < 2) throw InvalidParameter("estimate_mse: n >= 2 required");
  if (!mechanism.fn) throw InvalidParameter("estimate_mse: empty mechanism");

  const GradientVector target = mean_gradient(batch);
  const std::size_t m = target.size();

  std::vector<std::vector<double>> estimates =
      policy.threads == 1
          ? run_trials_serial(mechanism, batch, n, base_stream)
          : run_trials_parallel(mechanism, batch, n, base_stream,
                                policy.threads);

  // Mean of the estimates, centered on the first trial: identical trials
  // yield a bit-exact mean, so deterministic mechanisms report variance 0.
  const std::vector<double>& first = estimates.front();
  std::vector<double> mean(m);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < m; ++j) {
    Accumulator acc;
    for (int i = 0; i < n; ++i) {
      acc.add(estimates[static_cast<std::size_t>(i)][j] - first[j]);
    }
    mean[j] = first[j] + acc.sum * inv_n;
  }

  Accumulator mse_sum;
  Accumulator var_sum;
  for (int i = 0; i < n; ++i) {
    const std::vector<double>& row = estimates[static_cast<std::size_t>(i)];
    double to_target = 0.0;
    double to_mean = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double dt = row[j] - target[j];
      const double dm = row[j] - mean[j];
      to_target += dt * dt;
      to_mean += dm * dm;
    }
    mse_sum.add(to_target);
    var_sum.add(to_mean);
  }
  double bias_sq = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double d = mean[j] - target[j];
    bias_sq += d * d;
  }

  ErrorReport report;
  report.n = n;
  report.mse = mse_sum.sum * inv_n;
  report.variance = var_sum.sum * inv_n;
  report.bias_sq = bias_sq;
  return report;
}

EstimatorMechanism clip_mechanism(const PrivacyParams& params) {
  PrivacyParams clip_only = params;
  clip_only.noise_multiplier = 0.0;
  return EstimatorMechanism{
      "clip", [clip_only](const SampleBatchGradients& batch, RngStream& rng) {
        return privatize_batch(batch, clip_only, rng);
      }};
}

EstimatorMechanism clip_noise_mechanism(const PrivacyParams& params) {
  return EstimatorMechanism{
      "clip+noise",
      [params](const SampleBatchGradients& batch, RngStream& rng) {
        return privatize_batch(batch, params, rng);
      }};
}

EstimatorMechanism clip_noise_compress_mechanism(const PrivacyParams& params,
                                                 const Compressor& compressor) {
  std::shared_ptr<Compressor> prototype = compressor.clone();
  return EstimatorMechanism{
      "clip+noise+compress",
      [params, prototype](const SampleBatchGradients& batch, RngStream& rng) {
        GradientVector noisy = privatize_batch(batch, params, rng);
        // Fresh clone per trial: single-shot compression, zero residual.
        std::unique_ptr<Compressor> fresh = prototype->clone();
        CompressOutcome outcome = fresh->compress(noisy, rng);
        return decompress(outcome.message, batch.layout_ptr());
      }};
}

StageBreakdown stage_breakdown(const PrivacyParams& params,
                               const Compressor& compressor,
                               const SampleBatchGradients& batch, int n,
                               const RngStream& base_stream,
                               ExecPolicy policy) {
  StageBreakdown breakdown{
      {StageReport{Stage::clip, {}}, StageReport{Stage::clip_noise, {}},
       StageReport{Stage::clip_noise_compress, {}}}};
  breakdown.stages[0].report =
      estimate_mse(clip_mechanism(params), batch, n, base_stream.fork(1), policy);
  breakdown.stages[1].report = estimate_mse(clip_noise_mechanism(params), batch,
                                            n, base_stream.fork(2), policy);
  breakdown.stages[2].report =
      estimate_mse(clip_noise_compress_mechanism(params, compressor), batch, n,
                   base_stream.fork(3), policy);
  return breakdown;
}

}  // namespace dpgrad
