// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedlion/codec.hpp"
#include "fedlion/data.hpp"
#include "fedlion/objective.hpp"
#include "fedlion/tensor.hpp"

namespace fedlion {

/// One row per communication round, measured on the server model after
/// aggregation.
struct RoundRecord {
  int round = 0;
  double train_loss = 0.0;
  /// ||grad f(x)||_1 and ||grad f(x)||_2 of the global objective.
  double grad_l1 = 0.0;
  double grad_l2 = 0.0;
  /// ||v||_1 / ||v||_2 of the mean first-step minibatch gradient across the
  /// round's participants; absent if that vector is zero.
  std::optional<double> density;
  /// n^(1/4)
  double density_threshold = 0.0;
  std::optional<double> alpha_hat;
  std::uint64_t uplink_bits = 0;
  std::uint64_t downlink_bits = 0;
  double wall_ms = 0.0;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct DensityReport {
  double density = 0.0;
  double threshold = 0.0;
  bool dense = false;
};

/// density = ||v||_1/||v||_2, threshold = n^(1/4). Absent for a zero vector.
std::optional<DensityReport> gradient_density(const ParamVector& v, int n);

/// Relative l1 deviation of local gradients from the global gradient.
struct HeterogeneityReport {
  double alpha_hat = 0.0;
  std::vector<double> per_client_ratios;
  ParamVector eval_point;
  /// alpha_hat > 1/3
  bool outside_theorem_regime = false;
};

inline constexpr double kDegenerateGradientL1 = 1e-12;

/// max_i ||grad f(x) - grad f_i(x)||_1 / ||grad f(x)||_1 with exact
/// full-shard gradients. Absent when ||grad f(x)||_1 < 1e-12.
std::optional<HeterogeneityReport> estimate_alpha(const Objective& objective,
                                                  std::span<const ClientShard> shards,
                                                  const ParamVector& x);

/// Same estimate from precomputed gradients (global = mean of locals).
std::optional<HeterogeneityReport> alpha_from_gradients(const ParamVector& global,
                                                        std::span<const ParamVector> locals,
                                                        const ParamVector& x);

enum class RateMetric { grad_l1, grad_l1_sq };

struct RateFitOptions {
  /// Fit the Cesaro (running) average rather than the raw per-round values.
  bool running_average = true;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  /// Records skipped because their metric was not positive.
  int excluded = 0;
};

/// Least-squares fit of log(metric) against log(round). With the default
/// options the fitted series is the running average of grad_l1; grad_l1_sq
/// squares that average. Needs at least 10 usable records.
RateFit fit_rate(std::span<const RoundRecord> records, RateMetric metric,
                 RateFitOptions options = {});

/// Column order of the metrics CSV.
inline constexpr const char* kMetricsHeader =
    "round,train_loss,grad_l1,grad_l2,density,density_threshold,alpha_hat,uplink_bits,"
    "downlink_bits,wall_ms";

/// Header plus one row per record; reals at 17 significant digits, absent
/// optionals as empty fields.
void emit_metrics(std::span<const RoundRecord> records, const std::filesystem::path& path);
std::string format_metrics(std::span<const RoundRecord> records);
std::vector<RoundRecord> parse_metrics(const std::filesystem::path& path);

void write_histogram_json(const DeltaHistogram& hist, const std::filesystem::path& path);
DeltaHistogram read_histogram_json(const std::filesystem::path& path);

}  // namespace fedlion
