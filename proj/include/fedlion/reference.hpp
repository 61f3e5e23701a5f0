// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include "fedlion/tensor.hpp"

// Plain serial loops mirroring the OpenMP kernels in tensor.hpp. Kept for
// equivalence tests and as the baseline in the benchmark.
namespace fedlion::reference {

ParamVector sign(const ParamVector& v);
ParamVector lerp(const ParamVector& a, const ParamVector& b, double beta);
ParamVector mean_reduce(std::span<const ParamVector> vs);

void lion_step(std::span<double> x, std::span<double> m, std::span<std::int32_t> delta,
               std::span<const double> g, double lr, double beta1, double beta2);
void sgd_step(std::span<double> x, std::span<const double> g, double lr);
void heavy_ball_step(std::span<double> x, std::span<double> m, std::span<const double> g,
                     double lr, double beta);
void apply_integer_update(std::span<double> x, std::span<const std::int64_t> sum, double scale);

}  // namespace fedlion::reference
