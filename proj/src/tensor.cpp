// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedlion/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedlion/errors.hpp"

namespace fedlion {

namespace {

inline double sign_of(double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); }

inline bool parallel_for(std::size_t n) { return n >= kParallelThreshold; }

}  // namespace

void require_finite(std::span<const double> v, std::string_view what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError(std::string(what) + ": non-finite value at coordinate " +
                         std::to_string(i));
    }
  }
}

void require_same_size(std::size_t a, std::size_t b, std::string_view what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
  }
}

ParamVector sign(const ParamVector& v) {
  require_finite(v.span(), "sign");
  ParamVector out(v.size());
  const auto n = static_cast<std::int64_t>(v.size());
#pragma omp parallel for if (parallel_for(v.size())) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = sign_of(v[i]);
  return out;
}

ParamVector lerp(const ParamVector& a, const ParamVector& b, double beta) {
  require_same_size(a.size(), b.size(), "lerp");
  if (!(beta >= 0.0 && beta < 1.0)) throw UsageError("lerp: beta must lie in [0, 1)");
  ParamVector out(a.size());
  const double keep = 1.0 - beta;
  const auto n = static_cast<std::int64_t>(a.size());
#pragma omp parallel for if (parallel_for(a.size())) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = beta * a[i] + keep * b[i];
  require_finite(out.span(), "lerp");
  return out;
}

double l1_norm(const ParamVector& v) {
  require_finite(v.span(), "l1_norm");
  double s = 0.0;
  for (double a : v) s += std::abs(a);
  return s;
}

double l2_norm(const ParamVector& v) {
  require_finite(v.span(), "l2_norm");
  double s = 0.0;
  for (double a : v) s += a * a;
  return std::sqrt(s);
}

double linf_norm(const ParamVector& v) {
  require_finite(v.span(), "linf_norm");
  double s = 0.0;
  for (double a : v) s = std::max(s, std::abs(a));
  return s;
}

ParamVector mean_reduce(std::span<const ParamVector> vs) {
  if (vs.empty()) throw UsageError("mean_reduce: empty list");
  const std::size_t d = vs.front().size();
  for (const auto& v : vs) require_same_size(v.size(), d, "mean_reduce");
  ParamVector out = vs.front();
  const auto n = static_cast<std::int64_t>(d);
#pragma omp parallel for if (parallel_for(d)) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    double mean = vs[0][i];
    for (std::size_t k = 1; k < vs.size(); ++k) {
      mean += (vs[k][i] - mean) / static_cast<double>(k + 1);
    }
    out[i] = mean;
  }
  require_finite(out.span(), "mean_reduce");
  return out;
}

ParamVector subtract(const ParamVector& a, const ParamVector& b) {
  require_same_size(a.size(), b.size(), "subtract");
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

void lion_step(std::span<double> x, std::span<double> m, std::span<std::int32_t> delta,
               std::span<const double> g, double lr, double beta1, double beta2) {
  require_same_size(x.size(), g.size(), "lion_step");
  require_same_size(m.size(), g.size(), "lion_step");
  require_same_size(delta.size(), g.size(), "lion_step");
  require_finite(g, "lion_step gradient");
  const double keep1 = 1.0 - beta1;
  const double keep2 = 1.0 - beta2;
  const auto n = static_cast<std::int64_t>(g.size());
#pragma omp parallel for if (parallel_for(g.size())) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double h = sign_of(beta1 * m[i] + keep1 * g[i]);
    x[i] -= lr * h;
    delta[i] += static_cast<std::int32_t>(h);
    m[i] = beta2 * m[i] + keep2 * g[i];
  }
}

void sgd_step(std::span<double> x, std::span<const double> g, double lr) {
  require_same_size(x.size(), g.size(), "sgd_step");
  require_finite(g, "sgd_step gradient");
  const auto n = static_cast<std::int64_t>(g.size());
#pragma omp parallel for if (parallel_for(g.size())) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) x[i] -= lr * g[i];
}

void heavy_ball_step(std::span<double> x, std::span<double> m, std::span<const double> g,
                     double lr, double beta) {
  require_same_size(x.size(), g.size(), "heavy_ball_step");
  require_same_size(m.size(), g.size(), "heavy_ball_step");
  require_finite(g, "heavy_ball_step gradient");
  const auto n = static_cast<std::int64_t>(g.size());
#pragma omp parallel for if (parallel_for(g.size())) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    m[i] = beta * m[i] + g[i];
    x[i] -= lr * m[i];
  }
}

void apply_integer_update(std::span<double> x, std::span<const std::int64_t> sum, double scale) {
  require_same_size(x.size(), sum.size(), "apply_integer_update");
  const auto n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for if (parallel_for(x.size())) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) x[i] -= scale * static_cast<double>(sum[i]);
}

}  // namespace fedlion
