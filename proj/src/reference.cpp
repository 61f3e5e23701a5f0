// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedlion/reference.hpp"

#include "fedlion/errors.hpp"

namespace fedlion::reference {

ParamVector sign(const ParamVector& v) {
  require_finite(v.span(), "sign");
  ParamVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? 1.0 : (v[i] < 0.0 ? -1.0 : 0.0);
  return out;
}

ParamVector lerp(const ParamVector& a, const ParamVector& b, double beta) {
  require_same_size(a.size(), b.size(), "lerp");
  ParamVector out(a.size());
  const double keep = 1.0 - beta;
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = beta * a[i] + keep * b[i];
  return out;
}

ParamVector mean_reduce(std::span<const ParamVector> vs) {
  if (vs.empty()) throw UsageError("mean_reduce: empty list");
  ParamVector out = vs.front();
  for (std::size_t k = 1; k < vs.size(); ++k) {
    require_same_size(vs[k].size(), out.size(), "mean_reduce");
    const double inv = static_cast<double>(k + 1);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (vs[k][i] - out[i]) / inv;
  }
  return out;
}

void lion_step(std::span<double> x, std::span<double> m, std::span<std::int32_t> delta,
               std::span<const double> g, double lr, double beta1, double beta2) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double c = beta1 * m[i] + (1.0 - beta1) * g[i];
    const int h = c > 0.0 ? 1 : (c < 0.0 ? -1 : 0);
    x[i] -= lr * h;
    delta[i] += h;
    m[i] = beta2 * m[i] + (1.0 - beta2) * g[i];
  }
}

void sgd_step(std::span<double> x, std::span<const double> g, double lr) {
  for (std::size_t i = 0; i < g.size(); ++i) x[i] -= lr * g[i];
}

void heavy_ball_step(std::span<double> x, std::span<double> m, std::span<const double> g,
                     double lr, double beta) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    m[i] = beta * m[i] + g[i];
    x[i] -= lr * m[i];
  }
}

void apply_integer_update(std::span<double> x, std::span<const std::int64_t> sum, double scale) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= scale * static_cast<double>(sum[i]);
}

}  // namespace fedlion::reference
