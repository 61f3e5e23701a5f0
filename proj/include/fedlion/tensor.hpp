// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace fedlion {

/// Flat d-dimensional vector of doubles. Holds models, momenta and gradients.
/// The length is fixed at construction.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t d, double fill = 0.0) : data_(d, fill) {}
  explicit ParamVector(std::vector<double> values) : data_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : data_(values) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> data_;
};

/// Coordinates at or above this length run the elementwise kernels under
/// OpenMP; shorter vectors stay serial. Results are identical either way.
inline constexpr std::size_t kParallelThreshold = 1 << 14;

/// Throws NumericError naming `what` if any element is NaN or Inf.
void require_finite(std::span<const double> v, std::string_view what);
void require_same_size(std::size_t a, std::size_t b, std::string_view what);

/// Elementwise sign with sign(0) = 0.
ParamVector sign(const ParamVector& v);

/// beta * a + (1 - beta) * b.
ParamVector lerp(const ParamVector& a, const ParamVector& b, double beta);

double l1_norm(const ParamVector& v);
double l2_norm(const ParamVector& v);
double linf_norm(const ParamVector& v);

/// Elementwise arithmetic mean, reduced over the list in index order.
///
/// Uses the running form mean += (v_k - mean) / (k + 1), so a list of
/// identical vectors averages to that vector bit for bit.
ParamVector mean_reduce(std::span<const ParamVector> vs);

/// a - b
ParamVector subtract(const ParamVector& a, const ParamVector& b);

// Fused per-coordinate update kernels. Every coordinate is independent, so the
// parallel and serial (reference::) versions agree bitwise.

/// One Lion step: h = sign(beta1*m + (1-beta1)*g); x -= lr*h; delta += h;
/// m = beta2*m + (1-beta2)*g.
void lion_step(std::span<double> x, std::span<double> m, std::span<std::int32_t> delta,
               std::span<const double> g, double lr, double beta1, double beta2);

/// x -= lr * g
void sgd_step(std::span<double> x, std::span<const double> g, double lr);

/// Heavy-ball: m = beta*m + g; x -= lr*m.
void heavy_ball_step(std::span<double> x, std::span<double> m, std::span<const double> g,
                     double lr, double beta);

/// x -= scale * sum, where sum is an integer vector.
void apply_integer_update(std::span<double> x, std::span<const std::int64_t> sum, double scale);

}  // namespace fedlion
