// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "fedlion/data.hpp"
#include "fedlion/models.hpp"
#include "fedlion/tensor.hpp"

namespace fedlion {

enum class ExecutionPolicy { serial, parallel };

/// A client's local objective f_i, evaluated on minibatches drawn from its shard.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dimension() const = 0;
  virtual double loss(const ParamVector& x, const ClientShard& shard,
                      const Batch& batch) const = 0;
  virtual ParamVector gradient(const ParamVector& x, const ClientShard& shard,
                               const Batch& batch) const = 0;

  /// f_i(x) over the whole shard.
  virtual double local_loss(const ParamVector& x, const ClientShard& shard) const;
  /// grad f_i(x) over the whole shard.
  virtual ParamVector local_gradient(const ParamVector& x, const ClientShard& shard) const;

  /// Random starting model x_0 for a run seed.
  virtual ParamVector initial_point(std::uint64_t seed) const = 0;
  /// Checkpoint header fragment describing the model.
  virtual nlohmann::json describe() const = 0;
};

class ModelObjective final : public Objective {
 public:
  explicit ModelObjective(ModelArch arch) : arch_(arch) {}

  const ModelArch& arch() const { return arch_; }

  std::size_t dimension() const override { return arch_.d(); }
  double loss(const ParamVector& x, const ClientShard& shard, const Batch& batch) const override;
  ParamVector gradient(const ParamVector& x, const ClientShard& shard,
                       const Batch& batch) const override;
  ParamVector initial_point(std::uint64_t seed) const override;
  nlohmann::json describe() const override;

 private:
  ModelArch arch_;
};

/// f_i(x) = 1/2 (x - c_i)^T A (x - c_i) with shared diagonal A > 0.
///
/// Shard examples carry zero-mean noise vectors xi (features); the per-example
/// loss is f_i(x) + xi^T (x - c_i), so a minibatch gradient is
/// A (x - c_i) + mean(xi) and the full-shard gradient is exactly A (x - c_i).
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(std::vector<double> curvature, std::vector<ParamVector> centers,
                     double init_scale = 1.0);

  const std::vector<double>& curvature() const { return curvature_; }
  const ParamVector& center(int client) const { return centers_.at(static_cast<std::size_t>(client)); }
  int num_clients() const { return static_cast<int>(centers_.size()); }

  /// argmin f = mean of the centers.
  ParamVector optimum() const;
  /// f* = f(optimum).
  double optimum_value() const;
  /// f(x) = mean_i f_i(x).
  double global_loss(const ParamVector& x) const;
  /// Sum of the per-coordinate Lipschitz constants of grad f (= trace A).
  double smoothness_bound() const;

  std::size_t dimension() const override { return curvature_.size(); }
  double loss(const ParamVector& x, const ClientShard& shard, const Batch& batch) const override;
  ParamVector gradient(const ParamVector& x, const ClientShard& shard,
                       const Batch& batch) const override;
  double local_loss(const ParamVector& x, const ClientShard& shard) const override;
  ParamVector local_gradient(const ParamVector& x, const ClientShard& shard) const override;
  ParamVector initial_point(std::uint64_t seed) const override;
  nlohmann::json describe() const override;

 private:
  double quadratic_part(const ParamVector& x, int client) const;

  std::vector<double> curvature_;
  std::vector<ParamVector> centers_;
  double init_scale_;
};

/// A problem instance: the objective, its shards, and what is known about it.
struct Federation {
  ProblemSpec spec;
  std::vector<ClientShard> shards;
  std::shared_ptr<const Objective> objective;
};

struct QuadraticOptions {
  std::size_t d = 10;
  int num_clients = 8;
  /// Spread of the client centers around their common mean.
  double heterogeneity = 0.0;
  /// sigma-bar: per-coordinate noise standard deviation is noise_scale / d.
  double noise_scale = 0.0;
  int examples_per_client = 64;
  /// Standard deviation of the shared mean center.
  double center_scale = 1.0;
  double curvature_min = 0.5;
  double curvature_max = 2.0;
  /// Standard deviation of the random starting point.
  double init_scale = 1.0;
};

/// Controlled testbed. Client offsets are drawn from N(0, 1) and centered so
/// the global optimum does not move with `heterogeneity`; with
/// heterogeneity = 0 every client has bitwise the same center.
Federation make_quadratic_federation(const QuadraticOptions& opts, std::uint64_t seed);

struct GlobalEvaluation {
  double loss = 0.0;
  ParamVector gradient;
  /// Per-client full gradients (index = client id). Empty when evaluated on a
  /// subsample.
  std::vector<ParamVector> local_gradients;
};

/// Evaluation sample used for problems too large for a full pass.
struct EvalSample {
  /// (client, example index) pairs.
  std::vector<std::pair<int, std::size_t>> picks;
  /// Importance weights so the weighted sum estimates mean_i f_i.
  std::vector<double> weights;
};

inline constexpr std::size_t kFullEvalLimit = 100000;
inline constexpr std::size_t kEvalSubsample = 4096;

/// Uniform subsample of all examples (empty when the federation holds fewer
/// than kFullEvalLimit examples, meaning "evaluate exactly").
EvalSample make_eval_sample(std::span<const ClientShard> shards, std::uint64_t seed);

/// f(x) = mean_i f_i(x) and its gradient. Local gradients are computed per
/// client (in parallel under `parallel`) and averaged in client order.
GlobalEvaluation evaluate_global(const Objective& objective, std::span<const ClientShard> shards,
                                 const ParamVector& x, const EvalSample& sample,
                                 ExecutionPolicy policy);

}  // namespace fedlion
