// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedlion/objective.hpp"

#include <algorithm>
#include <cstdint>

#include "fedlion/errors.hpp"

namespace fedlion {

double Objective::local_loss(const ParamVector& x, const ClientShard& shard) const {
  return loss(x, shard, full_batch(shard));
}

ParamVector Objective::local_gradient(const ParamVector& x, const ClientShard& shard) const {
  return gradient(x, shard, full_batch(shard));
}

double ModelObjective::loss(const ParamVector& x, const ClientShard&, const Batch& batch) const {
  return fedlion::loss(arch_, x, batch);
}

ParamVector ModelObjective::gradient(const ParamVector& x, const ClientShard&,
                                     const Batch& batch) const {
  return grad(arch_, x, batch);
}

ParamVector ModelObjective::initial_point(std::uint64_t seed) const {
  CounterRng rng = CounterRng::keyed(seed, StreamTag::init);
  return glorot_init(arch_, rng);
}

nlohmann::json ModelObjective::describe() const { return arch_.to_json(); }

QuadraticObjective::QuadraticObjective(std::vector<double> curvature,
                                       std::vector<ParamVector> centers, double init_scale)
    : curvature_(std::move(curvature)), centers_(std::move(centers)), init_scale_(init_scale) {
  if (curvature_.empty()) throw UsageError("quadratic objective needs d >= 1");
  if (centers_.empty()) throw UsageError("quadratic objective needs at least one client");
  for (double a : curvature_) {
    if (!(a > 0.0)) throw UsageError("quadratic curvature must be positive");
  }
  for (const auto& c : centers_) require_same_size(c.size(), curvature_.size(), "quadratic center");
}

double QuadraticObjective::quadratic_part(const ParamVector& x, int client) const {
  require_same_size(x.size(), curvature_.size(), "quadratic loss");
  const ParamVector& c = center(client);
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double r = x[j] - c[j];
    s += curvature_[j] * r * r;
  }
  return 0.5 * s;
}

ParamVector QuadraticObjective::optimum() const { return mean_reduce(centers_); }

double QuadraticObjective::global_loss(const ParamVector& x) const {
  double s = 0.0;
  for (int i = 0; i < num_clients(); ++i) s += quadratic_part(x, i);
  return s / num_clients();
}

double QuadraticObjective::optimum_value() const { return global_loss(optimum()); }

double QuadraticObjective::smoothness_bound() const {
  double s = 0.0;
  for (double a : curvature_) s += a;
  return s;
}

double QuadraticObjective::loss(const ParamVector& x, const ClientShard& shard,
                                const Batch& batch) const {
  if (batch.empty()) throw UsageError("empty batch");
  const ParamVector& c = center(shard.client_id);
  double linear = 0.0;
  for (const Example* e : batch) {
    require_same_size(e->features.size(), x.size(), "quadratic noise sample");
    for (std::size_t j = 0; j < x.size(); ++j) linear += e->features[j] * (x[j] - c[j]);
  }
  return quadratic_part(x, shard.client_id) + linear / static_cast<double>(batch.size());
}

ParamVector QuadraticObjective::gradient(const ParamVector& x, const ClientShard& shard,
                                         const Batch& batch) const {
  if (batch.empty()) throw UsageError("empty batch");
  ParamVector g = local_gradient(x, shard);
  ParamVector noise(x.size());
  for (const Example* e : batch) {
    require_same_size(e->features.size(), x.size(), "quadratic noise sample");
    for (std::size_t j = 0; j < x.size(); ++j) noise[j] += e->features[j];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < x.size(); ++j) g[j] += noise[j] * inv;
  require_finite(g.span(), "quadratic gradient");
  return g;
}

double QuadraticObjective::local_loss(const ParamVector& x, const ClientShard& shard) const {
  return quadratic_part(x, shard.client_id);
}

ParamVector QuadraticObjective::local_gradient(const ParamVector& x,
                                               const ClientShard& shard) const {
  require_same_size(x.size(), curvature_.size(), "quadratic gradient");
  const ParamVector& c = center(shard.client_id);
  ParamVector g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) g[j] = curvature_[j] * (x[j] - c[j]);
  require_finite(g.span(), "quadratic gradient");
  return g;
}

ParamVector QuadraticObjective::initial_point(std::uint64_t seed) const {
  CounterRng rng = CounterRng::keyed(seed, StreamTag::init);
  ParamVector x(curvature_.size());
  for (auto& v : x) v = init_scale_ * rng.normal();
  return x;
}

nlohmann::json QuadraticObjective::describe() const {
  return {{"kind", "quadratic"}, {"d", dimension()}, {"clients", num_clients()}};
}

Federation make_quadratic_federation(const QuadraticOptions& opts, std::uint64_t seed) {
  if (opts.d < 1) throw UsageError("quadratic federation needs d >= 1");
  if (opts.num_clients < 1) throw UsageError("quadratic federation needs N >= 1");
  if (opts.examples_per_client < 1) throw UsageError("examples_per_client must be >= 1");
  if (opts.heterogeneity < 0.0) throw UsageError("heterogeneity must be >= 0");
  if (opts.noise_scale < 0.0) throw UsageError("noise_scale must be >= 0");
  if (!(opts.curvature_min > 0.0) || opts.curvature_max < opts.curvature_min) {
    throw UsageError("curvature range must satisfy 0 < min <= max");
  }

  const std::size_t d = opts.d;
  const auto N = static_cast<std::size_t>(opts.num_clients);
  CounterRng rng = CounterRng::keyed(seed, StreamTag::data, {1});

  std::vector<double> curvature(d);
  for (auto& a : curvature) {
    a = opts.curvature_min + (opts.curvature_max - opts.curvature_min) * rng.uniform();
  }
  ParamVector base(d);
  for (auto& v : base) v = opts.center_scale * rng.normal();

  std::vector<ParamVector> offsets(N, ParamVector(d));
  for (auto& u : offsets) {
    for (auto& v : u) v = rng.normal();
  }
  const ParamVector offset_mean = mean_reduce(offsets);
  std::vector<ParamVector> centers(N, ParamVector(d));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      centers[i][j] = base[j] + opts.heterogeneity * (offsets[i][j] - offset_mean[j]);
    }
  }

  const double sigma = opts.noise_scale / static_cast<double>(d);
  std::vector<ClientShard> shards;
  shards.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    const auto K = static_cast<std::size_t>(opts.examples_per_client);
    std::vector<Example> noise(K);
    std::vector<double> mean(d, 0.0);
    for (auto& e : noise) {
      e.features.resize(d);
      for (std::size_t j = 0; j < d; ++j) {
        e.features[j] = sigma * rng.normal();
        mean[j] += e.features[j];
      }
    }
    for (auto& e : noise) {
      for (std::size_t j = 0; j < d; ++j) e.features[j] -= mean[j] / static_cast<double>(K);
    }
    shards.push_back(make_shard(static_cast<int>(i), std::move(noise), seed));
  }

  auto objective =
      std::make_shared<QuadraticObjective>(std::move(curvature), std::move(centers), opts.init_scale);
  Federation fed;
  fed.spec.kind = ProblemKind::synthetic_quadratic;
  fed.spec.d = d;
  fed.spec.num_clients = opts.num_clients;
  fed.spec.known_optimum_value = objective->optimum_value();
  fed.spec.smoothness_bound = objective->smoothness_bound();
  fed.spec.noise_scale = opts.noise_scale;
  fed.shards = std::move(shards);
  fed.objective = std::move(objective);
  return fed;
}

EvalSample make_eval_sample(std::span<const ClientShard> shards, std::uint64_t seed) {
  std::size_t total = 0;
  for (const auto& s : shards) total += s.examples.size();
  EvalSample sample;
  if (total < kFullEvalLimit) return sample;

  std::vector<std::size_t> starts;
  std::size_t acc = 0;
  for (const auto& s : shards) {
    starts.push_back(acc);
    acc += s.examples.size();
  }
  CounterRng rng = CounterRng::keyed(seed, StreamTag::eval);
  const double N = static_cast<double>(shards.size());
  for (std::size_t k = 0; k < kEvalSubsample; ++k) {
    const std::size_t flat = rng.uniform_index(total);
    const auto it = std::upper_bound(starts.begin(), starts.end(), flat);
    const auto client = static_cast<std::size_t>(it - starts.begin() - 1);
    sample.picks.emplace_back(static_cast<int>(client), flat - starts[client]);
    sample.weights.push_back(static_cast<double>(total) /
                             (static_cast<double>(kEvalSubsample) * N *
                              static_cast<double>(shards[client].examples.size())));
  }
  return sample;
}

GlobalEvaluation evaluate_global(const Objective& objective, std::span<const ClientShard> shards,
                                 const ParamVector& x, const EvalSample& sample,
                                 ExecutionPolicy policy) {
  if (shards.empty()) throw UsageError("evaluate_global: no clients");
  const bool par = policy == ExecutionPolicy::parallel;
  GlobalEvaluation out;

  if (sample.picks.empty()) {
    const auto N = static_cast<std::int64_t>(shards.size());
    std::vector<double> losses(shards.size());
    out.local_gradients.resize(shards.size());
#pragma omp parallel for if (par) schedule(dynamic)
    for (std::int64_t i = 0; i < N; ++i) {
      losses[i] = objective.local_loss(x, shards[i]);
      out.local_gradients[i] = objective.local_gradient(x, shards[i]);
    }
    double s = 0.0;
    for (double l : losses) s += l;
    out.loss = s / static_cast<double>(shards.size());
    out.gradient = mean_reduce(out.local_gradients);
    return out;
  }

  const auto S = static_cast<std::int64_t>(sample.picks.size());
  std::vector<double> losses(sample.picks.size());
  std::vector<ParamVector> grads(sample.picks.size());
#pragma omp parallel for if (par) schedule(dynamic, 64)
  for (std::int64_t k = 0; k < S; ++k) {
    const auto& [client, idx] = sample.picks[k];
    const ClientShard& shard = shards[static_cast<std::size_t>(client)];
    const Batch one{&shard.examples[idx]};
    losses[k] = objective.loss(x, shard, one);
    grads[k] = objective.gradient(x, shard, one);
  }
  out.gradient = ParamVector(x.size());
  for (std::size_t k = 0; k < grads.size(); ++k) {
    out.loss += sample.weights[k] * losses[k];
    for (std::size_t j = 0; j < x.size(); ++j) out.gradient[j] += sample.weights[k] * grads[k][j];
  }
  return out;
}

}  // namespace fedlion
