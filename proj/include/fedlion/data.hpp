// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedlion/rng.hpp"

namespace fedlion {

struct Example {
  std::vector<double> features;
  int label = 0;
  /// Regression target, used by the linear model.
  double target = 0.0;
};

/// Non-owning view of a minibatch; pointers refer into a shard's examples.
using Batch = std::vector<const Example*>;

/// One client's local dataset and its private minibatch stream.
struct ClientShard {
  int client_id = 0;
  std::vector<Example> examples;
  CounterRng rng;
};

/// Builds a shard whose stream is keyed by (seed, client_id) only.
ClientShard make_shard(int client_id, std::vector<Example> examples, std::uint64_t seed);

/// Draws B examples uniformly with replacement from the shard's stream.
Batch next_minibatch(ClientShard& shard, int batch_size);

/// Every example of the shard, in storage order.
Batch full_batch(const ClientShard& shard);

enum class ProblemKind { synthetic_quadratic, synthetic_logistic, mlp_classification, external_csv };

std::string to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(const std::string& s);

struct ProblemSpec {
  ProblemKind kind = ProblemKind::synthetic_quadratic;
  std::size_t d = 0;
  int num_clients = 0;
  std::optional<double> known_optimum_value;  // f*
  std::optional<double> smoothness_bound;     // sum of per-coordinate L_j
  std::optional<double> noise_scale;          // sum of per-coordinate sigma_j
};

struct Dataset {
  std::vector<Example> examples;
  std::size_t feature_dim = 0;
  int num_classes = 0;

  std::vector<int> labels() const;
};

struct ClassificationOptions {
  std::size_t num_examples = 2000;
  std::size_t feature_dim = 20;
  int num_classes = 10;
  /// Standard deviation of the class means around the origin.
  double class_spread = 1.0;
  /// Within-class standard deviation.
  double noise = 1.0;
};

/// Gaussian-mixture classification set: one isotropic cluster per class,
/// labels balanced round-robin.
Dataset make_classification(const ClassificationOptions& opts, std::uint64_t seed);

/// Reads `f0,...,f{k-1},label` with a mandatory header row.
Dataset load_csv(const std::filesystem::path& path);

using Partition = std::vector<std::vector<std::size_t>>;

/// Non-IID split: each client draws label proportions from a symmetric
/// Dirichlet(alpha) and fills an equal share of slots by sampling labels from
/// them (renormalising over labels that still have unassigned examples).
/// Clients are filled round-robin, one slot at a time. Throws PartitionError
/// if a client is still empty after `max_attempts` draws.
Partition dirichlet_partition(std::span<const int> labels, int num_clients, double alpha,
                              std::uint64_t seed, int max_attempts = 100);

/// {"0": [indices...], "1": [...], ...}
nlohmann::json partition_manifest(const Partition& parts);
void write_partition_manifest(const std::filesystem::path& path, const Partition& parts);

std::vector<ClientShard> make_shards(const Dataset& data, const Partition& parts,
                                     std::uint64_t seed);

}  // namespace fedlion
