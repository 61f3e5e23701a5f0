// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedlion/data.hpp"
#include "fedlion/federated.hpp"
#include "fedlion/models.hpp"
#include "fedlion/objective.hpp"

namespace fedlion {

/// Parameters from which a Federation is rebuilt for every run seed.
struct ProblemParams {
  ProblemKind kind = ProblemKind::synthetic_quadratic;
  QuadraticOptions quadratic;
  ClassificationOptions classification;
  /// N for the classification kinds (the quadratic keeps its own).
  int num_clients = 20;
  double dirichlet_alpha = 1.0;
  std::size_t hidden_dim = 32;
  std::filesystem::path csv_path;
  ModelKind csv_model = ModelKind::logistic;
  /// Fixed data seed; when absent the run seed also generates the data.
  std::optional<std::uint64_t> data_seed;

  int clients() const;
};

Federation build_federation(const ProblemParams& params, std::uint64_t run_seed);

struct PlannedRun {
  std::string name;  // {algo}_E{E}_seed{seed}
  FederatedConfig config;
};

struct ExperimentPlan {
  ProblemParams problem;
  /// One entry per (algorithm, E) combination; seeds are applied on top.
  std::vector<FederatedConfig> grid;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "fedlion_out";
  bool capture_packets = false;
  bool record_wall_time = false;
  /// Per-round alpha_hat; defaults to on for the quadratic problem only.
  std::optional<bool> track_alpha;

  std::vector<PlannedRun> runs() const;
};

/// Parses and validates a plan. Unknown keys and out-of-range values throw
/// ValidationError naming the field.
ExperimentPlan parse_plan(const nlohmann::json& j);
ExperimentPlan load_plan(const std::filesystem::path& path);

struct RunPlanOptions {
  /// OpenMP thread count; 0 keeps the runtime default. Never changes results.
  int threads = 0;
  ExecutionPolicy policy = ExecutionPolicy::parallel;
  bool quiet = true;
};

/// Executes every run, writing `{name}.csv`, `{name}.ckpt`, `{name}.hist.json`
/// (FedLion only), optionally `{name}.packets`, and `manifest.json`. A failed
/// run leaves its partial outputs plus `{name}.failed`. Returns 0 iff all runs
/// completed.
int run_plan(const ExperimentPlan& plan, const RunPlanOptions& options = {});

struct ReplayOptions {
  std::optional<std::filesystem::path> init_checkpoint;
  std::optional<std::filesystem::path> final_checkpoint;
  double lr = 0.001;
};

struct ReplayReport {
  std::size_t packets = 0;
  std::size_t rounds = 0;
  std::uint64_t wire_bits = 0;
  /// Packets whose decode-then-encode bytes differ from the capture.
  std::size_t reencode_mismatches = 0;
  /// Replayed server model, when an initial checkpoint was given.
  std::optional<ParamVector> model;
  /// max |replayed - final checkpoint|, when both checkpoints were given.
  std::optional<double> max_abs_diff;
  nlohmann::json to_json() const;
};

/// Decodes a `.packets` capture and re-runs the FedLion server model update
/// on it. Packets are grouped into rounds by their header's round field.
ReplayReport replay_capture(const std::filesystem::path& capture, const ReplayOptions& options);

}  // namespace fedlion
