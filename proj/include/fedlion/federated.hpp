// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fedlion/codec.hpp"
#include "fedlion/data.hpp"
#include "fedlion/metrics.hpp"
#include "fedlion/objective.hpp"
#include "fedlion/rng.hpp"
#include "fedlion/tensor.hpp"

namespace fedlion {

enum class Schedule { fixed, theorem1 };

std::string to_string(Schedule s);
Schedule schedule_from_string(const std::string& s);

struct FederatedConfig {
  Algorithm algorithm = Algorithm::fedlion;
  int rounds = 1;             // T
  int local_steps = 1;        // E
  double lr = 0.001;          // gamma
  double beta1 = 0.9;
  double beta2 = 0.99;
  int batch_size = 32;        // B
  int clients_per_round = 1;  // n
  std::uint64_t seed = 0;
  Schedule schedule = Schedule::fixed;

  /// Throws ValidationError naming the offending field.
  void validate(int num_clients) const;

  /// Copy with the schedule applied: under `theorem1`,
  /// lr = 1/sqrt(T), beta1 = 1 - 1/sqrt(T), beta2 = 1 - 1/T.
  FederatedConfig resolved() const;
};

struct GlobalState {
  ParamVector x;
  ParamVector m;
  int round = 0;

  /// x0 with zero momentum.
  static GlobalState initial(ParamVector x0);
};

/// What a client sends back. FedLion fills `delta` and `momentum_out`;
/// FedAvg fills `model_delta`; MFL fills `model_delta` and `momentum_out`.
struct ClientUpdate {
  int client_id = 0;
  DeltaVector delta;
  ParamVector model_delta;
  ParamVector momentum_out;
  /// Minibatch gradient of the first local step, kept for the density probe.
  ParamVector probe_gradient;
};

/// n distinct client ids, uniform without replacement (partial Fisher-Yates).
std::vector<int> sample_clients(int num_clients, int n, CounterRng& round_rng);

/// Stream used to sample participants of `round`.
CounterRng sampling_rng(std::uint64_t seed, int round);

/// E local Lion steps from the global model and momentum. delta is the
/// running integer sum of the step signs, i.e. (x_global - x_local)/lr.
ClientUpdate fedlion_client_round(const ParamVector& x_global, const ParamVector& m_global,
                                  ClientShard& shard, const Objective& objective,
                                  const FederatedConfig& config, int round = 0);

/// x <- x - (lr/n) sum delta_i; m <- mean momentum_out_i.
GlobalState fedlion_server_step(const GlobalState& state, std::span<const ClientUpdate> updates,
                                const FederatedConfig& config);

/// E plain SGD steps; model_delta = x_global - x_local.
ClientUpdate fedavg_client_round(const ParamVector& x_global, ClientShard& shard,
                                 const Objective& objective, const FederatedConfig& config,
                                 int round = 0);
GlobalState fedavg_server_step(const GlobalState& state, std::span<const ClientUpdate> updates,
                               const FederatedConfig& config);

/// E heavy-ball steps (m <- beta1 m + g; x <- x - lr m).
ClientUpdate mfl_client_round(const ParamVector& x_global, const ParamVector& m_global,
                              ClientShard& shard, const Objective& objective,
                              const FederatedConfig& config, int round = 0);
GlobalState mfl_server_step(const GlobalState& state, std::span<const ClientUpdate> updates,
                            const FederatedConfig& config);

/// Client and server halves of one algorithm. New baselines plug in here.
class RoundRule {
 public:
  virtual ~RoundRule() = default;
  virtual Algorithm id() const = 0;
  virtual ClientUpdate client_round(const GlobalState& state, ClientShard& shard,
                                    const Objective& objective, const FederatedConfig& config,
                                    int round) const = 0;
  virtual GlobalState server_step(const GlobalState& state, std::span<const ClientUpdate> updates,
                                  const FederatedConfig& config) const = 0;
};

std::unique_ptr<RoundRule> make_rule(Algorithm algorithm);

using RoundObserver = std::function<void(int round, std::span<const ClientUpdate> updates)>;

struct RunOptions {
  ExecutionPolicy policy = ExecutionPolicy::parallel;
  /// Called after each round's client phase, before aggregation.
  RoundObserver on_round;
  /// Record alpha_hat each round (needs exact per-client gradients).
  bool track_alpha = false;
  /// Fill RoundRecord::wall_ms; leave it 0 to keep outputs byte-reproducible.
  bool record_wall_time = false;
};

struct RunResult {
  std::vector<RoundRecord> records;
  ParamVector initial_model;
  GlobalState final_state;
};

/// T rounds of `config.algorithm` on the federation. The federation is not
/// modified (shards are copied). Deterministic in config.seed regardless of
/// policy or thread count.
RunResult run_federation(const Federation& problem, const FederatedConfig& config,
                         const RunOptions& options = {});

}  // namespace fedlion
