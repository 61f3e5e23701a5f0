// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedlion/federated.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>

#include "fedlion/errors.hpp"

namespace fedlion {

std::string to_string(Schedule s) { return s == Schedule::theorem1 ? "theorem1" : "fixed"; }

Schedule schedule_from_string(const std::string& s) {
  if (s == "fixed") return Schedule::fixed;
  if (s == "theorem1") return Schedule::theorem1;
  throw UsageError("unknown schedule '" + s + "'");
}

void FederatedConfig::validate(int num_clients) const {
  if (rounds < 1) throw ValidationError("rounds", "must be at least 1");
  if (local_steps < 1 || local_steps > 65535) {
    throw ValidationError("local_steps", "must lie in [1, 65535]");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("lr", "must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("beta2", "must lie in [0, 1)");
  if (batch_size < 1) throw ValidationError("batch_size", "must be at least 1");
  if (clients_per_round < 1) throw ValidationError("clients_per_round", "must be at least 1");
  if (num_clients >= 1 && clients_per_round > num_clients) {
    throw ValidationError("clients_per_round", "n=" + std::to_string(clients_per_round) +
                                                   " exceeds the number of clients N=" +
                                                   std::to_string(num_clients));
  }
}

FederatedConfig FederatedConfig::resolved() const {
  FederatedConfig c = *this;
  if (schedule == Schedule::theorem1) {
    const double T = rounds;
    c.lr = 1.0 / std::sqrt(T);
    c.beta1 = 1.0 - 1.0 / std::sqrt(T);
    c.beta2 = 1.0 - 1.0 / T;
  }
  return c;
}

GlobalState GlobalState::initial(ParamVector x0) {
  GlobalState s;
  s.m = ParamVector(x0.size());
  s.x = std::move(x0);
  return s;
}

std::vector<int> sample_clients(int num_clients, int n, CounterRng& round_rng) {
  if (n < 1 || n > num_clients) {
    throw UsageError("sample_clients: need 1 <= n <= N (n=" + std::to_string(n) +
                     ", N=" + std::to_string(num_clients) + ")");
  }
  std::vector<int> ids(static_cast<std::size_t>(num_clients));
  std::iota(ids.begin(), ids.end(), 0);
  for (int k = 0; k < n; ++k) {
    const auto pick = k + static_cast<int>(round_rng.uniform_index(
                              static_cast<std::uint64_t>(num_clients - k)));
    std::swap(ids[static_cast<std::size_t>(k)], ids[static_cast<std::size_t>(pick)]);
  }
  ids.resize(static_cast<std::size_t>(n));
  return ids;
}

CounterRng sampling_rng(std::uint64_t seed, int round) {
  return CounterRng::keyed(seed, StreamTag::sampling, {static_cast<std::uint64_t>(round)});
}

namespace {

ParamVector step_gradient(const ParamVector& x, ClientShard& shard, const Objective& objective,
                          const FederatedConfig& config, int round, int step) {
  const Batch batch = next_minibatch(shard, config.batch_size);
  ParamVector g = objective.gradient(x, shard, batch);
  try {
    require_finite(g.span(), "gradient");
  } catch (const NumericError& e) {
    throw NumericError("round " + std::to_string(round) + ", client " +
                       std::to_string(shard.client_id) + ", step " + std::to_string(step) + ": " +
                       e.what());
  }
  return g;
}

void check_updates(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw UsageError("server step: no client updates");
}

}  // namespace

ClientUpdate fedlion_client_round(const ParamVector& x_global, const ParamVector& m_global,
                                  ClientShard& shard, const Objective& objective,
                                  const FederatedConfig& config, int round) {
  require_same_size(m_global.size(), x_global.size(), "fedlion_client_round");
  ClientUpdate up;
  up.client_id = shard.client_id;
  up.delta.E = config.local_steps;
  up.delta.values.assign(x_global.size(), 0);
  ParamVector x = x_global;
  up.momentum_out = m_global;
  for (int s = 1; s <= config.local_steps; ++s) {
    ParamVector g = step_gradient(x, shard, objective, config, round, s);
    lion_step(x.span(), up.momentum_out.span(), up.delta.values, g.span(), config.lr, config.beta1,
              config.beta2);
    if (s == 1) up.probe_gradient = std::move(g);
  }
  return up;
}

GlobalState fedlion_server_step(const GlobalState& state, std::span<const ClientUpdate> updates,
                                const FederatedConfig& config) {
  check_updates(updates);
  const std::size_t d = state.x.size();
  std::vector<std::int64_t> sum(d, 0);
  std::vector<ParamVector> momenta;
  momenta.reserve(updates.size());
  for (const auto& u : updates) {
    require_same_size(u.delta.size(), d, "fedlion_server_step delta");
    require_same_size(u.momentum_out.size(), d, "fedlion_server_step momentum");
    for (std::size_t j = 0; j < d; ++j) sum[j] += u.delta.values[j];
    momenta.push_back(u.momentum_out);
  }
  GlobalState next;
  next.x = state.x;
  apply_integer_update(next.x.span(), sum, config.lr / static_cast<double>(updates.size()));
  require_finite(next.x.span(), "server model");
  next.m = mean_reduce(momenta);
  next.round = state.round + 1;
  return next;
}

ClientUpdate fedavg_client_round(const ParamVector& x_global, ClientShard& shard,
                                 const Objective& objective, const FederatedConfig& config,
                                 int round) {
  ClientUpdate up;
  up.client_id = shard.client_id;
  ParamVector x = x_global;
  for (int s = 1; s <= config.local_steps; ++s) {
    ParamVector g = step_gradient(x, shard, objective, config, round, s);
    sgd_step(x.span(), g.span(), config.lr);
    if (s == 1) up.probe_gradient = std::move(g);
  }
  up.model_delta = subtract(x_global, x);
  return up;
}

GlobalState fedavg_server_step(const GlobalState& state, std::span<const ClientUpdate> updates,
                               const FederatedConfig&) {
  check_updates(updates);
  std::vector<ParamVector> deltas;
  deltas.reserve(updates.size());
  for (const auto& u : updates) deltas.push_back(u.model_delta);
  GlobalState next;
  next.x = subtract(state.x, mean_reduce(deltas));
  require_finite(next.x.span(), "server model");
  next.m = state.m;
  next.round = state.round + 1;
  return next;
}

ClientUpdate mfl_client_round(const ParamVector& x_global, const ParamVector& m_global,
                              ClientShard& shard, const Objective& objective,
                              const FederatedConfig& config, int round) {
  require_same_size(m_global.size(), x_global.size(), "mfl_client_round");
  ClientUpdate up;
  up.client_id = shard.client_id;
  ParamVector x = x_global;
  up.momentum_out = m_global;
  for (int s = 1; s <= config.local_steps; ++s) {
    ParamVector g = step_gradient(x, shard, objective, config, round, s);
    heavy_ball_step(x.span(), up.momentum_out.span(), g.span(), config.lr, config.beta1);
    if (s == 1) up.probe_gradient = std::move(g);
  }
  up.model_delta = subtract(x_global, x);
  return up;
}

GlobalState mfl_server_step(const GlobalState& state, std::span<const ClientUpdate> updates,
                            const FederatedConfig&) {
  check_updates(updates);
  std::vector<ParamVector> deltas, momenta;
  for (const auto& u : updates) {
    deltas.push_back(u.model_delta);
    momenta.push_back(u.momentum_out);
  }
  GlobalState next;
  next.x = subtract(state.x, mean_reduce(deltas));
  require_finite(next.x.span(), "server model");
  next.m = mean_reduce(momenta);
  next.round = state.round + 1;
  return next;
}

namespace {

class FedLionRule final : public RoundRule {
 public:
  Algorithm id() const override { return Algorithm::fedlion; }
  ClientUpdate client_round(const GlobalState& s, ClientShard& shard, const Objective& obj,
                            const FederatedConfig& c, int round) const override {
    return fedlion_client_round(s.x, s.m, shard, obj, c, round);
  }
  GlobalState server_step(const GlobalState& s, std::span<const ClientUpdate> u,
                          const FederatedConfig& c) const override {
    for (const auto& up : u) {
      for (auto v : up.delta.values) {
        if (v < -c.local_steps || v > c.local_steps) {
          throw NumericError("client " + std::to_string(up.client_id) +
                             " sent a delta outside [-E, E]");
        }
      }
    }
    return fedlion_server_step(s, u, c);
  }
};

class FedAvgRule final : public RoundRule {
 public:
  Algorithm id() const override { return Algorithm::fedavg; }
  ClientUpdate client_round(const GlobalState& s, ClientShard& shard, const Objective& obj,
                            const FederatedConfig& c, int round) const override {
    return fedavg_client_round(s.x, shard, obj, c, round);
  }
  GlobalState server_step(const GlobalState& s, std::span<const ClientUpdate> u,
                          const FederatedConfig& c) const override {
    return fedavg_server_step(s, u, c);
  }
};

class MflRule final : public RoundRule {
 public:
  Algorithm id() const override { return Algorithm::mfl; }
  ClientUpdate client_round(const GlobalState& s, ClientShard& shard, const Objective& obj,
                            const FederatedConfig& c, int round) const override {
    return mfl_client_round(s.x, s.m, shard, obj, c, round);
  }
  GlobalState server_step(const GlobalState& s, std::span<const ClientUpdate> u,
                          const FederatedConfig& c) const override {
    return mfl_server_step(s, u, c);
  }
};

}  // namespace

std::unique_ptr<RoundRule> make_rule(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::fedlion: return std::make_unique<FedLionRule>();
    case Algorithm::fedavg: return std::make_unique<FedAvgRule>();
    case Algorithm::mfl: return std::make_unique<MflRule>();
  }
  throw UsageError("unknown algorithm");
}

RunResult run_federation(const Federation& problem, const FederatedConfig& raw_config,
                         const RunOptions& options) {
  if (!problem.objective) throw UsageError("run_federation: federation has no objective");
  const int N = static_cast<int>(problem.shards.size());
  if (N < 1) throw UsageError("run_federation: federation has no clients");
  raw_config.validate(N);
  const FederatedConfig config = raw_config.resolved();
  const Objective& objective = *problem.objective;
  const auto rule = make_rule(config.algorithm);
  const bool par = options.policy == ExecutionPolicy::parallel;
  const int n = config.clients_per_round;

  std::vector<ClientShard> shards = problem.shards;
  for (auto& s : shards) {
    s.rng = CounterRng::keyed(config.seed, StreamTag::minibatch,
                              {static_cast<std::uint64_t>(s.client_id)});
  }
  const EvalSample eval_sample = make_eval_sample(shards, config.seed);
  const std::size_t d = objective.dimension();
  const CommCost cost = account_round(config.algorithm, d, config.local_steps, n);
  const double threshold = std::pow(static_cast<double>(n), 0.25);

  RunResult result;
  result.initial_model = objective.initial_point(config.seed);
  require_same_size(result.initial_model.size(), d, "initial model");
  GlobalState state = GlobalState::initial(result.initial_model);
  result.records.reserve(static_cast<std::size_t>(config.rounds));

  for (int t = 1; t <= config.rounds; ++t) {
    const auto started = std::chrono::steady_clock::now();
    CounterRng rng = sampling_rng(config.seed, t);
    const std::vector<int> ids = sample_clients(N, n, rng);

    std::vector<ClientUpdate> updates(ids.size());
    std::vector<std::exception_ptr> errors(ids.size());
    const auto count = static_cast<std::int64_t>(ids.size());
#pragma omp parallel for if (par) schedule(dynamic)
    for (std::int64_t k = 0; k < count; ++k) {
      try {
        updates[k] = rule->client_round(state, shards[static_cast<std::size_t>(ids[k])], objective,
                                        config, t);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    if (options.on_round) options.on_round(t, updates);

    state = rule->server_step(state, updates, config);

    const GlobalEvaluation eval = evaluate_global(objective, shards, state.x, eval_sample,
                                                  options.policy);
    RoundRecord rec;
    rec.round = t;
    rec.train_loss = eval.loss;
    rec.grad_l1 = l1_norm(eval.gradient);
    rec.grad_l2 = l2_norm(eval.gradient);
    std::vector<ParamVector> probes;
    probes.reserve(updates.size());
    for (const auto& u : updates) probes.push_back(u.probe_gradient);
    if (const auto dens = gradient_density(mean_reduce(probes), n)) rec.density = dens->density;
    rec.density_threshold = threshold;
    if (options.track_alpha && !eval.local_gradients.empty()) {
      if (const auto rep = alpha_from_gradients(eval.gradient, eval.local_gradients, state.x)) {
        rec.alpha_hat = rep->alpha_hat;
      }
    }
    rec.uplink_bits = static_cast<std::uint64_t>(n) * cost.uplink_bits_per_client;
    rec.downlink_bits = static_cast<std::uint64_t>(n) * cost.downlink_bits_per_client;
    if (options.record_wall_time) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              started)
                        .count();
    }
    result.records.push_back(rec);
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace fedlion
