// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedlion/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "fedlion/codec.hpp"
#include "fedlion/errors.hpp"
#include "fedlion/metrics.hpp"

namespace fedlion {

int ProblemParams::clients() const {
  return kind == ProblemKind::synthetic_quadratic ? quadratic.num_clients : num_clients;
}

Federation build_federation(const ProblemParams& params, std::uint64_t run_seed) {
  const std::uint64_t seed = params.data_seed.value_or(run_seed);
  if (params.kind == ProblemKind::synthetic_quadratic) {
    return make_quadratic_federation(params.quadratic, seed);
  }

  Dataset data = params.kind == ProblemKind::external_csv
                     ? load_csv(params.csv_path)
                     : make_classification(params.classification, seed);
  const auto labels = data.labels();
  const Partition parts = dirichlet_partition(labels, params.num_clients, params.dirichlet_alpha, seed);

  const auto C = static_cast<std::size_t>(std::max(data.num_classes, 2));
  ModelArch arch;
  switch (params.kind) {
    case ProblemKind::synthetic_logistic: arch = ModelArch::logistic(data.feature_dim, C); break;
    case ProblemKind::mlp_classification:
      arch = ModelArch::mlp(data.feature_dim, params.hidden_dim, C);
      break;
    case ProblemKind::external_csv:
      switch (params.csv_model) {
        case ModelKind::linear: arch = ModelArch::linear(data.feature_dim); break;
        case ModelKind::logistic: arch = ModelArch::logistic(data.feature_dim, C); break;
        case ModelKind::mlp: arch = ModelArch::mlp(data.feature_dim, params.hidden_dim, C); break;
      }
      break;
    case ProblemKind::synthetic_quadratic: break;
  }

  Federation fed;
  fed.spec.kind = params.kind;
  fed.spec.d = arch.d();
  fed.spec.num_clients = params.num_clients;
  fed.shards = make_shards(data, parts, seed);
  fed.objective = std::make_shared<ModelObjective>(arch);
  return fed;
}

std::vector<PlannedRun> ExperimentPlan::runs() const {
  std::vector<PlannedRun> out;
  for (const auto& cfg : grid) {
    for (std::uint64_t seed : seeds) {
      PlannedRun r;
      r.config = cfg;
      r.config.seed = seed;
      r.name = to_string(cfg.algorithm) + "_E" + std::to_string(cfg.local_steps) + "_seed" +
               std::to_string(seed);
      out.push_back(std::move(r));
    }
  }
  return out;
}

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where.empty() ? "plan" : where, "must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ValidationError(where.empty() ? key : where + "." + key, "unknown key");
    }
  }
}

template <typename T>
T field(const json& j, const std::string& key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where.empty() ? key : where + "." + key, "has the wrong type");
  }
}

template <typename Fn>
auto named(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const UsageError& e) {
    throw ValidationError(name, e.what());
  }
}

ProblemParams parse_problem(const json& j) {
  ProblemParams p;
  if (j.is_null()) return p;
  const std::string where = "problem";
  p.kind = named("problem.kind", [&] {
    return problem_kind_from_string(field<std::string>(j, "kind", "synthetic-quadratic", where));
  });

  if (p.kind == ProblemKind::synthetic_quadratic) {
    reject_unknown(j,
                   {"kind", "d", "num_clients", "heterogeneity", "noise_scale",
                    "examples_per_client", "center_scale", "curvature_min", "curvature_max",
                    "init_scale", "data_seed"},
                   where);
    auto& q = p.quadratic;
    const auto d = field<long long>(j, "d", static_cast<long long>(q.d), where);
    if (d < 1) throw ValidationError("problem.d", "must be at least 1");
    q.d = static_cast<std::size_t>(d);
    q.num_clients = field<int>(j, "num_clients", q.num_clients, where);
    if (q.num_clients < 1) throw ValidationError("problem.num_clients", "must be at least 1");
    q.heterogeneity = field<double>(j, "heterogeneity", q.heterogeneity, where);
    if (q.heterogeneity < 0) throw ValidationError("problem.heterogeneity", "must be >= 0");
    q.noise_scale = field<double>(j, "noise_scale", q.noise_scale, where);
    if (q.noise_scale < 0) throw ValidationError("problem.noise_scale", "must be >= 0");
    q.examples_per_client = field<int>(j, "examples_per_client", q.examples_per_client, where);
    if (q.examples_per_client < 1) {
      throw ValidationError("problem.examples_per_client", "must be at least 1");
    }
    q.center_scale = field<double>(j, "center_scale", q.center_scale, where);
    q.curvature_min = field<double>(j, "curvature_min", q.curvature_min, where);
    q.curvature_max = field<double>(j, "curvature_max", q.curvature_max, where);
    if (!(q.curvature_min > 0) || q.curvature_max < q.curvature_min) {
      throw ValidationError("problem.curvature_min", "need 0 < curvature_min <= curvature_max");
    }
    q.init_scale = field<double>(j, "init_scale", q.init_scale, where);
  } else {
    reject_unknown(j,
                   {"kind", "num_clients", "dirichlet_alpha", "hidden_dim", "num_examples",
                    "feature_dim", "num_classes", "class_spread", "noise", "path", "model",
                    "data_seed"},
                   where);
    p.num_clients = field<int>(j, "num_clients", p.num_clients, where);
    if (p.num_clients < 1) throw ValidationError("problem.num_clients", "must be at least 1");
    p.dirichlet_alpha = field<double>(j, "dirichlet_alpha", p.dirichlet_alpha, where);
    if (!(p.dirichlet_alpha > 0)) throw ValidationError("problem.dirichlet_alpha", "must be > 0");
    p.hidden_dim = field<std::size_t>(j, "hidden_dim", p.hidden_dim, where);
    if (p.hidden_dim < 1) throw ValidationError("problem.hidden_dim", "must be at least 1");
    auto& c = p.classification;
    c.num_examples = field<std::size_t>(j, "num_examples", c.num_examples, where);
    c.feature_dim = field<std::size_t>(j, "feature_dim", c.feature_dim, where);
    if (c.feature_dim < 1) throw ValidationError("problem.feature_dim", "must be at least 1");
    c.num_classes = field<int>(j, "num_classes", c.num_classes, where);
    if (c.num_classes < 2) throw ValidationError("problem.num_classes", "must be at least 2");
    if (c.num_examples < static_cast<std::size_t>(c.num_classes)) {
      throw ValidationError("problem.num_examples", "must be at least num_classes");
    }
    c.class_spread = field<double>(j, "class_spread", c.class_spread, where);
    c.noise = field<double>(j, "noise", c.noise, where);
    if (p.kind == ProblemKind::external_csv) {
      if (!j.contains("path")) throw ValidationError("problem.path", "required for external-csv");
      p.csv_path = field<std::string>(j, "path", "", where);
      p.csv_model = named("problem.model", [&] {
        return model_kind_from_string(field<std::string>(j, "model", "logistic", where));
      });
    } else if (j.contains("path") || j.contains("model")) {
      throw ValidationError(j.contains("path") ? "problem.path" : "problem.model",
                            "only valid for external-csv");
    }
  }
  if (j.contains("data_seed")) p.data_seed = field<std::uint64_t>(j, "data_seed", 0, where);
  return p;
}

}  // namespace

ExperimentPlan parse_plan(const json& j) {
  reject_unknown(j,
                 {"output_dir", "seeds", "seed", "algorithm", "rounds", "local_steps", "lr",
                  "beta1", "beta2", "batch_size", "clients_per_round", "schedule", "grid",
                  "problem", "capture_packets", "record_wall_time", "track_alpha"},
                 "");
  ExperimentPlan plan;
  plan.problem = parse_problem(j.contains("problem") ? j.at("problem") : json());
  const int N = plan.problem.clients();

  FederatedConfig base;
  base.algorithm = named("algorithm", [&] {
    return algorithm_from_string(field<std::string>(j, "algorithm", "fedlion", ""));
  });
  base.rounds = field<int>(j, "rounds", 1, "");
  base.local_steps = field<int>(j, "local_steps", 1, "");
  base.lr = field<double>(j, "lr", 0.001, "");
  base.beta1 = field<double>(j, "beta1", 0.9, "");
  base.beta2 = field<double>(j, "beta2", 0.99, "");
  base.batch_size = field<int>(j, "batch_size", 32, "");
  base.clients_per_round = field<int>(j, "clients_per_round", std::min(10, N), "");
  base.schedule = named("schedule", [&] {
    return schedule_from_string(field<std::string>(j, "schedule", "fixed", ""));
  });

  std::vector<Algorithm> algorithms{base.algorithm};
  std::vector<int> steps{base.local_steps};
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    reject_unknown(g, {"algorithm", "local_steps"}, "grid");
    if (g.contains("algorithm")) {
      algorithms.clear();
      for (const auto& name : field<std::vector<std::string>>(g, "algorithm", {}, "grid")) {
        algorithms.push_back(named("grid.algorithm", [&] { return algorithm_from_string(name); }));
      }
    }
    if (g.contains("local_steps")) steps = field<std::vector<int>>(g, "local_steps", {}, "grid");
  }
  for (Algorithm a : algorithms) {
    for (int e : steps) {
      FederatedConfig c = base;
      c.algorithm = a;
      c.local_steps = e;
      c.validate(N);
      plan.grid.push_back(c);
    }
  }

  if (j.contains("seeds") && j.contains("seed")) {
    throw ValidationError("seed", "give either 'seed' or 'seeds', not both");
  }
  if (j.contains("seeds")) {
    plan.seeds = field<std::vector<std::uint64_t>>(j, "seeds", {}, "");
  } else {
    plan.seeds = {field<std::uint64_t>(j, "seed", 0, "")};
  }
  plan.output_dir = field<std::string>(j, "output_dir", plan.output_dir.string(), "");
  plan.capture_packets = field<bool>(j, "capture_packets", false, "");
  plan.record_wall_time = field<bool>(j, "record_wall_time", false, "");
  if (j.contains("track_alpha")) plan.track_alpha = field<bool>(j, "track_alpha", false, "");
  return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plan " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return parse_plan(j);
}

namespace {

struct RunOutcome {
  std::string name;
  FederatedConfig config;
  bool ok = false;
  std::string error;
  double final_loss = 0.0;
  std::uint64_t total_uplink_bits = 0;
  std::optional<double> rate_slope;
};

RunOutcome execute_run(const ExperimentPlan& plan, const PlannedRun& run,
                       const RunPlanOptions& options) {
  RunOutcome out;
  out.name = run.name;
  out.config = run.config.resolved();
  const auto base = plan.output_dir / run.name;
  const auto failed_marker = std::filesystem::path(base.string() + ".failed");
  std::filesystem::remove(failed_marker);

  try {
    const Federation fed = build_federation(plan.problem, run.config.seed);
    RunOptions ro;
    ro.policy = options.policy;
    ro.record_wall_time = plan.record_wall_time;
    ro.track_alpha = plan.track_alpha.value_or(plan.problem.kind == ProblemKind::synthetic_quadratic);

    const bool lion = run.config.algorithm == Algorithm::fedlion;
    std::optional<DeltaTally> tally;
    if (lion) tally.emplace(run.config.local_steps);
    std::optional<PacketCaptureWriter> capture;
    if (lion && plan.capture_packets) capture.emplace(base.string() + ".packets");
    if (lion) {
      ro.on_round = [&](int round, std::span<const ClientUpdate> updates) {
        for (const auto& u : updates) {
          tally->add(u.delta);
          if (capture) {
            const auto pkt = encode_packet(static_cast<std::uint32_t>(round),
                                           static_cast<std::uint32_t>(u.client_id), u.delta,
                                           u.momentum_out);
            capture->append(pkt.bytes);
          }
        }
      };
    }

    const RunResult result = run_federation(fed, run.config, ro);
    emit_metrics(result.records, base.string() + ".csv");
    nlohmann::json header = {{"arch", fed.objective->describe()},
                             {"seed", run.config.seed},
                             {"algorithm", to_string(run.config.algorithm)},
                             {"round", result.final_state.round}};
    write_checkpoint(base.string() + ".ckpt", header, result.final_state.x);
    if (capture) {
      header["round"] = 0;
      write_checkpoint(base.string() + ".init.ckpt", header, result.initial_model);
    }
    if (tally) write_histogram_json(tally->finish(), base.string() + ".hist.json");

    out.ok = true;
    out.final_loss = result.records.back().train_loss;
    for (const auto& r : result.records) out.total_uplink_bits += r.uplink_bits;
    if (result.records.size() >= 10) {
      out.rate_slope = fit_rate(result.records, RateMetric::grad_l1).slope;
    }
  } catch (const std::exception& e) {
    out.error = e.what();
    std::ofstream marker(failed_marker);
    marker << e.what() << '\n';
  }
  return out;
}

}  // namespace

int run_plan(const ExperimentPlan& plan, const RunPlanOptions& options) {
  std::filesystem::create_directories(plan.output_dir);
  if (options.threads > 0) omp_set_num_threads(options.threads);

  std::vector<RunOutcome> outcomes;
  for (const auto& run : plan.runs()) {
    if (!options.quiet) std::cerr << "running " << run.name << '\n';
    outcomes.push_back(execute_run(plan, run, options));
    if (!options.quiet && !outcomes.back().ok) {
      std::cerr << run.name << " failed: " << outcomes.back().error << '\n';
    }
  }

  nlohmann::json manifest;
  manifest["runs"] = nlohmann::json::array();
  std::map<std::string, std::pair<double, int>> by_algo;
  bool all_ok = true;
  for (const auto& o : outcomes) {
    nlohmann::json r = {{"name", o.name},
                        {"algorithm", to_string(o.config.algorithm)},
                        {"local_steps", o.config.local_steps},
                        {"seed", o.config.seed},
                        {"lr", o.config.lr},
                        {"status", o.ok ? "completed" : "failed"}};
    if (o.ok) {
      r["final_loss"] = o.final_loss;
      r["total_uplink_bits"] = o.total_uplink_bits;
      r["rate_slope"] = o.rate_slope ? nlohmann::json(*o.rate_slope) : nlohmann::json(nullptr);
      auto& [sum, count] = by_algo[to_string(o.config.algorithm)];
      sum += o.final_loss;
      ++count;
    } else {
      r["error"] = o.error;
      all_ok = false;
    }
    manifest["runs"].push_back(r);
  }
  std::vector<std::pair<std::string, double>> ranking;
  for (const auto& [algo, acc] : by_algo) ranking.emplace_back(algo, acc.first / acc.second);
  std::stable_sort(ranking.begin(), ranking.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  manifest["algorithm_ranking"] = nlohmann::json::array();
  for (const auto& [algo, mean] : ranking) {
    manifest["algorithm_ranking"].push_back({{"algorithm", algo}, {"mean_final_loss", mean}});
  }
  std::ofstream out(plan.output_dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + plan.output_dir.string());
  out << manifest.dump(2) << '\n';
  return all_ok ? 0 : 1;
}

nlohmann::json ReplayReport::to_json() const {
  nlohmann::json j = {{"packets", packets},
                      {"rounds", rounds},
                      {"wire_bits", wire_bits},
                      {"reencode_mismatches", reencode_mismatches}};
  j["max_abs_diff"] = max_abs_diff ? nlohmann::json(*max_abs_diff) : nlohmann::json(nullptr);
  return j;
}

ReplayReport replay_capture(const std::filesystem::path& capture, const ReplayOptions& options) {
  const auto raw = read_capture(capture);
  ReplayReport rep;
  rep.packets = raw.size();

  std::optional<ParamVector> x;
  if (options.init_checkpoint) x = read_checkpoint(*options.init_checkpoint).params;

  std::size_t k = 0;
  while (k < raw.size()) {
    const std::uint32_t round = decode_packet(raw[k]).header.round;
    std::vector<std::int64_t> sum;
    std::size_t in_round = 0;
    for (; k < raw.size(); ++k) {
      const UplinkPacket p = decode_packet(raw[k]);
      if (p.header.round != round) break;
      rep.wire_bits += 8ull * raw[k].size();
      ParamVector m(p.momentum.size());
      for (std::size_t j = 0; j < m.size(); ++j) m[j] = p.momentum[j];
      if (encode_packet(p.header.round, p.header.client_id, p.delta, m).bytes != raw[k]) {
        ++rep.reencode_mismatches;
      }
      if (sum.empty()) sum.assign(p.delta.size(), 0);
      require_same_size(p.delta.size(), sum.size(), "replay");
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += p.delta.values[j];
      ++in_round;
    }
    ++rep.rounds;
    if (x) {
      require_same_size(x->size(), sum.size(), "replay model");
      apply_integer_update(x->span(), sum, options.lr / static_cast<double>(in_round));
    }
  }
  if (x && options.final_checkpoint) {
    const ParamVector final_x = read_checkpoint(*options.final_checkpoint).params;
    require_same_size(final_x.size(), x->size(), "replay final checkpoint");
    double diff = 0.0;
    for (std::size_t j = 0; j < x->size(); ++j) diff = std::max(diff, std::abs((*x)[j] - final_x[j]));
    rep.max_abs_diff = diff;
  }
  rep.model = std::move(x);
  return rep;
}

}  // namespace fedlion
