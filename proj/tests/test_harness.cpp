#include <gtest/gtest.h>

#include <omp.h>

#include <fstream>
#include <sstream>

#include "fedlion/errors.hpp"
#include "fedlion/harness.hpp"
#include "test_util.hpp"

using namespace fedlion;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string field_of(const json& j) {
  try {
    parse_plan(j);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST(Plan, MinimalFileGetsDefaults) {
  const auto plan = parse_plan(json{{"algorithm", "fedlion"}, {"rounds", 10}});
  ASSERT_EQ(plan.grid.size(), 1u);
  const auto& c = plan.grid[0];
  EXPECT_EQ(c.algorithm, Algorithm::fedlion);
  EXPECT_EQ(c.rounds, 10);
  EXPECT_EQ(c.lr, 0.001);
  EXPECT_EQ(c.beta1, 0.9);
  EXPECT_EQ(c.beta2, 0.99);
  EXPECT_EQ(c.local_steps, 1);
  EXPECT_EQ(plan.seeds, (std::vector<std::uint64_t>{0}));
  EXPECT_EQ(plan.problem.kind, ProblemKind::synthetic_quadratic);
  EXPECT_EQ(c.clients_per_round, plan.problem.clients());
}

TEST(Plan, ErrorsNameTheField) {
  EXPECT_EQ(field_of({{"rounds", 10}}), "<none>");
  EXPECT_EQ(field_of({{"rouns", 10}}), "rouns");
  EXPECT_EQ(field_of({{"problem", {{"kind", "mlp-classification"}, {"depth", 3}}}}),
            "problem.depth");
  EXPECT_EQ(field_of({{"grid", {{"lr", {0.1}}}}}), "grid.lr");
  EXPECT_EQ(field_of({{"clients_per_round", 9}, {"problem", {{"num_clients", 8}}}}),
            "clients_per_round");
  EXPECT_EQ(field_of({{"rounds", 0}}), "rounds");
  EXPECT_EQ(field_of({{"beta2", 1.5}}), "beta2");
  EXPECT_EQ(field_of({{"lr", "fast"}}), "lr");
  EXPECT_EQ(field_of({{"algorithm", "sgd"}}), "algorithm");
  EXPECT_EQ(field_of({{"grid", {{"local_steps", {5, 0}}}}}), "local_steps");
  EXPECT_EQ(field_of({{"seed", 1}, {"seeds", {1, 2}}}), "seed");
  EXPECT_EQ(field_of({{"problem", {{"kind", "external-csv"}}}}), "problem.path");
  EXPECT_EQ(field_of({{"problem", {{"kind", "tabular"}}}}), "problem.kind");
}

TEST(Plan, GridProduct) {
  const auto plan = parse_plan({{"rounds", 2},
                                {"grid", {{"algorithm", {"fedlion", "fedavg"}},
                                          {"local_steps", {5, 10, 20}}}},
                                {"seeds", {1, 2, 3}}});
  const auto runs = plan.runs();
  ASSERT_EQ(runs.size(), 18u);
  EXPECT_EQ(runs.front().name, "fedlion_E5_seed1");
  EXPECT_EQ(runs.back().name, "fedavg_E20_seed3");
  EXPECT_EQ(runs.back().config.seed, 3u);
}

TEST(Plan, LoadFromFile) {
  const auto path = scratch_dir() / "plan.json";
  std::ofstream(path) << R"({
    // comments are allowed
    "rounds": 4, "local_steps": 3, "output_dir": "out",
    "problem": {"kind": "mlp-classification", "num_clients": 6, "num_examples": 120}
  })";
  const auto plan = load_plan(path);
  EXPECT_EQ(plan.grid[0].local_steps, 3);
  EXPECT_EQ(plan.output_dir, "out");
  EXPECT_EQ(plan.problem.num_clients, 6);
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(load_plan(path), FormatError);
  EXPECT_THROW(load_plan(path.parent_path() / "nope.json"), IoError);
}

TEST(Plan, BuildsEachProblemKind) {
  ProblemParams p;
  EXPECT_EQ(build_federation(p, 1).shards.size(), 8u);
  p.kind = ProblemKind::mlp_classification;
  p.num_clients = 5;
  p.classification.num_examples = 200;
  p.hidden_dim = 4;
  const auto mlp = build_federation(p, 1);
  EXPECT_EQ(mlp.shards.size(), 5u);
  EXPECT_EQ(mlp.spec.d, 20u * 4 + 4 + 4 * 10 + 10);
  p.kind = ProblemKind::synthetic_logistic;
  EXPECT_EQ(build_federation(p, 1).spec.d, 20u * 10 + 10);

  const auto csv = scratch_dir() / "d.csv";
  std::ofstream(csv) << "f0,f1,label\n0,1,0\n1,0,1\n1,1,1\n0,0,0\n";
  p.kind = ProblemKind::external_csv;
  p.csv_path = csv;
  p.num_clients = 2;
  p.csv_model = ModelKind::linear;
  EXPECT_EQ(build_federation(p, 1).spec.d, 3u);
}

TEST(Plan, DataSeedPinsTheData) {
  ProblemParams p;
  p.data_seed = 5;
  const auto a = build_federation(p, 1), b = build_federation(p, 2);
  EXPECT_EQ(a.shards[0].examples[0].features, b.shards[0].examples[0].features);
}

TEST(RunPlan, EmptyGridWritesEmptyManifest) {
  const auto dir = scratch_dir() / "out";
  auto plan = parse_plan({{"grid", {{"algorithm", json::array()}}}});
  plan.output_dir = dir;
  EXPECT_EQ(run_plan(plan), 0);
  std::ifstream in(dir / "manifest.json");
  const auto m = json::parse(in);
  EXPECT_TRUE(m["runs"].empty());
}

TEST(RunPlan, WritesArtifactsAndRanks) {
  const auto dir = scratch_dir() / "out";
  auto plan = parse_plan({{"rounds", 12},
                          {"local_steps", 2},
                          {"lr", 0.05},
                          {"grid", {{"algorithm", {"fedlion", "fedavg", "mfl"}}}},
                          {"seeds", {1, 2}},
                          {"capture_packets", true}});
  plan.output_dir = dir;
  ASSERT_EQ(run_plan(plan), 0);
  for (const auto& r : plan.runs()) {
    EXPECT_TRUE(std::filesystem::exists(dir / (r.name + ".csv"))) << r.name;
    EXPECT_TRUE(std::filesystem::exists(dir / (r.name + ".ckpt"))) << r.name;
    const bool lion = r.config.algorithm == Algorithm::fedlion;
    EXPECT_EQ(std::filesystem::exists(dir / (r.name + ".hist.json")), lion) << r.name;
    EXPECT_EQ(std::filesystem::exists(dir / (r.name + ".packets")), lion) << r.name;
    EXPECT_EQ(parse_metrics(dir / (r.name + ".csv")).size(), 12u);
  }
  std::ifstream in(dir / "manifest.json");
  const auto m = json::parse(in);
  ASSERT_EQ(m["runs"].size(), 6u);
  for (const auto& r : m["runs"]) {
    EXPECT_EQ(r["status"], "completed");
    EXPECT_TRUE(r.contains("final_loss"));
    EXPECT_TRUE(r.contains("total_uplink_bits"));
    EXPECT_TRUE(r["rate_slope"].is_number());
  }
  const auto& rank = m["algorithm_ranking"];
  ASSERT_EQ(rank.size(), 3u);
  EXPECT_LE(rank[0]["mean_final_loss"].get<double>(), rank[1]["mean_final_loss"].get<double>());
  EXPECT_LE(rank[1]["mean_final_loss"].get<double>(), rank[2]["mean_final_loss"].get<double>());

  // Histogram conservation: d * rounds * clients symbols.
  const auto h = read_histogram_json(dir / "fedlion_E2_seed1.hist.json");
  EXPECT_EQ(h.total(), 10u * 12 * 8);
}

TEST(RunPlan, RerunIsByteIdenticalAtAnyThreadCount) {
  const auto base = scratch_dir();
  auto plan = parse_plan({{"rounds", 6},
                          {"local_steps", 3},
                          {"clients_per_round", 4},
                          {"grid", {{"algorithm", {"fedlion", "mfl"}}}},
                          {"problem", {{"kind", "mlp-classification"}, {"num_clients", 6},
                                       {"num_examples", 300}, {"hidden_dim", 8}}}});
  std::vector<std::filesystem::path> dirs;
  for (int threads : {1, 3, 1}) {
    plan.output_dir = base / ("t" + std::to_string(threads) + "_" + std::to_string(dirs.size()));
    dirs.push_back(plan.output_dir);
    ASSERT_EQ(run_plan(plan, {.threads = threads}), 0);
  }
  omp_set_num_threads(1);
  for (const auto& r : plan.runs()) {
    const auto ref = slurp(dirs[0] / (r.name + ".csv"));
    EXPECT_FALSE(ref.empty());
    for (const auto& d : dirs) EXPECT_EQ(slurp(d / (r.name + ".csv")), ref) << d;
    EXPECT_EQ(slurp(dirs[1] / (r.name + ".ckpt")), slurp(dirs[0] / (r.name + ".ckpt")));
  }
  EXPECT_EQ(slurp(dirs[1] / "manifest.json"), slurp(dirs[0] / "manifest.json"));
}

TEST(RunPlan, FailedRunLeavesMarkerAndNonzeroExit) {
  const auto dir = scratch_dir();
  auto plan = parse_plan({{"rounds", 2},
                          {"problem", {{"kind", "external-csv"}, {"path", (dir / "none.csv").string()},
                                       {"num_clients", 2}}}});
  plan.output_dir = dir / "out";
  EXPECT_NE(run_plan(plan), 0);
  EXPECT_TRUE(std::filesystem::exists(plan.output_dir / "fedlion_E1_seed0.failed"));
  std::ifstream in(plan.output_dir / "manifest.json");
  EXPECT_EQ(json::parse(in)["runs"][0]["status"], "failed");
}

TEST(Replay, ReproducesTheFinalModel) {
  const auto dir = scratch_dir();
  auto plan = parse_plan({{"rounds", 9},
                          {"local_steps", 4},
                          {"lr", 0.02},
                          {"clients_per_round", 3},
                          {"capture_packets", true},
                          {"seed", 4}});
  plan.output_dir = dir;
  ASSERT_EQ(run_plan(plan), 0);
  ReplayOptions o;
  o.init_checkpoint = dir / "fedlion_E4_seed4.init.ckpt";
  o.final_checkpoint = dir / "fedlion_E4_seed4.ckpt";
  o.lr = 0.02;
  const auto rep = replay_capture(dir / "fedlion_E4_seed4.packets", o);
  EXPECT_EQ(rep.packets, 27u);
  EXPECT_EQ(rep.rounds, 9u);
  EXPECT_EQ(rep.reencode_mismatches, 0u);
  ASSERT_TRUE(rep.max_abs_diff.has_value());
  EXPECT_EQ(*rep.max_abs_diff, 0.0);
  EXPECT_EQ(rep.to_json()["rounds"], 9);

  const auto without = replay_capture(dir / "fedlion_E4_seed4.packets", {});
  EXPECT_FALSE(without.model.has_value());
  EXPECT_FALSE(without.max_abs_diff.has_value());
}
