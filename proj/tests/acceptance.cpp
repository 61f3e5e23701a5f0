// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Criteria 7, 8 and 10 share one plan execution per thread
// count.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "fedlion/codec.hpp"
#include "fedlion/federated.hpp"
#include "fedlion/harness.hpp"
#include "fedlion/metrics.hpp"
#include "fedlion/models.hpp"
#include "oracles.hpp"

using namespace fedlion;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail) {
  std::printf("[%s] criterion %2d  %-34s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Desk MLP problem: 10-class synthetic set, Dirichlet(1) over 20 clients.
json desk_mlp_problem() {
  return {{"kind", "mlp-classification"}, {"num_clients", 20}, {"dirichlet_alpha", 1.0}};
}

// Smallest w with 2^w >= 2E+1, counted without floating point.
int bits_needed(int E) {
  int w = 0;
  while ((1LL << w) < 2LL * E + 1) ++w;
  return w;
}

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentPlan plan = parse_plan({{"problem", desk_mlp_problem()}});
  const Federation fed = build_federation(plan.problem, 1);
  std::uint64_t checked = 0, violations = 0;
  for (int E : {5, 10, 20}) {
    FederatedConfig c;
    c.algorithm = Algorithm::fedlion;
    c.rounds = 200;
    c.local_steps = E;
    c.clients_per_round = 5;
    c.seed = 1;
    RunOptions ro;
    ro.on_round = [&](int, std::span<const ClientUpdate> ups) {
      for (const auto& u : ups) {
        for (auto v : u.delta.values) {
          ++checked;
          if (v < -E || v > E) ++violations;
        }
      }
    };
    run_federation(fed, c, ro);
  }
  const double secs = seconds_since(t0);
  const std::uint64_t expected = 3ull * 200 * 5 * fed.spec.d;
  report(1, violations == 0 && checked == expected && secs < 120, "delta integrality",
         std::to_string(checked) + " coords, " + std::to_string(violations) + " violations, " +
             fmt("%.1fs", secs));
}

void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  int bad_cases = 0;
  for (std::size_t d : {1u, 3u, 64u, 1000u, 4097u}) {
    for (int E : {1, 5, 10, 20}) {
      DeltaVector v{std::vector<std::int32_t>(d), E};
      for (std::size_t j = 0; j < d; ++j) v.values[j] = static_cast<std::int32_t>(j % (2 * E + 1)) - E;
      const std::uint64_t bits = d * static_cast<std::uint64_t>(bits_needed(E));
      const auto bytes = encode_delta(v);
      const auto cost = account_round(Algorithm::fedlion, d, E, 1);
      const bool ok = bytes.size() == (bits + 7) / 8 &&
                      cost.uplink_bits_per_client - 32 * d == bits &&
                      delta_bit_width(E) == bits_needed(E) && decode_delta(bytes, d, E) == v;
      if (!ok) ++bad_cases;
    }
  }
  auto rng = CounterRng::keyed(2, StreamTag::data);
  int bad_roundtrips = 0;
  for (int k = 0; k < 10000; ++k) {
    const int E = 1 + static_cast<int>(rng.uniform_index(64));
    const std::size_t d = 1 + rng.uniform_index(256);
    DeltaVector v{std::vector<std::int32_t>(d), E};
    for (auto& x : v.values) {
      x = static_cast<std::int32_t>(rng.uniform_index(static_cast<std::uint64_t>(2 * E + 1))) - E;
    }
    if (decode_delta(encode_delta(v), d, E) != v) ++bad_roundtrips;
  }
  const double secs = seconds_since(t0);
  report(2, bad_cases == 0 && bad_roundtrips == 0 && secs < 30, "bit bound + codec identity",
         "20 (d,E) cases, " + std::to_string(bad_cases) + " bad; 10000 round trips, " +
             std::to_string(bad_roundtrips) + " bad; " + fmt("%.2fs", secs));
}

void criterion3() {
  int bad = 0, cases = 0;
  for (std::size_t d : {1u, 10u, 1002u, 1u << 20}) {
    for (int E = 1; E <= 20; ++E) {
      ++cases;
      const auto lion = account_round(Algorithm::fedlion, d, E, 1).uplink_bits_per_client;
      const auto mfl = account_round(Algorithm::mfl, d, E, 1).uplink_bits_per_client;
      const auto avg = account_round(Algorithm::fedavg, d, E, 1).uplink_bits_per_client;
      const std::uint64_t w = static_cast<std::uint64_t>(bits_needed(E));
      if (!(lion < mfl)) ++bad;
      if (!(lion <= avg + 32 * d + d * w)) ++bad;
    }
  }
  report(3, bad == 0, "uplink advantage",
         std::to_string(cases) + " (d,E) cases, " + std::to_string(bad) + " violations");
}

void criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  ClassificationOptions o;
  o.num_examples = 500;
  const Dataset data = make_classification(o, 4);
  Federation fed;
  fed.shards.push_back(make_shard(0, data.examples, 4));
  fed.objective = std::make_shared<ModelObjective>(ModelArch::mlp(o.feature_dim, 32, 10));
  fed.spec.num_clients = 1;
  fed.spec.d = fed.objective->dimension();

  FederatedConfig c;
  c.algorithm = Algorithm::fedlion;
  c.local_steps = 5;
  c.rounds = 100;  // 500 local steps
  c.clients_per_round = 1;
  c.seed = 4;
  std::vector<DeltaVector> deltas;
  RunOptions ro;
  ro.on_round = [&](int, std::span<const ClientUpdate> u) { deltas.push_back(u[0].delta); };
  const RunResult run = run_federation(fed, c, ro);
  const auto trace = oracle::centralized_lion(
      *fed.objective, oracle::rekeyed(fed.shards[0], c.seed), run.initial_model.values(),
      std::vector<double>(run.initial_model.size(), 0.0), 500, 5, c.batch_size, c.lr, c.beta1,
      c.beta2);
  std::uint64_t delta_mismatch = 0;
  for (std::size_t t = 0; t < deltas.size(); ++t) {
    for (std::size_t j = 0; j < deltas[t].size(); ++j) {
      delta_mismatch += deltas[t].values[j] != trace.block_signs[t][j];
    }
  }
  double dx = 0, dm = 0;
  for (std::size_t j = 0; j < trace.x.size(); ++j) {
    dx = std::max(dx, std::abs(run.final_state.x[j] - trace.x[j]));
    dm = std::max(dm, std::abs(run.final_state.m[j] - trace.m[j]));
  }
  const double secs = seconds_since(t0);
  report(4, deltas.size() == 100 && delta_mismatch == 0 && dx <= 1e-12 && dm <= 1e-12 && secs < 10,
         "centralized Lion oracle",
         std::to_string(delta_mismatch) + " delta mismatches, max|dx|=" + fmt("%.2e", dx) +
             ", max|dm|=" + fmt("%.2e", dm) + ", " + fmt("%.2fs", secs));
}

void criterion5() {
  auto rng = CounterRng::keyed(5, StreamTag::data);
  double worst = 0;
  for (const ModelArch& arch :
       {ModelArch::linear(8), ModelArch::logistic(8, 5), ModelArch::mlp(8, 12, 5)}) {
    std::vector<Example> ex(16);
    for (auto& e : ex) {
      e.features.resize(8);
      for (auto& f : e.features) f = rng.normal();
      e.label = static_cast<int>(rng.uniform_index(arch.num_classes));
      e.target = rng.normal();
    }
    Batch b;
    for (const auto& e : ex) b.push_back(&e);
    for (int point = 0; point < 50; ++point) {
      ParamVector x(arch.d());
      for (auto& v : x) v = rng.normal();
      const ParamVector g = grad(arch, x, b);
      const double bound = 1e-6 * (1 + linf_norm(g));
      for (std::size_t j = 0; j < x.size(); ++j) {
        ParamVector xp = x, xm = x;
        xp[j] += 1e-5;
        xm[j] -= 1e-5;
        const double fd = (loss(arch, xp, b) - loss(arch, xm, b)) / 2e-5;
        worst = std::max(worst, std::abs(fd - g[j]) / bound);
      }
    }
  }
  report(5, worst < 1.0, "gradient vs finite differences",
         "worst error / tolerance = " + fmt("%.3g", worst) + " over 3 kinds x 50 points");
}

void criterion6(const fs::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentPlan plan = parse_plan({{"rounds", 400},
                                    {"local_steps", 2},
                                    {"clients_per_round", 8},
                                    {"schedule", "theorem1"},
                                    {"seeds", {1, 2, 3}},
                                    {"problem", {{"kind", "synthetic-quadratic"}, {"num_clients", 8}}}});
  plan.output_dir = dir / "rate";
  const int rc = run_plan(plan);
  double slope = 0, r2 = 0;
  bool homogeneous = true;
  for (const auto& r : plan.runs()) {
    const auto recs = parse_metrics(plan.output_dir / (r.name + ".csv"));
    for (const auto& rec : recs) homogeneous &= rec.alpha_hat.value_or(0.0) == 0.0;
    const RateFit fit = fit_rate(recs, RateMetric::grad_l1);
    slope += fit.slope / 3;
    r2 += fit.r2 / 3;
  }
  const double secs = seconds_since(t0);
  report(6, rc == 0 && homogeneous && slope >= -0.75 && slope <= -0.15 && r2 > 0.8 && secs < 300,
         "convergence rate",
         "mean slope " + fmt("%.3f", slope) + ", mean r2 " + fmt("%.3f", r2) +
             (homogeneous ? ", alpha_hat=0" : ", alpha_hat!=0") + ", " + fmt("%.1fs", secs));
}

ExperimentPlan comparison_plan(const fs::path& out) {
  ExperimentPlan plan = parse_plan({{"rounds", 300},
                                    {"local_steps", 5},
                                    {"lr", 0.001},
                                    {"beta1", 0.9},
                                    {"beta2", 0.99},
                                    {"clients_per_round", 5},
                                    {"grid", {{"algorithm", {"fedlion", "fedavg", "mfl"}}}},
                                    {"seeds", {1, 2, 3}},
                                    {"problem", desk_mlp_problem()}});
  plan.output_dir = out;
  return plan;
}

void criteria7_8_10(const fs::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentPlan p8 = comparison_plan(dir / "threads8");
  const int rc8 = run_plan(p8, {.threads = 8});
  const double secs = seconds_since(t0);

  std::map<Algorithm, double> mean_loss;
  std::uint64_t rounds = 0, dense = 0;
  for (const auto& r : p8.runs()) {
    const auto recs = parse_metrics(p8.output_dir / (r.name + ".csv"));
    mean_loss[r.config.algorithm] += recs.back().train_loss / 3;
    if (r.config.algorithm == Algorithm::fedlion) {
      for (const auto& rec : recs) {
        ++rounds;
        dense += rec.density && *rec.density > rec.density_threshold;
      }
    }
  }
  const double lion = mean_loss[Algorithm::fedlion], avg = mean_loss[Algorithm::fedavg],
               mfl = mean_loss[Algorithm::mfl];
  report(7, rc8 == 0 && lion < avg && lion <= mfl && secs < 900, "desk MLP comparison",
         "final loss fedlion " + fmt("%.4f", lion) + ", fedavg " + fmt("%.4f", avg) + ", mfl " +
             fmt("%.4f", mfl) + "; " + fmt("%.1fs", secs));

  const double frac = rounds ? static_cast<double>(dense) / static_cast<double>(rounds) : 0.0;
  report(8, rounds == 900 && frac >= 0.95, "gradient density",
         fmt("%.1f%%", 100 * frac) + " of " + std::to_string(rounds) + " rounds above n^(1/4)");

  const ExperimentPlan p1 = comparison_plan(dir / "threads1");
  const int rc1 = run_plan(p1, {.threads = 1});
  ExperimentPlan p6 = parse_plan({{"rounds", 400},
                                  {"local_steps", 2},
                                  {"clients_per_round", 8},
                                  {"schedule", "theorem1"},
                                  {"seeds", {1, 2, 3}},
                                  {"problem", {{"kind", "synthetic-quadratic"}, {"num_clients", 8}}}});
  p6.output_dir = dir / "rate_threads1";
  const int rc6 = run_plan(p6, {.threads = 1});
  omp_set_num_threads(8);
  int compared = 0, differing = 0;
  auto compare = [&](const ExperimentPlan& a, const fs::path& other) {
    for (const auto& r : a.runs()) {
      ++compared;
      const auto x = slurp(a.output_dir / (r.name + ".csv"));
      if (x.empty() || x != slurp(other / (r.name + ".csv"))) ++differing;
    }
  };
  compare(p8, p1.output_dir);
  compare(p6, dir / "rate");
  report(10, rc1 == 0 && rc6 == 0 && differing == 0 && compared == 12, "determinism",
         std::to_string(compared) + " CSVs compared across 1 and 8 threads, " +
             std::to_string(differing) + " differ");
}

void criterion9() {
  QuadraticOptions o;
  o.noise_scale = 1.0;
  bool exact = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    o.heterogeneity = 0.0;
    const Federation fed = make_quadratic_federation(o, seed);
    for (std::uint64_t p = 0; p < 5; ++p) {
      const auto rep = estimate_alpha(*fed.objective, fed.shards, fed.objective->initial_point(p));
      exact &= rep && rep->alpha_hat == 0.0;
    }
  }
  std::vector<double> alphas;
  for (double h : {0.0, 0.1, 0.5, 1.0}) {
    o.heterogeneity = h;
    const Federation fed = make_quadratic_federation(o, 7);
    const auto rep = estimate_alpha(*fed.objective, fed.shards, fed.objective->initial_point(7));
    alphas.push_back(rep ? rep->alpha_hat : -1.0);
  }
  bool monotone = alphas[0] == 0.0;
  for (std::size_t k = 1; k < alphas.size(); ++k) monotone &= alphas[k] >= alphas[k - 1];
  std::string sweep;
  for (double a : alphas) sweep += fmt(" %.4f", a);
  report(9, exact && monotone, "heterogeneity estimator",
         std::string(exact ? "alpha_hat=0 on homogeneous" : "nonzero alpha_hat on homogeneous") +
             "; sweep" + sweep);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "fedlion_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::vector<std::function<void()>> steps{
      criterion1, criterion2, criterion3, criterion4, criterion5,
      [&] { criterion6(dir); }, criterion9, [&] { criteria7_8_10(dir); }};
  for (const auto& step : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      std::printf("[FAIL] aborted: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
