// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// fedlion run <plan.json> [--out DIR] [--threads K]
// fedlion --replay <file.packets> [--init CKPT] [--final CKPT] [--lr G]
// fedlion partition <data.csv> --clients N --alpha A --seed S --out manifest.json

#include <CLI11.hpp>

#include <iostream>

#include "fedlion/data.hpp"
#include "fedlion/errors.hpp"
#include "fedlion/harness.hpp"

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const fedlion::ValidationError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const fedlion::UsageError*>(&e) != nullptr) return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic federated learning simulator (FedLion, FedAvg, MFL-SGDwM)"};
  app.require_subcommand(0, 1);

  std::string replay_path;
  std::string init_ckpt, final_ckpt;
  double replay_lr = 0.001;
  auto* replay = app.add_option("--replay", replay_path, "Decode and re-aggregate a .packets capture");
  app.add_option("--init", init_ckpt, "Initial checkpoint for --replay")->needs(replay);
  app.add_option("--final", final_ckpt, "Final checkpoint to compare against")->needs(replay);
  app.add_option("--lr", replay_lr, "Server learning rate for --replay")->needs(replay);

  auto* run = app.add_subcommand("run", "Execute an experiment plan");
  std::string plan_path, out_dir;
  int threads = 0;
  bool serial = false;
  run->add_option("plan", plan_path, "Plan file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides the plan)");
  run->add_option("--threads", threads, "OpenMP threads; never changes results")
      ->check(CLI::NonNegativeNumber);
  run->add_flag("--serial", serial, "Use the serial reference path");
  bool verbose = false;
  run->add_flag("-v,--verbose", verbose, "Report progress on stderr");

  auto* part = app.add_subcommand("partition", "Dirichlet-partition a labeled CSV");
  std::string csv_path, manifest_path;
  int clients = 10;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  part->add_option("csv", csv_path, "CSV with columns f0..f{k-1},label")
      ->required()
      ->check(CLI::ExistingFile);
  part->add_option("--clients", clients, "Number of clients")->check(CLI::PositiveNumber);
  part->add_option("--alpha", alpha, "Dirichlet concentration");
  part->add_option("--seed", seed, "Partition seed");
  part->add_option("--out", manifest_path, "Manifest path (stdout when absent)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      fedlion::ExperimentPlan plan = fedlion::load_plan(plan_path);
      if (!out_dir.empty()) plan.output_dir = out_dir;
      fedlion::RunPlanOptions opts;
      opts.threads = threads;
      opts.policy = serial ? fedlion::ExecutionPolicy::serial : fedlion::ExecutionPolicy::parallel;
      opts.quiet = !verbose;
      return fedlion::run_plan(plan, opts);
    }
    if (*part) {
      const fedlion::Dataset data = fedlion::load_csv(csv_path);
      const auto labels = data.labels();
      const auto parts = fedlion::dirichlet_partition(labels, clients, alpha, seed);
      if (manifest_path.empty()) {
        std::cout << fedlion::partition_manifest(parts).dump(2) << '\n';
      } else {
        fedlion::write_partition_manifest(manifest_path, parts);
      }
      return 0;
    }
    if (!replay_path.empty()) {
      fedlion::ReplayOptions opts;
      if (!init_ckpt.empty()) opts.init_checkpoint = init_ckpt;
      if (!final_ckpt.empty()) opts.final_checkpoint = final_ckpt;
      opts.lr = replay_lr;
      const auto rep = fedlion::replay_capture(replay_path, opts);
      std::cout << rep.to_json().dump(2) << '\n';
      return rep.reencode_mismatches == 0 ? 0 : 1;
    }
    std::cout << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
