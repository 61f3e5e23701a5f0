// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedlion/data.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "fedlion/errors.hpp"

namespace fedlion {

ClientShard make_shard(int client_id, std::vector<Example> examples, std::uint64_t seed) {
  if (examples.empty()) {
    throw UsageError("client " + std::to_string(client_id) + " has no examples");
  }
  ClientShard shard;
  shard.client_id = client_id;
  shard.examples = std::move(examples);
  shard.rng = CounterRng::keyed(seed, StreamTag::minibatch,
                                {static_cast<std::uint64_t>(client_id)});
  return shard;
}

Batch next_minibatch(ClientShard& shard, int batch_size) {
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  Batch batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    batch.push_back(&shard.examples[shard.rng.uniform_index(shard.examples.size())]);
  }
  return batch;
}

Batch full_batch(const ClientShard& shard) {
  Batch batch;
  batch.reserve(shard.examples.size());
  for (const auto& e : shard.examples) batch.push_back(&e);
  return batch;
}

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::synthetic_quadratic: return "synthetic-quadratic";
    case ProblemKind::synthetic_logistic: return "synthetic-logistic";
    case ProblemKind::mlp_classification: return "mlp-classification";
    case ProblemKind::external_csv: return "external-csv";
  }
  return "unknown";
}

ProblemKind problem_kind_from_string(const std::string& s) {
  if (s == "synthetic-quadratic") return ProblemKind::synthetic_quadratic;
  if (s == "synthetic-logistic") return ProblemKind::synthetic_logistic;
  if (s == "mlp-classification") return ProblemKind::mlp_classification;
  if (s == "external-csv") return ProblemKind::external_csv;
  throw UsageError("unknown problem kind '" + s + "'");
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.label);
  return out;
}

Dataset make_classification(const ClassificationOptions& opts, std::uint64_t seed) {
  if (opts.num_classes < 2) throw UsageError("classification needs at least 2 classes");
  if (opts.feature_dim < 1) throw UsageError("feature_dim must be positive");
  if (opts.num_examples < static_cast<std::size_t>(opts.num_classes)) {
    throw UsageError("need at least one example per class");
  }
  CounterRng rng = CounterRng::keyed(seed, StreamTag::data, {0});
  std::vector<std::vector<double>> means(static_cast<std::size_t>(opts.num_classes),
                                         std::vector<double>(opts.feature_dim));
  for (auto& mu : means) {
    for (auto& v : mu) v = opts.class_spread * rng.normal();
  }
  Dataset data;
  data.feature_dim = opts.feature_dim;
  data.num_classes = opts.num_classes;
  data.examples.reserve(opts.num_examples);
  for (std::size_t k = 0; k < opts.num_examples; ++k) {
    Example e;
    e.label = static_cast<int>(k % static_cast<std::size_t>(opts.num_classes));
    e.target = e.label;
    e.features.resize(opts.feature_dim);
    const auto& mu = means[static_cast<std::size_t>(e.label)];
    for (std::size_t j = 0; j < opts.feature_dim; ++j) {
      e.features[j] = mu[j] + opts.noise * rng.normal();
    }
    data.examples.push_back(std::move(e));
  }
  return data;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, std::size_t row) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("csv row " + std::to_string(row) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header row");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "label") {
    throw FormatError(path.string() + ": header must be f0..f{k-1},label");
  }
  const std::size_t k = header.size() - 1;
  for (std::size_t j = 0; j < k; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw FormatError(path.string() + ": expected column 'f" + std::to_string(j) + "', got '" +
                        header[j] + "'");
    }
  }
  Dataset data;
  data.feature_dim = k;
  int max_label = -1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != k + 1) {
      throw FormatError("csv row " + std::to_string(row) + ": expected " +
                        std::to_string(k + 1) + " columns");
    }
    Example e;
    e.features.resize(k);
    for (std::size_t j = 0; j < k; ++j) e.features[j] = parse_double(cells[j], row);
    int label = -1;
    const auto& lc = cells[k];
    const auto [ptr, ec] = std::from_chars(lc.data(), lc.data() + lc.size(), label);
    if (ec != std::errc() || ptr != lc.data() + lc.size() || label < 0) {
      throw FormatError("csv row " + std::to_string(row) + ": label must be a nonnegative integer");
    }
    e.label = label;
    e.target = label;
    max_label = std::max(max_label, label);
    data.examples.push_back(std::move(e));
  }
  if (data.examples.empty()) throw FormatError(path.string() + ": no data rows");
  data.num_classes = max_label + 1;
  return data;
}

Partition dirichlet_partition(std::span<const int> labels, int num_clients, double alpha,
                              std::uint64_t seed, int max_attempts) {
  if (!(alpha > 0.0)) throw UsageError("dirichlet alpha must be positive");
  if (num_clients < 1) throw UsageError("number of clients must be at least 1");
  if (labels.empty()) throw UsageError("no examples to partition");

  std::map<int, std::vector<std::size_t>> by_label_map;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw UsageError("labels must be nonnegative");
    by_label_map[labels[i]].push_back(i);
  }
  std::vector<std::vector<std::size_t>> pools;
  for (auto& [label, idx] : by_label_map) pools.push_back(std::move(idx));
  const std::size_t num_labels = pools.size();
  const auto N = static_cast<std::size_t>(num_clients);

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    CounterRng rng = CounterRng::keyed(seed, StreamTag::partition,
                                       {static_cast<std::uint64_t>(attempt)});
    std::vector<std::vector<double>> mix(N, std::vector<double>(num_labels));
    for (auto& p : mix) {
      double total = 0.0;
      for (auto& v : p) total += (v = rng.gamma(alpha));
      for (auto& v : p) v /= total;
    }
    std::vector<std::size_t> capacity(N, labels.size() / N);
    for (std::size_t i = 0; i < labels.size() % N; ++i) ++capacity[i];

    std::vector<std::size_t> next(num_labels, 0);
    Partition parts(N);
    std::size_t remaining = labels.size();
    while (remaining > 0) {
      for (std::size_t c = 0; c < N && remaining > 0; ++c) {
        if (parts[c].size() >= capacity[c]) continue;
        double mass = 0.0;
        for (std::size_t k = 0; k < num_labels; ++k) {
          if (next[k] < pools[k].size()) mass += mix[c][k];
        }
        std::size_t chosen = num_labels;
        if (mass > 0.0) {
          double u = rng.uniform() * mass;
          for (std::size_t k = 0; k < num_labels; ++k) {
            if (next[k] >= pools[k].size()) continue;
            chosen = k;
            u -= mix[c][k];
            if (u < 0.0) break;
          }
        } else {
          // Proportions underflowed on every remaining label: fall back to uniform.
          std::size_t open = 0;
          for (std::size_t k = 0; k < num_labels; ++k) open += next[k] < pools[k].size();
          std::size_t pick = rng.uniform_index(open);
          for (std::size_t k = 0; k < num_labels; ++k) {
            if (next[k] >= pools[k].size()) continue;
            if (pick-- == 0) {
              chosen = k;
              break;
            }
          }
        }
        parts[c].push_back(pools[chosen][next[chosen]++]);
        --remaining;
      }
    }
    bool any_empty = false;
    for (const auto& p : parts) any_empty = any_empty || p.empty();
    if (!any_empty) return parts;
  }
  throw PartitionError("dirichlet partition left a client empty after " +
                       std::to_string(max_attempts) + " attempts (" +
                       std::to_string(labels.size()) + " examples, " +
                       std::to_string(num_clients) + " clients)");
}

nlohmann::json partition_manifest(const Partition& parts) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t c = 0; c < parts.size(); ++c) j[std::to_string(c)] = parts[c];
  return j;
}

void write_partition_manifest(const std::filesystem::path& path, const Partition& parts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << partition_manifest(parts).dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<ClientShard> make_shards(const Dataset& data, const Partition& parts,
                                     std::uint64_t seed) {
  std::vector<ClientShard> shards;
  shards.reserve(parts.size());
  for (std::size_t c = 0; c < parts.size(); ++c) {
    std::vector<Example> local;
    local.reserve(parts[c].size());
    for (std::size_t idx : parts[c]) local.push_back(data.examples.at(idx));
    shards.push_back(make_shard(static_cast<int>(c), std::move(local), seed));
  }
  return shards;
}

}  // namespace fedlion
