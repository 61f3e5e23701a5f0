// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "fedlion/data.hpp"
#include "fedlion/rng.hpp"
#include "fedlion/tensor.hpp"

namespace fedlion {

enum class ModelKind { linear, logistic, mlp };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

/// Model shape. Parameters are flattened layer-major, weights row-major
/// (output index outer), each layer's weights followed by its bias:
///
///   linear:   w[in], b
///   logistic: W[C][in], b[C]
///   mlp:      W1[H][in], b1[H], W2[C][H], b2[C]   (tanh hidden layer)
struct ModelArch {
  ModelKind kind = ModelKind::logistic;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t num_classes = 1;

  static ModelArch linear(std::size_t input_dim);
  static ModelArch logistic(std::size_t input_dim, std::size_t num_classes);
  static ModelArch mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes);

  std::size_t d() const;
  nlohmann::json to_json() const;
  static ModelArch from_json(const nlohmann::json& j);
};

/// Mean squared error (linear) or mean softmax cross-entropy over the batch.
double loss(const ModelArch& arch, const ParamVector& params, const Batch& batch);

/// Exact gradient of `loss`.
ParamVector grad(const ModelArch& arch, const ParamVector& params, const Batch& batch);

/// Glorot-uniform weights, zero biases.
ParamVector glorot_init(const ModelArch& arch, CounterRng& rng);

struct Checkpoint {
  nlohmann::json header;
  ParamVector params;
};

/// One line of JSON (must carry "d"), a newline, then d little-endian
/// IEEE-754 binary64 values.
void write_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                      const ParamVector& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace fedlion
