// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedlion/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <vector>

#include "fedlion/errors.hpp"

namespace fedlion {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear: return "linear";
    case ModelKind::logistic: return "logistic";
    case ModelKind::mlp: return "mlp";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "linear") return ModelKind::linear;
  if (s == "logistic") return ModelKind::logistic;
  if (s == "mlp") return ModelKind::mlp;
  throw UsageError("unknown model kind '" + s + "'");
}

ModelArch ModelArch::linear(std::size_t input_dim) {
  return {ModelKind::linear, input_dim, 0, 1};
}

ModelArch ModelArch::logistic(std::size_t input_dim, std::size_t num_classes) {
  return {ModelKind::logistic, input_dim, 0, num_classes};
}

ModelArch ModelArch::mlp(std::size_t input_dim, std::size_t hidden_dim,
                         std::size_t num_classes) {
  return {ModelKind::mlp, input_dim, hidden_dim, num_classes};
}

std::size_t ModelArch::d() const {
  switch (kind) {
    case ModelKind::linear: return input_dim + 1;
    case ModelKind::logistic: return num_classes * input_dim + num_classes;
    case ModelKind::mlp:
      return hidden_dim * input_dim + hidden_dim + num_classes * hidden_dim + num_classes;
  }
  return 0;
}

nlohmann::json ModelArch::to_json() const {
  return {{"kind", to_string(kind)},
          {"input_dim", input_dim},
          {"hidden_dim", hidden_dim},
          {"num_classes", num_classes},
          {"d", d()}};
}

ModelArch ModelArch::from_json(const nlohmann::json& j) {
  ModelArch a;
  a.kind = model_kind_from_string(j.at("kind").get<std::string>());
  a.input_dim = j.at("input_dim").get<std::size_t>();
  a.hidden_dim = j.value("hidden_dim", std::size_t{0});
  a.num_classes = j.value("num_classes", std::size_t{1});
  return a;
}

namespace {

void check_inputs(const ModelArch& arch, const ParamVector& params, const Batch& batch) {
  if (params.size() != arch.d()) {
    throw ShapeError("model expects " + std::to_string(arch.d()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  if (batch.empty()) throw UsageError("empty batch");
  if (arch.kind != ModelKind::linear && arch.num_classes < 2) {
    throw UsageError("classification model needs at least 2 classes");
  }
  if (arch.kind == ModelKind::mlp && arch.hidden_dim == 0) {
    throw UsageError("mlp needs a positive hidden_dim");
  }
  for (const Example* e : batch) {
    if (e->features.size() != arch.input_dim) {
      throw ShapeError("example has " + std::to_string(e->features.size()) +
                       " features, model expects " + std::to_string(arch.input_dim));
    }
    if (arch.kind != ModelKind::linear &&
        (e->label < 0 || static_cast<std::size_t>(e->label) >= arch.num_classes)) {
      throw UsageError("label " + std::to_string(e->label) + " out of range");
    }
  }
}

// out[r] = b[r] + sum_c W[r][c] * in[c]
void affine(const double* W, const double* b, const double* in, std::size_t rows,
            std::size_t cols, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    double s = b[r];
    const double* w = W + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s += w[c] * in[c];
    out[r] = s;
  }
}

// Cross-entropy of `logits` against `label`; overwrites logits with softmax - onehot.
double softmax_xent(std::vector<double>& logits, int label) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - peak);
  const double lse = peak + std::log(z);
  const double loss = lse - logits[static_cast<std::size_t>(label)];
  for (auto& v : logits) v = std::exp(v - lse);
  logits[static_cast<std::size_t>(label)] -= 1.0;
  return loss;
}

struct MlpLayout {
  std::size_t w1, b1, w2, b2;
  explicit MlpLayout(const ModelArch& a)
      : w1(0),
        b1(a.hidden_dim * a.input_dim),
        w2(b1 + a.hidden_dim),
        b2(w2 + a.num_classes * a.hidden_dim) {}
};

// Returns the summed (not averaged) loss; accumulates summed gradient if g != nullptr.
double evaluate(const ModelArch& arch, const ParamVector& params, const Batch& batch,
                ParamVector* g) {
  const double* p = params.data();
  double* gp = g ? g->data() : nullptr;
  const std::size_t in = arch.input_dim;
  const std::size_t C = arch.num_classes;
  double total = 0.0;

  switch (arch.kind) {
    case ModelKind::linear: {
      for (const Example* e : batch) {
        double yhat = p[in];
        for (std::size_t j = 0; j < in; ++j) yhat += p[j] * e->features[j];
        const double r = yhat - e->target;
        total += r * r;
        if (gp) {
          for (std::size_t j = 0; j < in; ++j) gp[j] += 2.0 * r * e->features[j];
          gp[in] += 2.0 * r;
        }
      }
      break;
    }
    case ModelKind::logistic: {
      std::vector<double> z(C);
      for (const Example* e : batch) {
        affine(p, p + C * in, e->features.data(), C, in, z.data());
        total += softmax_xent(z, e->label);
        if (gp) {
          for (std::size_t k = 0; k < C; ++k) {
            double* row = gp + k * in;
            for (std::size_t j = 0; j < in; ++j) row[j] += z[k] * e->features[j];
            gp[C * in + k] += z[k];
          }
        }
      }
      break;
    }
    case ModelKind::mlp: {
      const std::size_t H = arch.hidden_dim;
      const MlpLayout L(arch);
      std::vector<double> a(H), z(C), da(H);
      for (const Example* e : batch) {
        affine(p + L.w1, p + L.b1, e->features.data(), H, in, a.data());
        for (auto& v : a) v = std::tanh(v);
        affine(p + L.w2, p + L.b2, a.data(), C, H, z.data());
        total += softmax_xent(z, e->label);
        if (!gp) continue;
        std::fill(da.begin(), da.end(), 0.0);
        for (std::size_t k = 0; k < C; ++k) {
          const double* w2 = p + L.w2 + k * H;
          double* gw2 = gp + L.w2 + k * H;
          for (std::size_t h = 0; h < H; ++h) {
            gw2[h] += z[k] * a[h];
            da[h] += w2[h] * z[k];
          }
          gp[L.b2 + k] += z[k];
        }
        for (std::size_t h = 0; h < H; ++h) {
          const double dz = da[h] * (1.0 - a[h] * a[h]);
          double* gw1 = gp + L.w1 + h * in;
          for (std::size_t j = 0; j < in; ++j) gw1[j] += dz * e->features[j];
          gp[L.b1 + h] += dz;
        }
      }
      break;
    }
  }
  return total;
}

}  // namespace

double loss(const ModelArch& arch, const ParamVector& params, const Batch& batch) {
  check_inputs(arch, params, batch);
  const double value = evaluate(arch, params, batch, nullptr) / static_cast<double>(batch.size());
  if (!std::isfinite(value)) throw NumericError("model loss is not finite");
  return value;
}

ParamVector grad(const ModelArch& arch, const ParamVector& params, const Batch& batch) {
  check_inputs(arch, params, batch);
  ParamVector g(arch.d());
  evaluate(arch, params, batch, &g);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& v : g) v *= inv;
  require_finite(g.span(), "model gradient");
  return g;
}

ParamVector glorot_init(const ModelArch& arch, CounterRng& rng) {
  ParamVector p(arch.d());
  auto fill = [&](std::size_t offset, std::size_t fan_out, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < fan_out * fan_in; ++i) {
      p[offset + i] = limit * (2.0 * rng.uniform() - 1.0);
    }
  };
  switch (arch.kind) {
    case ModelKind::linear: fill(0, 1, arch.input_dim); break;
    case ModelKind::logistic: fill(0, arch.num_classes, arch.input_dim); break;
    case ModelKind::mlp: {
      const MlpLayout L(arch);
      fill(L.w1, arch.hidden_dim, arch.input_dim);
      fill(L.w2, arch.num_classes, arch.hidden_dim);
      break;
    }
  }
  return p;
}

void write_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                      const ParamVector& params) {
  header["d"] = params.size();
  header["format"] = "fedlion-checkpoint-v1";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << header.dump() << '\n';
  std::vector<char> block(params.size() * 8);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(params[i]);
    for (int b = 0; b < 8; ++b) block[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  out.write(block.data(), static_cast<std::streamsize>(block.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header");
  Checkpoint ck;
  try {
    ck.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }
  if (!ck.header.contains("d")) throw FormatError(path.string() + ": header lacks 'd'");
  const auto d = ck.header["d"].get<std::size_t>();
  std::vector<unsigned char> block(d * 8);
  in.read(reinterpret_cast<char*>(block.data()), static_cast<std::streamsize>(block.size()));
  if (static_cast<std::size_t>(in.gcount()) != block.size()) {
    throw FormatError(path.string() + ": truncated parameter block");
  }
  ck.params = ParamVector(d);
  for (std::size_t i = 0; i < d; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(block[i * 8 + b]) << (8 * b);
    ck.params[i] = std::bit_cast<double>(bits);
  }
  return ck;
}

}  // namespace fedlion
