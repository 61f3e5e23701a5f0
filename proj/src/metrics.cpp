// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedlion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedlion/errors.hpp"

namespace fedlion {

std::optional<DensityReport> gradient_density(const ParamVector& v, int n) {
  if (n < 1) throw UsageError("gradient_density: n must be at least 1");
  const double l2 = l2_norm(v);
  if (l2 == 0.0) return std::nullopt;
  DensityReport r;
  r.density = l1_norm(v) / l2;
  r.threshold = std::pow(static_cast<double>(n), 0.25);
  r.dense = r.density > r.threshold;
  return r;
}

std::optional<HeterogeneityReport> alpha_from_gradients(const ParamVector& global,
                                                        std::span<const ParamVector> locals,
                                                        const ParamVector& x) {
  if (locals.empty()) throw UsageError("estimate_alpha: no clients");
  const double denom = l1_norm(global);
  if (denom < kDegenerateGradientL1) return std::nullopt;
  HeterogeneityReport rep;
  rep.eval_point = x;
  rep.per_client_ratios.reserve(locals.size());
  for (const auto& g : locals) {
    const double ratio = l1_norm(subtract(global, g)) / denom;
    rep.per_client_ratios.push_back(ratio);
    rep.alpha_hat = std::max(rep.alpha_hat, ratio);
  }
  rep.outside_theorem_regime = rep.alpha_hat > 1.0 / 3.0;
  return rep;
}

std::optional<HeterogeneityReport> estimate_alpha(const Objective& objective,
                                                  std::span<const ClientShard> shards,
                                                  const ParamVector& x) {
  if (shards.empty()) throw UsageError("estimate_alpha: no clients");
  std::vector<ParamVector> locals;
  locals.reserve(shards.size());
  for (const auto& s : shards) locals.push_back(objective.local_gradient(x, s));
  return alpha_from_gradients(mean_reduce(locals), locals, x);
}

RateFit fit_rate(std::span<const RoundRecord> records, RateMetric metric, RateFitOptions options) {
  std::vector<double> xs, ys;
  RateFit fit;
  double running_sum = 0.0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const double raw = records[k].grad_l1;
    running_sum += raw;
    double value = options.running_average ? running_sum / static_cast<double>(k + 1) : raw;
    if (metric == RateMetric::grad_l1_sq) value *= value;
    if (!(value > 0.0) || !std::isfinite(value) || records[k].round < 1) {
      ++fit.excluded;
      continue;
    }
    xs.push_back(std::log(static_cast<double>(records[k].round)));
    ys.push_back(std::log(value));
  }
  if (xs.size() < 10) {
    throw UsageError("fit_rate needs at least 10 usable records, got " + std::to_string(xs.size()));
  }
  const double m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw UsageError("fit_rate: all records share one round index");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += r * r;
  }
  // A flat series is fitted perfectly by slope 0.
  const bool flat = std::all_of(ys.begin(), ys.end(), [&](double y) { return y == ys[0]; });
  fit.r2 = flat ? 1.0 : 1.0 - ss_res / syy;
  return fit;
}

namespace {

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string optional_real(const std::optional<double>& v) { return v ? real(*v) : std::string(); }

double parse_real(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("metrics line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

std::optional<double> parse_optional(const std::string& s, int line) {
  if (s.empty()) return std::nullopt;
  return parse_real(s, line);
}

}  // namespace

std::string format_metrics(std::span<const RoundRecord> records) {
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    out << r.round << ',' << real(r.train_loss) << ',' << real(r.grad_l1) << ','
        << real(r.grad_l2) << ',' << optional_real(r.density) << ','
        << real(r.density_threshold) << ',' << optional_real(r.alpha_hat) << ','
        << r.uplink_bits << ',' << r.downlink_bits << ',' << real(r.wall_ms) << '\n';
  }
  return out.str();
}

void emit_metrics(std::span<const RoundRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_metrics(records);
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<RoundRecord> parse_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw FormatError(path.string() + ": unexpected metrics header");
  }
  std::vector<RoundRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 10) {
      throw FormatError(path.string() + ": line " + std::to_string(lineno) + " has " +
                        std::to_string(cells.size()) + " fields");
    }
    RoundRecord r;
    try {
      r.round = std::stoi(cells[0]);
      r.uplink_bits = std::stoull(cells[7]);
      r.downlink_bits = std::stoull(cells[8]);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad integer on line " + std::to_string(lineno));
    }
    r.train_loss = parse_real(cells[1], lineno);
    r.grad_l1 = parse_real(cells[2], lineno);
    r.grad_l2 = parse_real(cells[3], lineno);
    r.density = parse_optional(cells[4], lineno);
    r.density_threshold = parse_real(cells[5], lineno);
    r.alpha_hat = parse_optional(cells[6], lineno);
    r.wall_ms = parse_real(cells[9], lineno);
    out.push_back(r);
  }
  return out;
}

void write_histogram_json(const DeltaHistogram& hist, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << hist.to_json().dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

DeltaHistogram read_histogram_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return DeltaHistogram::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace fedlion
