// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace fedlion {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox-4x32 with 10 rounds (Salmon et al., SC'11).
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

/// SplitMix64 finalizer; used to fold tuples of ids into a key or stream id.
std::uint64_t mix64(std::uint64_t x);

/// Folds an ordered list of 64-bit ids into one value.
std::uint64_t hash_ids(std::initializer_list<std::uint64_t> ids);

/// Stream purposes. Kept stable: changing a value changes every run.
enum class StreamTag : std::uint64_t {
  data = 1,
  init = 2,
  sampling = 3,
  minibatch = 4,
  partition = 5,
  eval = 6,
};

/// Counter-based generator. The output is a pure function of
/// (key, stream, draw index), so a stream can be recreated anywhere without
/// replaying other streams. Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint32_t;

  CounterRng() : CounterRng(0, 0) {}
  CounterRng(std::uint64_t key, std::uint64_t stream) : key_(key), stream_(stream) {}

  /// Stream keyed by a global seed and an ordered tuple of ids.
  static CounterRng keyed(std::uint64_t seed, StreamTag tag,
                          std::initializer_list<std::uint64_t> ids = {});

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Uniform integer in [0, bound), rejection-sampled (no modulo bias).
  std::uint64_t uniform_index(std::uint64_t bound);
  /// Standard normal via Box-Muller.
  double normal();
  /// Gamma(shape, 1) via Marsaglia-Tsang.
  double gamma(double shape);

  /// Number of 32-bit words consumed so far.
  std::uint64_t draws() const { return block_ == 0 ? 0 : (block_ - 1) * 4 + lane_; }

  friend bool operator==(const CounterRng&, const CounterRng&) = default;

 private:
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::uint32_t lane_ = 4;
  PhiloxCounter buffer_{};
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace fedlion
