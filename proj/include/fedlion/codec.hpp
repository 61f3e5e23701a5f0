// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedlion/tensor.hpp"

namespace fedlion {

enum class Algorithm { fedlion, fedavg, mfl };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

/// Integer client update with every value in [-E, E].
struct DeltaVector {
  std::vector<std::int32_t> values;
  int E = 1;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const DeltaVector&, const DeltaVector&) = default;
};

/// ceil(log2(2E + 1)): bits per coordinate in the packed delta.
int delta_bit_width(int E);

/// Offset-binary (v + E), w bits per value, packed MSB-first, zero-padded to
/// a byte boundary. Output is ceil(d*w/8) bytes.
std::vector<std::uint8_t> encode_delta(const DeltaVector& delta);

/// Inverse of encode_delta. Throws FormatError on a length mismatch, an
/// offset above 2E, or nonzero padding bits.
DeltaVector decode_delta(std::span<const std::uint8_t> bytes, std::size_t d, int E);

inline constexpr std::uint16_t kFlagMomentum = 0x1;
inline constexpr std::size_t kPacketHeaderBytes = 16;

/// Little-endian wire header, fields in this order.
struct PacketHeader {
  std::uint32_t round = 0;
  std::uint32_t client_id = 0;
  std::uint16_t E = 0;
  std::uint32_t d = 0;
  std::uint16_t flags = 0;

  friend bool operator==(const PacketHeader&, const PacketHeader&) = default;
};

struct UplinkPacket {
  PacketHeader header;
  DeltaVector delta;
  std::vector<float> momentum;  // empty unless kFlagMomentum is set
};

struct EncodedPacket {
  std::vector<std::uint8_t> bytes;
  /// max |m64 - float(m64)| over the momentum block.
  double max_narrowing_error = 0.0;
};

/// header | delta_block | momentum_block (d little-endian binary32).
/// An empty `momentum` omits the block and clears the flag.
EncodedPacket encode_packet(std::uint32_t round, std::uint32_t client_id, const DeltaVector& delta,
                            const ParamVector& momentum);
UplinkPacket decode_packet(std::span<const std::uint8_t> bytes);

/// Writes a `.packets` capture: each packet prefixed with its u32 LE length.
class PacketCaptureWriter {
 public:
  explicit PacketCaptureWriter(const std::filesystem::path& path);
  void append(std::span<const std::uint8_t> packet);
  std::size_t packets_written() const { return count_; }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t count_ = 0;
};

std::vector<std::vector<std::uint8_t>> read_capture(const std::filesystem::path& path);

struct CommCost {
  std::uint64_t uplink_bits_per_client = 0;
  std::uint64_t downlink_bits_per_client = 0;
  /// n * (uplink + downlink)
  std::uint64_t total_round_bits = 0;
};

/// Bits on the wire for one round. Full-precision elements count 32 bits.
///   uplink:   fedlion d*w + 32d, fedavg 32d, mfl 64d
///   downlink: fedavg 32d, fedlion/mfl 64d
CommCost account_round(Algorithm algorithm, std::size_t d, int E, int n);

struct DeltaHistogram {
  int E = 1;
  /// counts[k] = occurrences of value k - E.
  std::vector<std::uint64_t> counts;
  double entropy_bits = 0.0;

  std::uint64_t total() const;
  nlohmann::json to_json() const;
  static DeltaHistogram from_json(const nlohmann::json& j);
};

/// Streaming tally of delta values; all inputs must share E.
class DeltaTally {
 public:
  explicit DeltaTally(int E);
  void add(const DeltaVector& delta);
  DeltaHistogram finish() const;

 private:
  int E_;
  std::vector<std::uint64_t> counts_;
};

/// Exact counts over {-E..E} and empirical entropy in bits per coordinate.
DeltaHistogram delta_histogram(std::span<const DeltaVector> deltas);

/// -sum p log2 p over nonzero counts.
double empirical_entropy_bits(std::span<const std::uint64_t> counts);

}  // namespace fedlion
