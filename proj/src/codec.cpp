// Copyright 2026 The FedLion Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedlion/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "fedlion/errors.hpp"

namespace fedlion {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::fedlion: return "fedlion";
    case Algorithm::fedavg: return "fedavg";
    case Algorithm::mfl: return "mfl-sgdwm";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "fedlion") return Algorithm::fedlion;
  if (s == "fedavg") return Algorithm::fedavg;
  if (s == "mfl-sgdwm" || s == "mfl") return Algorithm::mfl;
  throw UsageError("unknown algorithm '" + s + "'");
}

namespace {

void check_bound(int E) {
  if (E < 1 || E > std::numeric_limits<std::uint16_t>::max()) {
    throw UsageError("delta bound E must lie in [1, 65535], got " + std::to_string(E));
  }
}

std::size_t packed_bytes(std::size_t d, int w) {
  return (d * static_cast<std::size_t>(w) + 7) / 8;
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  T v = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) v |= static_cast<T>(static_cast<T>(in[pos + b]) << (8 * b));
  pos += sizeof(T);
  return v;
}

}  // namespace

int delta_bit_width(int E) {
  check_bound(E);
  const auto symbols = static_cast<std::uint64_t>(2 * E + 1);
  int w = 0;
  while ((std::uint64_t{1} << w) < symbols) ++w;
  return w;
}

std::vector<std::uint8_t> encode_delta(const DeltaVector& delta) {
  const int E = delta.E;
  const int w = delta_bit_width(E);
  std::vector<std::uint8_t> out(packed_bytes(delta.size(), w), 0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const std::int32_t v = delta.values[i];
    if (v < -E || v > E) {
      throw UsageError("delta value " + std::to_string(v) + " at coordinate " + std::to_string(i) +
                       " outside [-" + std::to_string(E) + ", " + std::to_string(E) + "]");
    }
    const auto offset = static_cast<std::uint32_t>(v + E);
    for (int b = w - 1; b >= 0; --b, ++pos) {
      if ((offset >> b) & 1u) out[pos / 8] |= static_cast<std::uint8_t>(0x80u >> (pos % 8));
    }
  }
  return out;
}

DeltaVector decode_delta(std::span<const std::uint8_t> bytes, std::size_t d, int E) {
  const int w = delta_bit_width(E);
  const std::size_t expected = packed_bytes(d, w);
  if (bytes.size() != expected) {
    throw FormatError("delta payload is " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(expected));
  }
  DeltaVector delta;
  delta.E = E;
  delta.values.resize(d);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < d; ++i) {
    std::uint32_t offset = 0;
    for (int b = 0; b < w; ++b, ++pos) {
      offset = (offset << 1) | ((bytes[pos / 8] >> (7 - pos % 8)) & 1u);
    }
    if (offset > static_cast<std::uint32_t>(2 * E)) {
      throw FormatError("decoded offset " + std::to_string(offset) + " exceeds 2E at coordinate " +
                        std::to_string(i));
    }
    delta.values[i] = static_cast<std::int32_t>(offset) - E;
  }
  for (; pos < bytes.size() * 8; ++pos) {
    if ((bytes[pos / 8] >> (7 - pos % 8)) & 1u) throw FormatError("nonzero padding bits");
  }
  return delta;
}

EncodedPacket encode_packet(std::uint32_t round, std::uint32_t client_id, const DeltaVector& delta,
                            const ParamVector& momentum) {
  if (!momentum.empty()) require_same_size(momentum.size(), delta.size(), "encode_packet");
  if (delta.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw UsageError("packet dimension exceeds u32");
  }
  EncodedPacket enc;
  auto& out = enc.bytes;
  const auto payload = encode_delta(delta);
  out.reserve(kPacketHeaderBytes + payload.size() + 4 * momentum.size());
  put_le<std::uint32_t>(out, round);
  put_le<std::uint32_t>(out, client_id);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(delta.E));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(delta.size()));
  put_le<std::uint16_t>(out, momentum.empty() ? 0 : kFlagMomentum);
  out.insert(out.end(), payload.begin(), payload.end());
  for (double m : momentum) {
    const auto f = static_cast<float>(m);
    if (!std::isfinite(f)) throw NumericError("momentum does not fit in binary32");
    enc.max_narrowing_error = std::max(enc.max_narrowing_error, std::abs(m - static_cast<double>(f)));
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  return enc;
}

UplinkPacket decode_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPacketHeaderBytes) throw FormatError("packet shorter than its header");
  UplinkPacket p;
  std::size_t pos = 0;
  p.header.round = get_le<std::uint32_t>(bytes, pos);
  p.header.client_id = get_le<std::uint32_t>(bytes, pos);
  p.header.E = get_le<std::uint16_t>(bytes, pos);
  p.header.d = get_le<std::uint32_t>(bytes, pos);
  p.header.flags = get_le<std::uint16_t>(bytes, pos);
  if (p.header.E == 0) throw FormatError("packet header has E = 0");
  if (p.header.flags & ~kFlagMomentum) throw FormatError("unknown packet flags");
  const std::size_t d = p.header.d;
  const int w = delta_bit_width(p.header.E);
  const std::size_t delta_bytes = packed_bytes(d, w);
  const bool has_momentum = p.header.flags & kFlagMomentum;
  const std::size_t expected = kPacketHeaderBytes + delta_bytes + (has_momentum ? 4 * d : 0);
  if (bytes.size() != expected) {
    throw FormatError("packet is " + std::to_string(bytes.size()) + " bytes, header implies " +
                      std::to_string(expected));
  }
  p.delta = decode_delta(bytes.subspan(pos, delta_bytes), d, p.header.E);
  pos += delta_bytes;
  if (has_momentum) {
    p.momentum.resize(d);
    for (auto& m : p.momentum) m = std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos));
  }
  return p;
}

PacketCaptureWriter::PacketCaptureWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw IoError("cannot write " + path.string());
}

void PacketCaptureWriter::append(std::span<const std::uint8_t> packet) {
  std::vector<std::uint8_t> prefix;
  put_le<std::uint32_t>(prefix, static_cast<std::uint32_t>(packet.size()));
  out_.write(reinterpret_cast<const char*>(prefix.data()), 4);
  out_.write(reinterpret_cast<const char*>(packet.data()), static_cast<std::streamsize>(packet.size()));
  out_.flush();
  if (!out_) throw IoError("write failed: " + path_.string());
  ++count_;
}

std::vector<std::vector<std::uint8_t>> read_capture(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<std::uint8_t>> packets;
  for (;;) {
    std::uint8_t prefix[4];
    in.read(reinterpret_cast<char*>(prefix), 4);
    if (in.gcount() == 0) break;
    if (in.gcount() != 4) throw FormatError(path.string() + ": truncated length prefix");
    std::size_t pos = 0;
    const auto len = get_le<std::uint32_t>(std::span<const std::uint8_t>(prefix, 4), pos);
    std::vector<std::uint8_t> packet(len);
    in.read(reinterpret_cast<char*>(packet.data()), len);
    if (static_cast<std::uint32_t>(in.gcount()) != len) {
      throw FormatError(path.string() + ": truncated packet");
    }
    packets.push_back(std::move(packet));
  }
  return packets;
}

CommCost account_round(Algorithm algorithm, std::size_t d, int E, int n) {
  if (n < 1) throw UsageError("account_round: n must be at least 1");
  const std::uint64_t full = 32ull * d;
  CommCost c;
  switch (algorithm) {
    case Algorithm::fedlion:
      c.uplink_bits_per_client = static_cast<std::uint64_t>(delta_bit_width(E)) * d + full;
      c.downlink_bits_per_client = 2 * full;
      break;
    case Algorithm::fedavg:
      c.uplink_bits_per_client = full;
      c.downlink_bits_per_client = full;
      break;
    case Algorithm::mfl:
      c.uplink_bits_per_client = 2 * full;
      c.downlink_bits_per_client = 2 * full;
      break;
    default: throw UsageError("account_round: unknown algorithm");
  }
  c.total_round_bits =
      static_cast<std::uint64_t>(n) * (c.uplink_bits_per_client + c.downlink_bits_per_client);
  return c;
}

double empirical_entropy_bits(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

std::uint64_t DeltaHistogram::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

nlohmann::json DeltaHistogram::to_json() const {
  return {{"E", E}, {"counts", counts}, {"entropy_bits", entropy_bits}};
}

DeltaHistogram DeltaHistogram::from_json(const nlohmann::json& j) {
  DeltaHistogram h;
  h.E = j.at("E").get<int>();
  h.counts = j.at("counts").get<std::vector<std::uint64_t>>();
  h.entropy_bits = j.at("entropy_bits").get<double>();
  if (h.counts.size() != static_cast<std::size_t>(2 * h.E + 1)) {
    throw FormatError("histogram must have 2E+1 counts");
  }
  return h;
}

DeltaTally::DeltaTally(int E) : E_(E), counts_(static_cast<std::size_t>(2 * E + 1), 0) {
  check_bound(E);
}

void DeltaTally::add(const DeltaVector& delta) {
  if (delta.E != E_) {
    throw UsageError("histogram mixes E=" + std::to_string(E_) + " and E=" + std::to_string(delta.E));
  }
  for (auto v : delta.values) {
    if (v < -E_ || v > E_) throw UsageError("delta value outside [-E, E]");
    ++counts_[static_cast<std::size_t>(v + E_)];
  }
}

DeltaHistogram DeltaTally::finish() const {
  DeltaHistogram h;
  h.E = E_;
  h.counts = counts_;
  h.entropy_bits = empirical_entropy_bits(counts_);
  return h;
}

DeltaHistogram delta_histogram(std::span<const DeltaVector> deltas) {
  if (deltas.empty()) throw UsageError("delta_histogram: no deltas");
  DeltaTally tally(deltas.front().E);
  for (const auto& d : deltas) tally.add(d);
  return tally.finish();
}

}  // namespace fedlion
