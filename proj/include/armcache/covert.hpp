// Copyright 2026, The armcache Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "armcache/attacks.hpp"
#include "armcache/cachesim.hpp"

namespace armcache {

// CRC-16 with polynomial 0x1021 and initial value 0xFFFF over `bits`
// (one bit per element, most significant first), truncated to the low
// `width` bits.
std::uint16_t checksum(std::span<const std::uint8_t> bits, unsigned width);

struct ChannelConfig {
  unsigned n = 32;  // data bits
  unsigned s = 8;   // sequence bits
  unsigned c = 16;  // packet checksum bits
  unsigned x = 8;   // ack checksum bits
  Primitive primitive = Primitive::flush_reload;
  std::string object = "libcovert.so";
  std::vector<std::uint64_t> bit_offsets;  // n + s + c lines of the object
  std::vector<std::uint64_t> ack_offsets;  // s + x lines of the object
  std::uint32_t sender_core = 0;
  std::uint32_t receiver_core = 1;
  Cycles quantum = 60000;
  std::uint64_t watchdog = 1000;  // attempts of one sequence number before giving up
  EvictionStrategy strategy{24, 1, 6};
  TimerKind timer = TimerKind::cycle_register;

  unsigned packet_bits() const { return n + s + c; }
  unsigned ack_bits() const { return s + x; }
  void validate() const;
};

struct Packet {
  std::uint64_t data = 0;
  std::uint32_t seq = 0;
  std::uint32_t check = 0;

  bool operator==(const Packet&) const = default;
};

// Computes the checksum field over data || seq.
Packet make_packet(const ChannelConfig& cfg, std::uint64_t data, std::uint32_t seq);
std::vector<std::uint8_t> packet_bits(const ChannelConfig& cfg, const Packet& p);
// Parses received bits; empty when the checksum does not match.
std::optional<Packet> parse_packet(const ChannelConfig& cfg, std::span<const std::uint8_t> bits);

std::vector<std::uint8_t> ack_bits(const ChannelConfig& cfg, std::uint32_t seq);
std::optional<std::uint32_t> parse_ack(const ChannelConfig& cfg, std::span<const std::uint8_t> bits);

// Default frame with the sender on core 0 and the receiver on the last core,
// or on the last core of the sender's cluster for Evict+Reload.
ChannelConfig default_channel(const DeviceProfile& profile, Primitive primitive);

struct ChannelStats {
  std::uint64_t payload_bits_delivered = 0;
  Cycles elapsed_cycles = 0;
  double raw_bandwidth = 0.0;  // bits per million cycles
  double packet_error_rate = 0.0;
  std::uint64_t undetected_error_count = 0;
  std::uint64_t packets_sent = 0;
  std::uint64_t packets_corrupt = 0;
};

struct TransmitResult {
  ChannelStats stats;
  std::vector<std::uint8_t> delivered;
};

// Runs sender and receiver as two scheduled agents until the payload is
// acknowledged. `noise` flips every classified bit independently.
TransmitResult transmit(std::span<const std::uint8_t> payload, const ChannelConfig& cfg,
                        const DeviceProfile& profile, double noise, std::uint64_t seed);

}  // namespace armcache
