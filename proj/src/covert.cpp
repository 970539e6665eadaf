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

#include "armcache/covert.hpp"

#include <algorithm>
#include <set>

#include "armcache/memspace.hpp"

namespace armcache {

std::uint16_t checksum(std::span<const std::uint8_t> bits, unsigned width) {
  if (width < 1 || width > 16) throw Error(ErrorKind::precondition, "checksum width must be 1..16");
  std::uint16_t crc = 0xFFFF;
  for (auto b : bits) {
    bool fb = ((crc >> 15) & 1u) ^ (b & 1u);
    crc = static_cast<std::uint16_t>(crc << 1);
    if (fb) crc ^= 0x1021;
  }
  return static_cast<std::uint16_t>(width == 16 ? crc : crc & ((1u << width) - 1));
}

void ChannelConfig::validate() const {
  if (n < 1 || n > 64) throw Error(ErrorKind::config, "data bits must be 1..64");
  if (s < 1 || s > 31) throw Error(ErrorKind::config, "sequence bits must be 1..31");
  if (c < 1 || c > 16 || x < 1 || x > 16) throw Error(ErrorKind::config, "checksum bits must be 1..16");
  if (primitive == Primitive::prime_probe)
    throw Error(ErrorKind::unsupported, "covert channel runs over fr, er or ff");
  if (watchdog == 0) throw Error(ErrorKind::config, "watchdog must be positive");
}

namespace {

void push_bits(std::vector<std::uint8_t>& out, std::uint64_t v, unsigned width) {
  for (unsigned i = width; i-- > 0;) out.push_back(static_cast<std::uint8_t>((v >> i) & 1u));
}

std::uint64_t take_bits(std::span<const std::uint8_t> bits, std::size_t from, unsigned width) {
  std::uint64_t v = 0;
  for (unsigned i = 0; i < width; ++i) v = (v << 1) | (bits[from + i] & 1u);
  return v;
}

std::uint64_t mask(unsigned width) { return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1; }

}  // namespace

Packet make_packet(const ChannelConfig& cfg, std::uint64_t data, std::uint32_t seq) {
  Packet p;
  p.data = data & mask(cfg.n);
  p.seq = static_cast<std::uint32_t>(seq & mask(cfg.s));
  std::vector<std::uint8_t> body;
  push_bits(body, p.data, cfg.n);
  push_bits(body, p.seq, cfg.s);
  p.check = checksum(body, cfg.c);
  return p;
}

std::vector<std::uint8_t> packet_bits(const ChannelConfig& cfg, const Packet& p) {
  std::vector<std::uint8_t> out;
  out.reserve(cfg.packet_bits());
  push_bits(out, p.data, cfg.n);
  push_bits(out, p.seq, cfg.s);
  push_bits(out, p.check, cfg.c);
  return out;
}

std::optional<Packet> parse_packet(const ChannelConfig& cfg, std::span<const std::uint8_t> bits) {
  if (bits.size() != cfg.packet_bits()) throw Error(ErrorKind::length_mismatch, "packet length");
  Packet p;
  p.data = take_bits(bits, 0, cfg.n);
  p.seq = static_cast<std::uint32_t>(take_bits(bits, cfg.n, cfg.s));
  p.check = static_cast<std::uint32_t>(take_bits(bits, cfg.n + cfg.s, cfg.c));
  if (checksum(bits.first(cfg.n + cfg.s), cfg.c) != p.check) return std::nullopt;
  return p;
}

std::vector<std::uint8_t> ack_bits(const ChannelConfig& cfg, std::uint32_t seq) {
  std::vector<std::uint8_t> out;
  push_bits(out, seq & mask(cfg.s), cfg.s);
  std::uint16_t chk = checksum(out, cfg.x);
  push_bits(out, chk, cfg.x);
  return out;
}

std::optional<std::uint32_t> parse_ack(const ChannelConfig& cfg, std::span<const std::uint8_t> bits) {
  if (bits.size() != cfg.ack_bits()) throw Error(ErrorKind::length_mismatch, "ack length");
  if (checksum(bits.first(cfg.s), cfg.x) != take_bits(bits, cfg.s, cfg.x)) return std::nullopt;
  return static_cast<std::uint32_t>(take_bits(bits, 0, cfg.s));
}

ChannelConfig default_channel(const DeviceProfile& profile, Primitive primitive) {
  ChannelConfig cfg;
  cfg.primitive = primitive;
  cfg.sender_core = 0;
  cfg.receiver_core = profile.core_count() > 1 ? profile.core_count() - 1 : 0;
  // Eviction only reaches the sender's copy through a shared L2.
  if (primitive == Primitive::evict_reload)
    cfg.receiver_core = profile.first_core(0) + profile.clusters[0].cores - 1;
  return cfg;
}

namespace {

// Reads one bit per target with the configured primitive and flips each
// classified bit with probability `noise`.
class BitReader {
 public:
  BitReader(Attacker& a, const ChannelConfig& cfg, std::vector<ProbeTarget> targets, double noise,
            std::uint64_t seed)
      : a_(&a), cfg_(&cfg), targets_(std::move(targets)), noise_(noise), rng_(seed) {
    if (noise_ > 0) {
      gap_ = std::geometric_distribution<std::uint64_t>(noise_);
      until_flip_ = gap_(rng_);
    }
  }

  // Returns the cycles spent.
  Cycles read(std::vector<std::uint8_t>& bits) {
    bits.resize(targets_.size());
    Cycles spent = 0;
    for (std::size_t i = 0; i < targets_.size(); ++i) {
      ProbeResult r;
      switch (cfg_->primitive) {
        case Primitive::flush_reload: r = flush_reload(*a_, targets_[i]); break;
        case Primitive::evict_reload: r = evict_reload(*a_, targets_[i], cfg_->strategy); break;
        case Primitive::flush_flush: r = flush_flush(*a_, targets_[i]); break;
        case Primitive::prime_probe: break;
      }
      spent += r.cycles;
      bits[i] = r.state == HitMiss::hit;
      if (noise_ > 0) {
        if (until_flip_ == 0) {
          bits[i] ^= 1;
          until_flip_ = gap_(rng_);
        } else {
          --until_flip_;
        }
      }
    }
    return spent;
  }

 private:
  Attacker* a_;
  const ChannelConfig* cfg_;
  std::vector<ProbeTarget> targets_;
  double noise_;
  Rng rng_;
  std::geometric_distribution<std::uint64_t> gap_;
  std::uint64_t until_flip_ = 0;
};

struct Shared {
  const ChannelConfig* cfg;
  std::vector<Packet> packets;       // ground truth, one per chunk
  std::vector<std::uint64_t> delivered;
  ChannelStats stats;
  bool done = false;
  bool stalled = false;
};

class Sender : public Agent {
 public:
  Sender(Hierarchy& h, Shared& sh, std::vector<PhysicalAddress> bit_lines, BitReader acks,
         AccessKind kind)
      : h_(&h), sh_(&sh), lines_(std::move(bit_lines)), acks_(std::move(acks)), kind_(kind) {}

  void run(Cycles, Cycles) override {
    const ChannelConfig& cfg = *sh_->cfg;
    if (sh_->done || sh_->stalled) return;
    if (awaiting_) {
      acks_.read(scratch_);
      auto ack = parse_ack(cfg, scratch_);
      if (ack && *ack == sh_->packets[next_].seq) {
        ++next_;
        attempts_ = 0;
      }
      awaiting_ = false;
    }
    if (next_ == sh_->packets.size()) {
      sh_->done = true;
      return;
    }
    if (++attempts_ > cfg.watchdog) {
      sh_->stalled = true;
      return;
    }
    bits_ = packet_bits(cfg, sh_->packets[next_]);
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i]) h_->access(cfg.sender_core, lines_[i], kind_);
    ++sh_->stats.packets_sent;
    awaiting_ = true;
  }

 private:
  Hierarchy* h_;
  Shared* sh_;
  std::vector<PhysicalAddress> lines_;
  BitReader acks_;
  AccessKind kind_;
  std::size_t next_ = 0;
  std::uint64_t attempts_ = 0;
  bool awaiting_ = false;
  std::vector<std::uint8_t> bits_, scratch_;
};

class Receiver : public Agent {
 public:
  Receiver(Hierarchy& h, Shared& sh, std::vector<PhysicalAddress> ack_lines, BitReader bits,
           AccessKind kind)
      : h_(&h), sh_(&sh), lines_(std::move(ack_lines)), bits_(std::move(bits)), kind_(kind) {}

  void run(Cycles, Cycles) override {
    const ChannelConfig& cfg = *sh_->cfg;
    if (sh_->done || sh_->stalled) return;
    bits_.read(scratch_);
    auto p = parse_packet(cfg, scratch_);
    if (!p) {
      ++sh_->stats.packets_corrupt;
      return;
    }
    std::uint32_t modulus_mask = static_cast<std::uint32_t>((std::uint64_t{1} << cfg.s) - 1);
    std::uint32_t expected = static_cast<std::uint32_t>(sh_->delivered.size()) & modulus_mask;
    if (p->seq == expected && sh_->delivered.size() < sh_->packets.size()) {
      std::size_t idx = sh_->delivered.size();
      sh_->delivered.push_back(p->data);
      if (p->data != sh_->packets[idx].data) ++sh_->stats.undetected_error_count;
    } else if (p->seq != ((expected + modulus_mask) & modulus_mask)) {
      return;  // neither new nor the previous packet
    }
    auto ack = ack_bits(cfg, p->seq);
    for (std::size_t i = 0; i < ack.size(); ++i)
      if (ack[i]) h_->access(cfg.receiver_core, lines_[i], kind_);
  }

 private:
  Hierarchy* h_;
  Shared* sh_;
  std::vector<PhysicalAddress> lines_;
  BitReader bits_;
  AccessKind kind_;
  std::vector<std::uint8_t> scratch_;
};

// Greedily takes object lines whose L2 set is unused in every cluster.
std::vector<std::uint64_t> pick_lines(const Hierarchy& h, const ProcessSpace& proc,
                                      const MappingDescriptor& m, std::size_t count) {
  std::vector<std::set<std::uint32_t>> used(h.profile().clusters.size());
  std::vector<std::uint64_t> out;
  std::uint32_t line = h.profile().max_line_size();
  for (std::uint64_t off = 0; off < m.length && out.size() < count; off += line) {
    PhysicalAddress pa = proc.translate(m.virtual_base + off);
    bool free = true;
    for (std::uint32_t c = 0; c < used.size(); ++c)
      free = free && !used[c].count(set_index(h.l2_geometry(c), pa));
    if (!free) continue;
    for (std::uint32_t c = 0; c < used.size(); ++c) used[c].insert(set_index(h.l2_geometry(c), pa));
    out.push_back(off);
  }
  if (out.size() < count) throw Error(ErrorKind::setup, "not enough set-disjoint channel lines");
  return out;
}

void check_disjoint(const Hierarchy& h, const ProcessSpace& proc, const MappingDescriptor& m,
                    const std::vector<std::uint64_t>& offsets) {
  for (std::uint32_t c = 0; c < h.profile().clusters.size(); ++c) {
    std::set<std::uint32_t> seen;
    for (auto off : offsets) {
      if (off >= m.length) throw Error(ErrorKind::setup, "channel offset outside the object");
      if (!seen.insert(set_index(h.l2_geometry(c), proc.translate(m.virtual_base + off))).second)
        throw Error(ErrorKind::setup, "two channel addresses share an L2 set");
    }
  }
}

Threshold calibrate_side(Attacker& a, ProcessSpace& proc, std::uint32_t helper,
                         const ChannelConfig& cfg) {
  const auto& buf = proc.map_private(1 << 20);
  std::vector<PhysicalAddress> fresh;
  for (auto v : line_pool(buf, a.hierarchy().profile().max_line_size()))
    fresh.push_back(proc.translate(v));
  if (cfg.primitive == Primitive::flush_flush) {
    auto s = sample_flush(a, std::span(fresh).first(256), 2000);
    a.flush_threshold = calibrate(s.misses, s.hits);
  }
  auto s = sample_reload(a, helper, fresh, std::min<std::size_t>(fresh.size() / 2, 2000));
  a.threshold = calibrate(s.hits, s.misses);
  return a.threshold;
}

std::vector<ProbeTarget> targets_for(const Hierarchy& h, ProcessSpace& proc,
                                     const MappingDescriptor& m,
                                     const std::vector<std::uint64_t>& offsets,
                                     const ChannelConfig& cfg, std::uint32_t core) {
  std::vector<ProbeTarget> out;
  std::optional<std::vector<VirtualAddress>> pool;
  const CacheGeometry& g = h.l2_geometry(h.cluster_of(core));
  if (cfg.primitive == Primitive::evict_reload) {
    std::uint64_t pages = std::uint64_t{g.sets} * g.line_size / proc.page_size() + 1;
    const auto& buf = proc.map_private(pages * proc.page_size() * cfg.strategy.size * 3);
    pool = line_pool(buf, g.line_size);
  }
  std::uint32_t id = 0;
  for (auto off : offsets) {
    VirtualAddress v = m.virtual_base + off;
    std::optional<EvictionSet> es;
    if (pool) es = build_eviction_set(proc, v, *pool, cfg.strategy.size, g);
    out.push_back(make_probe_target(proc, v, id++, std::move(es)));
  }
  return out;
}

}  // namespace

TransmitResult transmit(std::span<const std::uint8_t> payload, const ChannelConfig& cfg_in,
                        const DeviceProfile& profile, double noise, std::uint64_t seed) {
  ChannelConfig cfg = cfg_in;
  cfg.validate();
  if (payload.empty()) throw Error(ErrorKind::precondition, "payload must not be empty");
  if (noise < 0 || noise > 1) throw Error(ErrorKind::config, "noise must be a probability");

  Hierarchy h(profile, derive_seed(seed, {1}));
  if (cfg.sender_core >= h.core_count() || cfg.receiver_core >= h.core_count())
    throw Error(ErrorKind::config, "channel core out of range");
  PhysicalMemory mem(profile.physical_memory, profile.page_size, derive_seed(seed, {2}));
  ProcessSpace sp(mem, 1, profile.pagemap_restricted), rp(mem, 2, profile.pagemap_restricted);
  std::uint64_t object_len = 64 * profile.page_size;
  const auto& sm = sp.map_shared(cfg.object, object_len);
  const auto& rm = rp.map_shared(cfg.object, object_len);

  if (cfg.bit_offsets.empty() && cfg.ack_offsets.empty()) {
    auto lines = pick_lines(h, sp, sm, cfg.packet_bits() + cfg.ack_bits());
    cfg.bit_offsets.assign(lines.begin(), lines.begin() + cfg.packet_bits());
    cfg.ack_offsets.assign(lines.begin() + cfg.packet_bits(), lines.end());
  }
  if (cfg.bit_offsets.size() != cfg.packet_bits() || cfg.ack_offsets.size() != cfg.ack_bits())
    throw Error(ErrorKind::setup, "channel address count does not match the frame layout");
  std::vector<std::uint64_t> all = cfg.bit_offsets;
  all.insert(all.end(), cfg.ack_offsets.begin(), cfg.ack_offsets.end());
  check_disjoint(h, sp, sm, all);

  TimerModel timer = TimerModel::preset(cfg.timer);
  Attacker rx(h, cfg.receiver_core, timer, derive_seed(seed, {3}));
  Attacker tx(h, cfg.sender_core, timer, derive_seed(seed, {4}));
  calibrate_side(rx, rp, cfg.sender_core, cfg);
  calibrate_side(tx, sp, cfg.receiver_core, cfg);
  h.flush_all();

  Shared sh;
  sh.cfg = &cfg;
  std::size_t chunk = (cfg.n + 7) / 8;
  std::uint32_t seq = 0;
  for (std::size_t off = 0; off < payload.size(); off += chunk, ++seq) {
    std::uint64_t data = 0;
    for (std::size_t b = 0; b < chunk; ++b)
      data = (data << 8) | (off + b < payload.size() ? payload[off + b] : 0);
    // Chunks wider than n bits keep their low n bits; n is a multiple of 8 by default.
    sh.packets.push_back(make_packet(cfg, data, seq));
  }

  std::vector<PhysicalAddress> tx_lines, rx_ack_lines;
  for (auto off : cfg.bit_offsets) tx_lines.push_back(sp.translate(sm.virtual_base + off));
  for (auto off : cfg.ack_offsets) rx_ack_lines.push_back(rp.translate(rm.virtual_base + off));

  auto rx_targets = targets_for(h, rp, rm, cfg.bit_offsets, cfg, cfg.receiver_core);
  auto tx_targets = targets_for(h, sp, sm, cfg.ack_offsets, cfg, cfg.sender_core);
  // Writers use the kind that is inclusive in their cluster so that the
  // reader's evictions reach the writer's L1.
  AccessKind tx_kind = inclusive_kind(profile.clusters[h.cluster_of(cfg.sender_core)]);
  AccessKind rx_kind = inclusive_kind(profile.clusters[h.cluster_of(cfg.receiver_core)]);
  Sender sender(h, sh, tx_lines, BitReader(tx, cfg, tx_targets, noise, derive_seed(seed, {5})),
                tx_kind);
  Receiver receiver(h, sh, rx_ack_lines,
                    BitReader(rx, cfg, rx_targets, noise, derive_seed(seed, {6})), rx_kind);

  Scheduler sched(cfg.quantum, 0.0, derive_seed(seed, {7}));
  sched.add(sender);
  sched.add(receiver);
  sched.run_while([&] { return !sh.done && !sh.stalled; }, ~Cycles{0} >> 2);
  if (sh.stalled)
    throw Error(ErrorKind::channel_stalled,
                "packet " + std::to_string(sh.delivered.size()) + " unacknowledged after " +
                    std::to_string(cfg.watchdog) + " attempts");

  TransmitResult out;
  ChannelStats& st = sh.stats;
  st.elapsed_cycles = sched.now();
  st.payload_bits_delivered = payload.size() * 8;
  st.raw_bandwidth = static_cast<double>(st.payload_bits_delivered) * 1e6 /
                     static_cast<double>(std::max<Cycles>(st.elapsed_cycles, 1));
  st.packet_error_rate = st.packets_sent
                             ? static_cast<double>(st.packets_corrupt) /
                                   static_cast<double>(st.packets_sent)
                             : 0.0;
  for (auto d : sh.delivered)
    for (std::size_t b = chunk; b-- > 0;) out.delivered.push_back(static_cast<std::uint8_t>(d >> (8 * b)));
  out.delivered.resize(payload.size());
  out.stats = st;
  return out;
}

}  // namespace armcache
