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

#include "armcache/victims.hpp"

#include <algorithm>
#include <limits>

namespace armcache {

const EventFootprint& EventLibrary::at(const std::string& kind) const {
  auto it = events.find(kind);
  if (it == events.end()) throw Error(ErrorKind::unknown_event, "event kind '" + kind + "'");
  return it->second;
}

std::vector<std::string> EventLibrary::kinds() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : events) out.push_back(k);
  return out;
}

void VictimAgent::schedule(Cycles time, PhysicalAddress pa, AccessKind kind) {
  auto pos = std::upper_bound(queue_.begin() + static_cast<std::ptrdiff_t>(head_), queue_.end(),
                              time, [](Cycles t, const Access& a) { return t < a.time; });
  queue_.insert(pos, Access{time, pa, kind});
}

void VictimAgent::run(Cycles begin, Cycles end) {
  clock_ = std::max(clock_, begin);
  while (head_ < queue_.size() && clock_ < end && queue_[head_].time < end) {
    Access a = queue_[head_++];
    a.time = std::max(clock_, a.time);
    clock_ = a.time + hier_->access(core_, a.pa, a.kind).cycles;
    executed_.push_back(a);
  }
  if (head_ > 4096 && head_ * 2 > queue_.size()) {
    queue_.erase(queue_.begin(), queue_.begin() + static_cast<std::ptrdiff_t>(head_));
    head_ = 0;
  }
}

ScheduledEvent trigger_event(VictimAgent& victim, const EventLibrary& lib,
                             const ProcessSpace& proc, VirtualAddress object_base,
                             const std::string& kind, Cycles start, Cycles duration) {
  const EventFootprint& fp = lib.at(kind);
  ScheduledEvent ev{kind, start, start, 0};
  std::vector<PhysicalAddress> pas;
  for (auto off : fp.offsets) pas.push_back(proc.translate(object_base + off));
  std::uint64_t passes = fp.passes;
  if (fp.sustained) {
    Cycles d = duration ? duration : fp.duration;
    passes = std::max<std::uint64_t>(1, (d + fp.period - 1) / fp.period);
  }
  for (std::uint64_t p = 0; p < passes; ++p) {
    Cycles t = start + p * fp.period;
    for (auto pa : pas) victim.schedule(t, pa, AccessKind::instruction);
    ev.accesses += pas.size();
    ev.end = t;
  }
  return ev;
}

std::vector<ScheduledEvent> trigger_text(VictimAgent& victim, const EventLibrary& lib,
                                         const ProcessSpace& proc, VirtualAddress object_base,
                                         std::string_view text, Cycles start) {
  std::vector<ScheduledEvent> out;
  Cycles t = start;
  for (std::size_t i = 0; i < text.size(); ++i) {
    out.push_back(trigger_event(victim, lib, proc, object_base, "text", t));
    t = out.back().end + lib.inter_key_gap;
  }
  return out;
}

namespace {

std::uint8_t xtime(std::uint8_t x) {
  return static_cast<std::uint8_t>((x << 1) ^ ((x & 0x80) ? 0x1b : 0));
}

std::uint8_t rotl8(std::uint8_t x, int s) {
  return static_cast<std::uint8_t>((x << s) | (x >> (8 - s)));
}

struct Tables {
  std::array<std::uint8_t, 256> sbox{};
  std::array<std::array<std::uint32_t, 256>, 4> te{};

  Tables() {
    // Walk the multiplicative group with generator 3; q tracks the inverse.
    std::uint8_t p = 1, q = 1;
    do {
      p = static_cast<std::uint8_t>(p ^ (p << 1) ^ ((p & 0x80) ? 0x1b : 0));
      q ^= static_cast<std::uint8_t>(q << 1);
      q ^= static_cast<std::uint8_t>(q << 2);
      q ^= static_cast<std::uint8_t>(q << 4);
      if (q & 0x80) q ^= 0x09;
      sbox[p] = static_cast<std::uint8_t>(q ^ rotl8(q, 1) ^ rotl8(q, 2) ^ rotl8(q, 3) ^
                                          rotl8(q, 4) ^ 0x63);
    } while (p != 1);
    sbox[0] = 0x63;
    for (int x = 0; x < 256; ++x) {
      std::uint32_t s = sbox[static_cast<std::size_t>(x)];
      std::uint32_t s2 = xtime(static_cast<std::uint8_t>(s));
      std::uint32_t s3 = s2 ^ s;
      std::uint32_t w = (s2 << 24) | (s << 16) | (s << 8) | s3;
      for (int t = 0; t < 4; ++t) {
        te[static_cast<std::size_t>(t)][static_cast<std::size_t>(x)] = w;
        w = (w >> 8) | (w << 24);
      }
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

std::uint32_t load_be(const Block& b, int i) {
  auto at = [&](int k) { return static_cast<std::uint32_t>(b[static_cast<std::size_t>(k)]); };
  return (at(i) << 24) | (at(i + 1) << 16) | (at(i + 2) << 8) | at(i + 3);
}

void store_be(Block& b, int i, std::uint32_t v) {
  for (int k = 0; k < 4; ++k)
    b[static_cast<std::size_t>(i + k)] = static_cast<std::uint8_t>(v >> (24 - 8 * k));
}

}  // namespace

TTableAES::TTableAES(ProcessSpace& proc, TableMode mode, const Block& key,
                     std::uint64_t placement_seed, const std::string& object)
    : proc_(&proc), mode_(mode), key_(key) {
  const auto& sb = tables().sbox;
  for (int i = 0; i < 4; ++i) round_keys_[static_cast<std::size_t>(i)] = load_be(key, 4 * i);
  std::uint32_t rcon = 0x01;
  for (std::size_t i = 4; i < 44; ++i) {
    std::uint32_t t = round_keys_[i - 1];
    if (i % 4 == 0) {
      t = (t << 8) | (t >> 24);
      t = (std::uint32_t{sb[t >> 24]} << 24) | (std::uint32_t{sb[(t >> 16) & 0xff]} << 16) |
          (std::uint32_t{sb[(t >> 8) & 0xff]} << 8) | sb[t & 0xff];
      t ^= rcon << 24;
      rcon = xtime(static_cast<std::uint8_t>(rcon));
    }
    round_keys_[i] = round_keys_[i - 4] ^ t;
  }

  Rng rng(placement_seed);
  std::uint64_t page = proc.page_size();
  std::uint64_t line_slot = rng() % (page / 64);
  disalignment_ = static_cast<std::uint32_t>(4 * (rng() % 16));
  table_offset_ = line_slot * 64 + disalignment_;
  std::uint64_t length = table_offset_ + kTableBytes;
  mapping_ = mode == TableMode::shared ? &proc.map_shared(object, length)
                                       : &proc.map_private(length);
}

VirtualAddress TTableAES::entry_vaddr(int table, std::uint8_t index) const {
  return mapping_->virtual_base +
         (table_offset_ + 1024 * static_cast<std::uint64_t>(table) + 4 * std::uint64_t{index});
}

PhysicalAddress TTableAES::entry_paddr(int table, std::uint8_t index) const {
  return proc_->translate(entry_vaddr(table, index));
}

Block TTableAES::encrypt(const Block& in, const LookupSink& sink) const {
  const auto& te = tables().te;
  const auto* rk = round_keys_.data();
  auto look = [&](int round, int t, std::uint32_t idx) {
    if (sink) sink(round, t, static_cast<std::uint8_t>(idx));
    return te[static_cast<std::size_t>(t)][idx];
  };
  std::uint32_t s[4], u[4];
  for (int i = 0; i < 4; ++i) s[i] = load_be(in, 4 * i) ^ rk[i];
  for (int round = 1; round < 10; ++round) {
    rk += 4;
    for (int c = 0; c < 4; ++c)
      u[c] = look(round, 0, s[c] >> 24) ^ look(round, 1, (s[(c + 1) % 4] >> 16) & 0xff) ^
             look(round, 2, (s[(c + 2) % 4] >> 8) & 0xff) ^ look(round, 3, s[(c + 3) % 4] & 0xff) ^
             rk[c];
    std::copy(u, u + 4, s);
  }
  rk += 4;
  // Last round reuses the tables with byte masks, as OpenSSL 1.0.1 does.
  for (int c = 0; c < 4; ++c)
    u[c] = (look(10, 2, s[c] >> 24) & 0xff000000u) ^
           (look(10, 3, (s[(c + 1) % 4] >> 16) & 0xff) & 0x00ff0000u) ^
           (look(10, 0, (s[(c + 2) % 4] >> 8) & 0xff) & 0x0000ff00u) ^
           (look(10, 1, s[(c + 3) % 4] & 0xff) & 0x000000ffu) ^ rk[c];
  Block out{};
  for (int i = 0; i < 4; ++i) store_be(out, 4 * i, u[i]);
  return out;
}

TTableAES::Run TTableAES::run(Hierarchy& h, std::uint32_t core, const Block& plaintext,
                              Cycles preempt_at, const std::function<void()>& preempt) const {
  Run r;
  bool fired = !preempt;
  // Table lines resolve through at most two pages; cache the translation.
  std::uint64_t page = proc_->page_size();
  r.ciphertext = encrypt(plaintext, [&](int, int t, std::uint8_t idx) {
    if (!fired && r.cycles >= preempt_at) {
      fired = true;
      preempt();
    }
    std::uint64_t off = table_offset_ + 1024 * static_cast<std::uint64_t>(t) + 4 * std::uint64_t{idx};
    PhysicalAddress pa{mapping_->frames[off / page] * page + off % page};
    r.cycles += h.access(core, pa, AccessKind::data).cycles;
  });
  if (!fired) preempt();
  return r;
}

Trustlet::Trustlet(Hierarchy& h, PhysicalMemory& mem, TrustletConfig cfg, std::uint64_t seed)
    : hier_(&h), cfg_(std::move(cfg)), seed_(seed) {
  if (cfg_.core >= h.core_count()) throw Error(ErrorKind::config, "trustlet core out of range");
  if (cfg_.band_first > cfg_.band_last) throw Error(ErrorKind::config, "empty trustlet band");
  cluster_ = h.cluster_of(cfg_.core);
  const CacheGeometry& g = h.l2_geometry(cluster_);
  if (cfg_.band_last >= g.sets) throw Error(ErrorKind::config, "trustlet band outside the L2");

  std::map<std::uint32_t, std::uint32_t> need;
  for (std::uint32_t s = cfg_.band_first; s <= cfg_.band_last; ++s) need[s] = cfg_.lines_per_set;
  for (auto s : cfg_.prefix_sets) need[s] = std::max(need[s], cfg_.prefix_lines);
  std::size_t unmet = need.size();
  std::uint64_t page = mem.page_size();
  // Secure-world memory straight from the frame allocator.
  for (std::size_t guard = 0; unmet > 0; ++guard) {
    if (guard > mem.size() / page) throw Error(ErrorKind::out_of_memory, "trustlet memory");
    std::uint64_t frame = mem.allocate_frame();
    for (std::uint64_t off = 0; off < page; off += g.line_size) {
      PhysicalAddress pa{frame * page + off};
      std::uint32_t s = set_index(g, pa);
      auto it = need.find(s);
      if (it == need.end()) continue;
      auto& v = lines_[s];
      if (v.size() >= it->second) continue;
      v.push_back(pa);
      if (v.size() == it->second) --unmet;
    }
  }
}

std::vector<std::uint32_t> Trustlet::band_for(std::uint64_t key_id) const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t s = cfg_.band_first; s <= cfg_.band_last; ++s) {
    double u = static_cast<double>(derive_seed(seed_, {key_id, s}) >> 11) * 0x1.0p-53;
    if (u < cfg_.band_density) out.push_back(s);
  }
  return out;
}

std::vector<std::uint32_t> Trustlet::sets_touched(std::uint64_t key_id, bool key_valid) const {
  std::vector<std::uint32_t> out(cfg_.prefix_sets.begin(), cfg_.prefix_sets.end());
  if (key_valid)
    for (auto s : band_for(key_id)) out.push_back(s);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void Trustlet::invoke(std::uint64_t key_id, bool key_valid, const std::function<void()>& between) {
  if (cfg_.flush_on_enter) hier_->flush_all();
  if (between) between();
  for (auto s : cfg_.prefix_sets) {
    const auto& v = lines_.at(s);
    for (std::uint32_t k = 0; k < cfg_.prefix_lines; ++k) hier_->access(cfg_.core, v[k], cfg_.kind);
  }
  if (key_valid) {
    auto band = band_for(key_id);
    for (std::uint32_t it = 0; it < cfg_.iterations; ++it) {
      for (auto s : band) {
        const auto& v = lines_.at(s);
        for (std::uint32_t k = 0; k < cfg_.lines_per_set; ++k)
          hier_->access(cfg_.core, v[k], cfg_.kind);
      }
      if (between) between();
    }
  } else if (between) {
    between();
  }
  if (cfg_.flush_on_enter) hier_->flush_all();
}

}  // namespace armcache
