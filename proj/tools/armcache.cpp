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

// armcache: experiment runner. Every subcommand takes --seed and writes one
// CSV table to --out (stdout when omitted).

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "armcache/analysis.hpp"
#include "armcache/attacks.hpp"
#include "armcache/config.hpp"
#include "armcache/covert.hpp"
#include "armcache/eviction.hpp"
#include "armcache/experiments.hpp"
#include "armcache/memspace.hpp"
#include "armcache/scenario.hpp"
#include "armcache/timing.hpp"

using namespace armcache;

namespace {

struct Common {
  std::string profile;
  std::string scenario;
  std::uint64_t seed = 0;
  std::string timer = "register";
  std::string primitive;
  std::string out;
  bool pagemap_restricted = false;
};

void add_common(CLI::App* sub, Common& c, bool with_scenario) {
  sub->add_option("--seed", c.seed, "seed for every random choice")->required();
  sub->add_option("--profile", c.profile, "device profile name or path");
  if (with_scenario) sub->add_option("--scenario", c.scenario, "scenario name or path");
  sub->add_option("--out", c.out, "output CSV (default stdout)");
  sub->add_flag("--pagemap-restricted", c.pagemap_restricted, "deny the physical address oracle");
}

DeviceProfile profile_for(const Common& c, const std::string& fallback) {
  DeviceProfile p = load_profile(c.profile.empty() ? fallback : c.profile);
  if (c.pagemap_restricted) p.pagemap_restricted = true;
  return p;
}

// Fixed notation so identical runs give identical bytes.
std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw Error(ErrorKind::config, "cannot write '" + path + "'");
    }
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

Range parse_range(const std::string& s) {
  auto dots = s.find("..");
  try {
    std::size_t used = 0;
    if (dots == std::string::npos) {
      auto v = static_cast<std::uint32_t>(std::stoul(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
      return {v, v};
    }
    std::string lo = s.substr(0, dots), hi = s.substr(dots + 2);
    Range r{static_cast<std::uint32_t>(std::stoul(lo, &used)), 0};
    if (used != lo.size()) throw std::invalid_argument(s);
    r.hi = static_cast<std::uint32_t>(std::stoul(hi, &used));
    if (used != hi.size()) throw std::invalid_argument(s);
    return r;
  } catch (const std::exception&) {
    throw Error(ErrorKind::config, "range must be a..b or a single value, got '" + s + "'");
  }
}

// "N=16..24,A=1..4,D=1..6"; omitted axes keep their defaults.
StrategyGrid parse_grid(const std::string& text) {
  StrategyGrid g{{16, 24}, {1, 4}, {1, 6}};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::config, "grid item must be AXIS=a..b, got '" + item + "'");
    std::string axis = item.substr(0, eq);
    Range r = parse_range(item.substr(eq + 1));
    if (axis == "N") g.size = r;
    else if (axis == "A") g.shift = r;
    else if (axis == "D") g.per_round = r;
    else throw Error(ErrorKind::config, "grid axis must be N, A or D, got '" + axis + "'");
  }
  return g;
}

AccessKind parse_kind(const std::string& s) {
  if (s == "data") return AccessKind::data;
  if (s == "instruction") return AccessKind::instruction;
  throw Error(ErrorKind::config, "kind must be data or instruction");
}

// evict -------------------------------------------------------------------

struct EvictArgs {
  Common c;
  std::string grid = "N=16..24,A=1..4,D=1..6";
  std::uint64_t trials = 1000;
  std::uint32_t core = 0;
  std::string kind = "data";
  unsigned threads = 0;
};

void run_evict(const EvictArgs& a) {
  DeviceProfile p = profile_for(a.c, "alcatel-pop2");
  EvalOptions opts;
  opts.core = a.core;
  if (!a.kind.empty()) opts.kind = parse_kind(a.kind);
  StrategyGrid grid = parse_grid(a.grid);
  auto ranked = search(grid, p, a.trials, a.c.seed, a.threads, opts);
  std::sort(ranked.begin(), ranked.end(), [](const RankedStrategy& x, const RankedStrategy& y) {
    const auto& s = x.strategy;
    const auto& t = y.strategy;
    return std::tie(s.size, s.shift, s.per_round) < std::tie(t.size, t.shift, t.per_round);
  });
  Output out(a.c.out);
  out.os() << "N,A,D,avg_cycles,eviction_rate\n";
  for (const auto& r : ranked)
    out.os() << r.strategy.size << ',' << r.strategy.shift << ',' << r.strategy.per_round << ','
             << num(r.result.avg_cycles, 2) << ',' << num(r.result.eviction_rate) << '\n';
}

// probe -------------------------------------------------------------------

struct ProbeArgs {
  Common c;
  std::size_t events = 10;
};

void run_probe(const ProbeArgs& a) {
  TemplateSpec spec = parse_template_spec(load_scenario_text(a.c.scenario.empty() ? "libinput" : a.c.scenario));
  if (!a.c.primitive.empty()) spec.scenario.primitive = parse_primitive(a.c.primitive);
  spec.scenario.timer = parse_timer_kind(a.c.timer);
  DeviceProfile p = profile_for(a.c, spec.profile);
  auto script = random_script(spec.scenario.library, a.events, derive_seed(a.c.seed, {1}));
  auto r = monitor_script(spec.scenario, p, spec.scenario.library.addresses, script,
                          derive_seed(a.c.seed, {2}));
  struct Row {
    Cycles t;
    std::uint32_t id;
    std::uint64_t ticks;
    HitMiss state;
  };
  std::vector<Row> rows;
  for (const auto& tr : r.traces)
    for (const auto& s : tr.samples) rows.push_back({s.timestamp, tr.target_id, s.ticks, s.state});
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    return std::tie(x.t, x.id) < std::tie(y.t, y.id);
  });
  Output out(a.c.out);
  out.os() << "timestamp_cycles,target_id,ticks,class\n";
  for (const auto& row : rows)
    out.os() << row.t << ',' << row.id << ',' << row.ticks << ',' << to_string(row.state) << '\n';
}

// covert ------------------------------------------------------------------

struct CovertArgs {
  Common c;
  std::string payload;
  std::optional<double> noise;
  std::string received;
};

void run_covert(const CovertArgs& a) {
  CovertSpec spec = parse_covert_spec(load_scenario_text(a.c.scenario.empty() ? "covert" : a.c.scenario));
  if (!a.c.primitive.empty()) spec.channel.primitive = parse_primitive(a.c.primitive);
  spec.channel.timer = parse_timer_kind(a.c.timer);
  DeviceProfile p = profile_for(a.c, spec.profile);
  ChannelConfig cfg = spec.channel;
  if (!spec.cores_given) {
    ChannelConfig d = default_channel(p, cfg.primitive);
    cfg.sender_core = d.sender_core;
    cfg.receiver_core = d.receiver_core;
  }
  std::string text = read_file(a.payload);
  std::vector<std::uint8_t> payload(text.begin(), text.end());
  auto r = transmit(payload, cfg, p, a.noise.value_or(spec.noise), a.c.seed);
  if (!a.received.empty()) {
    std::ofstream f(a.received, std::ios::binary);
    f.write(reinterpret_cast<const char*>(r.delivered.data()), static_cast<std::streamsize>(r.delivered.size()));
  }
  Output out(a.c.out);
  const auto& s = r.stats;
  out.os() << "bits_delivered,cycles,bandwidth_bits_per_Mcycle,packet_error_rate,undetected_errors\n";
  out.os() << s.payload_bits_delivered << ',' << s.elapsed_cycles << ',' << num(s.raw_bandwidth, 4)
           << ',' << num(s.packet_error_rate) << ',' << s.undetected_error_count << '\n';
}

// template ----------------------------------------------------------------

void run_template(const Common& c) {
  TemplateSpec spec = parse_template_spec(load_scenario_text(c.scenario.empty() ? "libinput" : c.scenario));
  if (!c.primitive.empty()) spec.scenario.primitive = parse_primitive(c.primitive);
  spec.scenario.timer = parse_timer_kind(c.timer);
  DeviceProfile p = profile_for(c, spec.profile);
  TemplateMatrix m = profile_template(spec.scenario, p, c.seed);
  Output out(c.out);
  out.os() << "address,event,hits\n";
  char addr[32];
  for (std::size_t r = 0; r < m.addresses.size(); ++r)
    for (std::size_t e = 0; e < m.events.size(); ++e) {
      std::snprintf(addr, sizeof addr, "0x%llx", static_cast<unsigned long long>(m.addresses[r]));
      out.os() << addr << ',' << m.events[e] << ',' << m.at(r, e) << '\n';
    }
}

// aes-attack --------------------------------------------------------------

struct AesArgs {
  Common c;
  std::string mode;
  std::optional<std::uint32_t> budget;
  std::string key;
};

Block parse_key(const std::string& hex) {
  if (hex.size() != 32) throw Error(ErrorKind::config, "key must be 32 hex digits");
  Block k{};
  for (std::size_t i = 0; i < 16; ++i) {
    try {
      k[i] = static_cast<std::uint8_t>(std::stoul(hex.substr(2 * i, 2), nullptr, 16));
    } catch (const std::exception&) {
      throw Error(ErrorKind::config, "key must be 32 hex digits");
    }
  }
  return k;
}

void run_aes(const AesArgs& a) {
  std::string name = a.c.scenario;
  if (name.empty()) name = a.mode == "private" ? "aes-private" : "aes-shared";
  AesSpec spec = parse_aes_spec(load_scenario_text(name));
  auto& sc = spec.scenario;
  if (a.mode == "shared") sc.mode = TableMode::shared;
  else if (a.mode == "private") sc.mode = TableMode::private_copy;
  else if (!a.mode.empty()) throw Error(ErrorKind::config, "mode must be shared or private");
  if (!a.c.primitive.empty()) sc.primitive = parse_primitive(a.c.primitive);
  sc.timer = parse_timer_kind(a.c.timer);
  if (a.budget) sc.budget = *a.budget;
  DeviceProfile p = profile_for(a.c, spec.profile);
  Block key{};
  if (a.key.empty()) {
    Rng rng(derive_seed(a.c.seed, {0x6b6579}));
    for (auto& b : key) b = static_cast<std::uint8_t>(rng());
  } else {
    key = parse_key(a.key);
  }
  auto r = aes_recover_upper_nibbles(sc, p, key, a.c.seed);
  Output out(a.c.out);
  out.os() << "byte_index,nibble,margin,correct\n";
  for (const auto& e : r.estimates) {
    out.os() << e.byte << ',';
    if (e.nibble) out.os() << static_cast<unsigned>(*e.nibble);
    out.os() << ',' << num(e.margin, 4) << ',';
    out.os() << (e.nibble && *e.nibble == (key[e.byte] >> 4) ? 1 : 0) << '\n';
  }
}

// tz-spy ------------------------------------------------------------------

struct TzArgs {
  Common c;
  std::optional<std::uint32_t> runs;
  bool flush = false;
};

void run_tz(const TzArgs& a) {
  std::string name = a.c.scenario.empty() ? (a.flush ? "trustlet-flush" : "trustlet") : a.c.scenario;
  TrustletSpec spec = parse_trustlet_spec(load_scenario_text(name));
  if (a.flush) spec.scenario.trustlet.flush_on_enter = true;
  spec.scenario.timer = parse_timer_kind(a.c.timer);
  DeviceProfile p = profile_for(a.c, spec.profile);
  std::uint32_t runs = a.runs.value_or(spec.runs);
  if (runs == 0) throw Error(ErrorKind::config, "runs must be positive");
  std::vector<double> mean;
  for (std::uint32_t r = 0; r < runs; ++r) {
    auto res = trustlet_spy(spec.scenario, p, derive_seed(a.c.seed, {r}));
    if (mean.empty()) mean.assign(res.mse.per_set.size(), 0.0);
    for (std::size_t s = 0; s < mean.size(); ++s) mean[s] += res.mse.per_set[s] / runs;
  }
  Output out(a.c.out);
  out.os() << "set,squared_error\n";
  for (std::size_t s = 0; s < mean.size(); ++s) out.os() << s << ',' << num(mean[s], 3) << '\n';
}

// histogram ---------------------------------------------------------------

struct HistArgs {
  Common c;
  std::string kind = "reload";
  std::size_t samples = 10000;
  std::uint64_t bin = 0;
  std::uint32_t core = 0;
  std::optional<std::uint32_t> helper;
};

void run_histogram(const HistArgs& a) {
  DeviceProfile p = profile_for(a.c, "galaxy-s6");
  Hierarchy h(p, derive_seed(a.c.seed, {1}));
  PhysicalMemory mem(p.physical_memory, p.page_size, derive_seed(a.c.seed, {2}));
  ProcessSpace proc(mem, 1, p.pagemap_restricted);
  if (a.core >= h.core_count()) throw Error(ErrorKind::config, "core out of range");
  Attacker att(h, a.core, TimerModel::preset(parse_timer_kind(a.c.timer)), derive_seed(a.c.seed, {3}));
  att.kind = inclusive_kind(p.clusters[h.cluster_of(a.core)]);
  std::uint32_t helper = a.helper.value_or(h.core_count() > 1 ? h.core_count() - 1 : a.core);
  if (helper >= h.core_count()) throw Error(ErrorKind::config, "helper core out of range");

  std::uint32_t line = p.max_line_size();
  LabeledTicks s;
  if (a.kind == "reload") {
    const auto& buf = proc.map_private(2 * a.samples * line + line);
    std::vector<PhysicalAddress> fresh;
    for (auto v : line_pool(buf, line)) fresh.push_back(proc.translate(v));
    s = sample_reload(att, helper, fresh, a.samples);
  } else if (a.kind == "flush") {
    const auto& buf = proc.map_private(64 * p.page_size);
    std::vector<PhysicalAddress> lines;
    for (auto v : line_pool(buf, line)) lines.push_back(proc.translate(v));
    s = sample_flush(att, lines, a.samples);
  } else {
    throw Error(ErrorKind::config, "histogram kind must be reload or flush");
  }
  std::uint64_t bin = a.bin;
  if (bin == 0) bin = std::max<std::uint64_t>(1, p.latency.dram.base / 100);
  Histogram hh = Histogram::build(s.hits, bin), hm = Histogram::build(s.misses, bin);
  std::size_t bins = std::max(hh.counts.size(), hm.counts.size());
  Output out(a.c.out);
  out.os() << "bin_start,hit,miss\n";
  for (std::size_t b = 0; b < bins; ++b) {
    std::uint64_t x = b < hh.counts.size() ? hh.counts[b] : 0;
    std::uint64_t y = b < hm.counts.size() ? hm.counts[b] : 0;
    if (x || y) out.os() << b * bin << ',' << x << ',' << y << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ARM cache hierarchy simulator and cache-attack toolkit"};
  app.require_subcommand(1);

  EvictArgs ev;
  auto* evict = app.add_subcommand("evict", "search eviction strategies");
  add_common(evict, ev.c, false);
  evict->add_option("--grid", ev.grid, "strategy grid, e.g. N=16..24,A=1..4,D=1..6");
  evict->add_option("--trials", ev.trials, "trials per strategy");
  evict->add_option("--core", ev.core, "attacker core");
  evict->add_option("--kind", ev.kind, "data or instruction");
  evict->add_option("--threads", ev.threads, "worker threads, 0 for all cores");

  ProbeArgs pr;
  auto* probe_cmd = app.add_subcommand("probe", "monitor a scripted victim");
  add_common(probe_cmd, pr.c, true);
  probe_cmd->add_option("--primitive", pr.c.primitive, "fr | er | pp | ff");
  probe_cmd->add_option("--timer", pr.c.timer, "register | syscall | clock | counterthread");
  probe_cmd->add_option("--events", pr.events, "number of scripted events");

  CovertArgs cv;
  auto* covert = app.add_subcommand("covert", "send a file over the covert channel");
  add_common(covert, cv.c, true);
  covert->add_option("--primitive", cv.c.primitive, "fr | er | ff");
  covert->add_option("--timer", cv.c.timer, "register | syscall | clock | counterthread");
  covert->add_option("--payload", cv.payload, "file to send")->required();
  covert->add_option("--noise", cv.noise, "bit flip probability");
  covert->add_option("--received", cv.received, "write the delivered bytes here");

  Common tp;
  auto* tmpl = app.add_subcommand("template", "profile a cache template matrix");
  add_common(tmpl, tp, true);
  tmpl->add_option("--primitive", tp.primitive, "fr | er | ff");
  tmpl->add_option("--timer", tp.timer, "register | syscall | clock | counterthread");

  AesArgs aes;
  auto* aes_cmd = app.add_subcommand("aes-attack", "first-round T-table attack");
  add_common(aes_cmd, aes.c, true);
  aes_cmd->add_option("--mode", aes.mode, "shared | private");
  aes_cmd->add_option("--primitive", aes.c.primitive, "er | fr | ff | pp");
  aes_cmd->add_option("--timer", aes.c.timer, "register | syscall | clock | counterthread");
  aes_cmd->add_option("--budget", aes.budget, "encryptions per key byte");
  aes_cmd->add_option("--key", aes.key, "victim key, 32 hex digits");

  TzArgs tz;
  auto* tz_cmd = app.add_subcommand("tz-spy", "per-set MSE of a trustlet");
  add_common(tz_cmd, tz.c, true);
  tz_cmd->add_option("--timer", tz.c.timer, "register | syscall | clock | counterthread");
  tz_cmd->add_option("--runs", tz.runs, "independent runs to average");
  tz_cmd->add_flag("--flush-on-enter", tz.flush, "trustlet flushes caches on entry and exit");

  HistArgs hi;
  auto* hist = app.add_subcommand("histogram", "hit and miss latency histograms");
  add_common(hist, hi.c, false);
  hist->add_option("--timer", hi.c.timer, "register | syscall | clock | counterthread");
  hist->add_option("--kind", hi.kind, "reload | flush");
  hist->add_option("--samples", hi.samples, "samples per class");
  hist->add_option("--bin", hi.bin, "bin width in ticks");
  hist->add_option("--core", hi.core, "measuring core");
  hist->add_option("--helper", hi.helper, "core that holds the remote lines");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*evict) run_evict(ev);
    else if (*probe_cmd) run_probe(pr);
    else if (*covert) run_covert(cv);
    else if (*tmpl) run_template(tp);
    else if (*aes_cmd) run_aes(aes);
    else if (*tz_cmd) run_tz(tz);
    else if (*hist) run_histogram(hi);
  } catch (const Error& e) {
    std::cerr << "armcache: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
